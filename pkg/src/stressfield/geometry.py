"""Pentagonal plate geometries: sampling, triangulation, and edge tagging.

A plate is a perturbed pentagon. Each of the five base vertices is jittered
independently in x and y; the five boundary edges keep their identity (E1..E5,
edge Ei joining base vertices i and i+1, 1-based, wrapping) so boundary
conditions and load positions can be expressed as edge subsets.
"""

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import Delaunay

from .errors import ConfigurationError, ConsistencyError, GeometryError
from .rng import GEOMETRY_STREAM, make_generator

# Base pentagon, counter-clockwise, meters. Bounding box 0.45 x 0.45 m, so the
# default +-0.05 m vertex jitter keeps every box dimension inside [0.30, 0.60].
BASE_PENTAGON = np.array(
    [
        [0.000, 0.000],
        [0.450, 0.000],
        [0.450, 0.300],
        [0.225, 0.450],
        [0.000, 0.350],
    ]
)

# Tolerance for deciding that a mesh node lies on a polygon edge.
EDGE_TOLERANCE = 1e-9


class EdgeLabel(enum.IntFlag):
    """Bitmask of pentagon edges; corner nodes carry both adjacent bits."""

    E1 = 1
    E2 = 2
    E3 = 4
    E4 = 8
    E5 = 16

    @classmethod
    def from_name(cls, name: str) -> "EdgeLabel":
        """Parse compact edge-set names like "E2" or "E4E5"."""
        out = cls(0)
        for part in name.upper().split("E"):
            if not part:
                continue
            idx = int(part)
            if not 1 <= idx <= 5:
                raise ValueError(f"edge index out of range in {name!r}")
            out |= cls(1 << (idx - 1))
        if not out:
            raise ValueError(f"empty edge set {name!r}")
        return out

    def to_name(self) -> str:
        return "".join(f"E{i + 1}" for i in range(5) if self & (1 << i))


ALL_EDGES = EdgeLabel.E1 | EdgeLabel.E2 | EdgeLabel.E3 | EdgeLabel.E4 | EdgeLabel.E5


@dataclass(frozen=True)
class PerturbationConfig:
    """Ranges for per-vertex jitter and the acceptance envelope."""

    jitter: float = 0.05            # uniform +- range per coordinate, m
    bbox_min: float = 0.30          # m, both axes
    bbox_max: float = 0.60          # m, both axes
    max_attempts: int = 64          # rejection-resampling budget
    require_convex: bool = True     # convex samples guarantee exact Delaunay cover


DEFAULT_PERTURBATION = PerturbationConfig()


@dataclass(frozen=True)
class Polygon:
    """A simple counter-clockwise pentagon in meters."""

    vertices: np.ndarray  # (5, 2) float64
    index: int = 0        # geometry id (1..1024 in full runs)

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def bbox(self) -> tuple[float, float]:
        """(width, height) of the axis-aligned bounding box."""
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(span[0]), float(span[1])

    def edges(self) -> np.ndarray:
        """(5, 2, 2) array of edge segments; edge i joins vertex i and i+1."""
        return np.stack([self.vertices, np.roll(self.vertices, -1, axis=0)], axis=1)


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a pentagon.

    Nodes are ordered boundary-first in edge-walk order, then interior; this
    order is deterministic and is the node ordering used everywhere downstream
    (containers, models, operators).
    """

    nodes: np.ndarray                    # (N, 2) float64, meters
    triangles: np.ndarray                # (K, 3) int32, CCW
    edge_labels: np.ndarray = field(default=None)  # (N,) uint8 bitmask, 0 = interior

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_mask(self) -> np.ndarray:
        if self.edge_labels is None:
            raise ConsistencyError("mesh has no edge labels; run tag_edges first")
        return self.edge_labels != 0

    def label_map(self) -> dict[int, EdgeLabel]:
        """Boundary node id -> edge subset, omitting interior nodes."""
        mask = self.boundary_mask
        return {int(i): EdgeLabel(int(self.edge_labels[i])) for i in np.nonzero(mask)[0]}

    def nodes_on(self, edges: EdgeLabel) -> np.ndarray:
        """Indices of nodes tagged with any edge in `edges`."""
        if self.edge_labels is None:
            raise ConsistencyError("mesh has no edge labels; run tag_edges first")
        return np.nonzero((self.edge_labels & int(edges)) != 0)[0]


def _is_ccw(vertices: np.ndarray) -> bool:
    x, y = vertices[:, 0], vertices[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) > 0.0


def _is_convex(vertices: np.ndarray) -> bool:
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    c = np.roll(vertices, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - b[:, 0])
    return bool(np.all(cross > 0.0))


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _is_simple(vertices: np.ndarray) -> bool:
    """True when no two non-adjacent edges cross."""
    n = len(vertices)
    segs = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex
            if _segments_intersect(*segs[i], *segs[j]):
                return False
    return True


def validate_polygon(polygon: Polygon) -> None:
    v = np.asarray(polygon.vertices, dtype=float)
    if v.shape != (5, 2):
        raise GeometryError(f"polygon needs exactly 5 vertices, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("polygon has non-finite vertices")
    if not _is_ccw(v):
        raise GeometryError("polygon vertices must be counter-clockwise")
    if not _is_simple(v):
        raise GeometryError("polygon is self-intersecting")


def sample_polygon(
    index: int, rng_seed: int, config: PerturbationConfig | None = None
) -> Polygon:
    """Draw the perturbed pentagon for one geometry id.

    Deterministic for fixed (index, rng_seed): the jitter stream is keyed by
    both, and rejection resampling walks the same stream on every call.
    """
    if index < 1:
        raise ConfigurationError(f"geometry index must be >= 1, got {index}")
    cfg = config or DEFAULT_PERTURBATION
    gen = make_generator(rng_seed, GEOMETRY_STREAM, index)
    for _ in range(cfg.max_attempts):
        verts = BASE_PENTAGON + gen.uniform(-cfg.jitter, cfg.jitter, size=(5, 2))
        span = verts.max(axis=0) - verts.min(axis=0)
        if not (cfg.bbox_min <= span[0] <= cfg.bbox_max and cfg.bbox_min <= span[1] <= cfg.bbox_max):
            continue
        if not _is_ccw(verts):
            continue
        if cfg.require_convex and not _is_convex(verts):
            continue
        if not _is_simple(verts):
            continue
        return Polygon(vertices=verts, index=index)
    raise ConfigurationError(
        f"could not sample a valid pentagon for index {index} in {cfg.max_attempts} attempts"
    )


def _point_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule, vectorized over points."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
    return inside


def _distance_to_boundary(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Min distance from each point to the polygon's edge segments."""
    best = np.full(len(points), np.inf)
    n = len(vertices)
    for i in range(n):
        a = vertices[i]
        b = vertices[(i + 1) % n]
        ab = b - a
        t = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(points - proj, axis=1))
    return best


def _boundary_points(polygon: Polygon, h: float) -> np.ndarray:
    """Sample each edge at spacing ~h; corners appear exactly once."""
    pts = []
    for a, b in polygon.edges():
        length = float(np.linalg.norm(b - a))
        nseg = max(1, int(round(length / h)))
        t = np.arange(nseg) / nseg  # includes t=0 (corner), excludes t=1
        pts.append(a + t[:, None] * (b - a))
    return np.vstack(pts)


def _interior_seed_points(polygon: Polygon, h: float) -> np.ndarray:
    """Hexagonal lattice clipped to the polygon, kept clear of the boundary."""
    lo = polygon.vertices.min(axis=0)
    hi = polygon.vertices.max(axis=0)
    dy = h * np.sqrt(3.0) / 2.0
    rows = []
    y = lo[1] + 0.5 * dy
    row = 0
    while y < hi[1]:
        x0 = lo[0] + (0.25 * h if row % 2 == 0 else 0.75 * h)
        xs = np.arange(x0, hi[0], h)
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
        y += dy
        row += 1
    if not rows:
        return np.empty((0, 2))
    cand = np.vstack(rows)
    keep = _point_in_polygon(cand, polygon.vertices)
    keep &= _distance_to_boundary(cand, polygon.vertices) >= 0.5 * h
    return cand[keep]


def _lloyd_smooth(
    nodes: np.ndarray, n_boundary: int, polygon: Polygon, h: float, iterations: int
) -> np.ndarray:
    """Relax interior nodes toward the average of their Delaunay neighbors."""
    nodes = nodes.copy()
    for _ in range(iterations):
        tri = Delaunay(nodes)
        indptr, indices = tri.vertex_neighbor_vertices
        new_pts = nodes.copy()
        for i in range(n_boundary, len(nodes)):
            nbrs = indices[indptr[i] : indptr[i + 1]]
            if len(nbrs):
                new_pts[i] = nodes[nbrs].mean(axis=0)
        # accept a move only if it stays inside and clear of the boundary
        inside = _point_in_polygon(new_pts[n_boundary:], polygon.vertices)
        clear = _distance_to_boundary(new_pts[n_boundary:], polygon.vertices) >= 0.4 * h
        ok = inside & clear
        moved = nodes[n_boundary:]
        moved[ok] = new_pts[n_boundary:][ok]
        nodes[n_boundary:] = moved
    return nodes


def _triangle_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = nodes[triangles[:, 0]]
    b = nodes[triangles[:, 1]]
    c = nodes[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _min_angle_deg(nodes: np.ndarray, triangles: np.ndarray) -> float:
    p = nodes[triangles]  # (K, 3, 2)
    d = np.stack(
        [
            np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
        ],
        axis=1,
    )
    angles = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        cosv = (d[:, j] ** 2 + d[:, k] ** 2 - d[:, i] ** 2) / (2 * d[:, j] * d[:, k])
        angles.append(np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0))))
    return float(np.min(angles))


def _build_candidate(polygon: Polygon, h: float, lloyd_iterations: int) -> Mesh | None:
    boundary = _boundary_points(polygon, h)
    interior = _interior_seed_points(polygon, h)
    nodes = np.vstack([boundary, interior])
    if len(nodes) < 4:
        return None
    nodes = _lloyd_smooth(nodes, len(boundary), polygon, h, lloyd_iterations)
    tri = Delaunay(nodes)
    simplices = tri.simplices.astype(np.int32)
    centroids = nodes[simplices].mean(axis=1)
    keep = _point_in_polygon(centroids, polygon.vertices)
    simplices = simplices[keep]
    if len(simplices) == 0:
        return None
    areas = _triangle_areas(nodes, simplices)
    flip = areas < 0  # enforce CCW orientation
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    return Mesh(nodes=nodes, triangles=simplices, edge_labels=None)


def _quality_failure(mesh: Mesh, polygon: Polygon) -> str | None:
    if mesh is None:
        return "triangulation produced no interior triangles"
    if mesh.n_nodes < 100:
        return f"only {mesh.n_nodes} nodes (< 100)"
    areas = _triangle_areas(mesh.nodes, mesh.triangles)
    if np.any(areas <= 0):
        return "non-positive triangle area"
    rel = abs(float(areas.sum()) - polygon.area) / polygon.area
    if rel >= 1e-10:
        return f"area cover off by {rel:.2e} relative"
    used = np.unique(mesh.triangles)
    if len(used) != mesh.n_nodes:
        return "unused (dangling) nodes"
    min_angle = _min_angle_deg(mesh.nodes, mesh.triangles)
    if min_angle < 20.0:
        return f"min angle {min_angle:.1f} deg (< 20)"
    return None


def triangulate(polygon: Polygon, target_edge_length: float = 0.03) -> Mesh:
    """Triangulate a pentagon with near-uniform elements.

    Boundary nodes are placed exactly on the edges at ~target spacing; interior
    nodes come from a hexagonal lattice relaxed by a few Lloyd iterations over
    the Delaunay neighborhood graph. If the quality gate (>=100 nodes, exact
    area cover, min angle >= 20 deg) fails, smoothing is increased and then the
    edge length is shrunk before giving up.
    """
    validate_polygon(polygon)
    if target_edge_length <= 0:
        raise GeometryError(f"target edge length must be > 0, got {target_edge_length}")
    # escalation: try more smoothing at each edge length, then shrink the edge
    # length geometrically until the quality gate passes
    reasons = []
    h = target_edge_length
    for _ in range(16):
        for iterations in (8, 16):
            mesh = _build_candidate(polygon, h, iterations)
            reason = _quality_failure(mesh, polygon)
            if reason is None:
                return mesh
            reasons.append(f"h={h:g}: {reason}")
            if "nodes" in reason:
                break  # smoothing cannot fix a node shortage; refine instead
        h *= 0.85
    raise GeometryError(
        f"triangulation failed for polygon {polygon.index}: " + "; ".join(reasons)
    )


def tag_edges(mesh: Mesh, polygon: Polygon) -> Mesh:
    """Label boundary nodes with the polygon edge(s) they lie on.

    Corner nodes receive both adjacent edge labels. A node that is on the
    triangulation boundary but off every polygon edge (or vice versa) means the
    mesh and polygon disagree, which is a consistency error.
    """
    labels = np.zeros(mesh.n_nodes, dtype=np.uint8)
    for i, (a, b) in enumerate(polygon.edges()):
        ab = b - a
        t = np.clip(((mesh.nodes - a) @ ab) / (ab @ ab), 0.0, 1.0)
        dist = np.linalg.norm(mesh.nodes - (a + t[:, None] * ab), axis=1)
        labels[dist <= EDGE_TOLERANCE] |= 1 << i

    # cross-check against the topological boundary (edges used by one triangle)
    edges = np.vstack(
        [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
    boundary_nodes = np.unique(edges[counts[inverse] == 1])
    topo = np.zeros(mesh.n_nodes, dtype=bool)
    topo[boundary_nodes] = True
    geo = labels != 0
    if np.any(topo & ~geo):
        bad = np.nonzero(topo & ~geo)[0]
        raise ConsistencyError(
            f"{len(bad)} boundary nodes lie farther than {EDGE_TOLERANCE} m from every edge "
            f"(first: node {bad[0]} at {mesh.nodes[bad[0]]})"
        )
    if np.any(geo & ~topo):
        bad = np.nonzero(geo & ~topo)[0]
        raise ConsistencyError(
            f"{len(bad)} edge-tagged nodes are not on the triangulation boundary "
            f"(first: node {bad[0]})"
        )
    return replace(mesh, edge_labels=labels)


def save_mesh_text(mesh: Mesh, path: str) -> None:
    """Plain-text node/element export: `N K`, N node lines, K triangle lines."""
    labels = mesh.edge_labels
    if labels is None:
        labels = np.zeros(mesh.n_nodes, dtype=np.uint8)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles}\n")
        for (x, y), lab in zip(mesh.nodes, labels):
            fh.write(f"{float(x)!r} {float(y)!r} {int(lab)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def load_mesh_text(path: str) -> Mesh:
    with open(path, "r", encoding="utf-8") as fh:
        n, k = map(int, fh.readline().split())
        nodes = np.empty((n, 2))
        labels = np.empty(n, dtype=np.uint8)
        for i in range(n):
            sx, sy, sl = fh.readline().split()
            nodes[i] = float(sx), float(sy)
            labels[i] = int(sl)
        triangles = np.empty((k, 3), dtype=np.int32)
        for i in range(k):
            triangles[i] = [int(v) for v in fh.readline().split()]
    return Mesh(nodes=nodes, triangles=triangles, edge_labels=labels)
