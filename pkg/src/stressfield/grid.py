"""Differentiable mesh-to-grid reconstruction and the equilibrium residual.

Nodal fields are lifted onto a regular grid spanning the mesh bounding box by
normalized Gaussian weights (a KDE-style scattered-data reconstruction), grid
gradients come from masked finite differences, and the two in-plane
equilibrium residuals are composed from those linear pieces. The whole map is
affine in the stress inputs, so its Jacobian is an explicit sparse matrix.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConfigurationError, ContractError

GRID_MAGIC = b"GRID"
DEFAULT_GRID_SIZE = 200
BANDWIDTH_FACTOR = 1.5   # x median node spacing
MASK_REACH = 2.0         # cells farther than this many bandwidths from a node are masked
KERNEL_REACH = 3.0       # Gaussian support truncation, in bandwidths


@dataclass(frozen=True)
class GridOperator:
    """Linear lift from N nodal values to a G x G grid, plus FD stencils."""

    weights: sp.csr_matrix      # (G*G, N), rows of masked cells are all-zero
    mask: np.ndarray            # (G, G) bool, True = cell inside mesh support
    xs: np.ndarray              # (G,) cell x-coordinates
    ys: np.ndarray              # (G,) cell y-coordinates
    bandwidth: float            # m

    @property
    def grid_size(self) -> int:
        return len(self.xs)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[1]

    @property
    def hx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def hy(self) -> float:
        return float(self.ys[1] - self.ys[0])

    def lift(self, nodal: np.ndarray) -> np.ndarray:
        """Reconstruct a nodal field on the grid; masked cells are zero."""
        if nodal.shape[0] != self.n_nodes:
            raise ContractError(
                f"field has {nodal.shape[0]} nodes, operator expects {self.n_nodes}"
            )
        g = self.grid_size
        return (self.weights @ nodal).reshape(g, g)


@dataclass(frozen=True)
class ResidualField:
    """Discretized left sides of the two equilibrium equations (Pa/m)."""

    r_x: np.ndarray  # (G, G)
    r_y: np.ndarray  # (G, G)


def default_bandwidth(nodes: np.ndarray) -> float:
    """1.5 x the median nearest-neighbor spacing of the node cloud."""
    tree = cKDTree(nodes)
    dist, _ = tree.query(nodes, k=2)
    return BANDWIDTH_FACTOR * float(np.median(dist[:, 1]))


def build_grid_operator(
    nodes: np.ndarray,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> GridOperator:
    """Build the Gaussian reconstruction operator over the node bounding box.

    W[g, n] ~ exp(-|p_g - p_n|^2 / (2 bw^2)), truncated at 3 bw and
    row-normalized so constants are reproduced exactly. A cell is unmasked iff
    its nearest node lies within 2 bw.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise ContractError(f"nodes must be (N, 2), got {nodes.shape}")
    if grid_size < 2:
        raise ConfigurationError(f"grid size must be >= 2, got {grid_size}")
    if bandwidth is None:
        bandwidth = default_bandwidth(nodes)
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be > 0, got {bandwidth}")

    lo = nodes.min(axis=0)
    hi = nodes.max(axis=0)
    xs = np.linspace(lo[0], hi[0], grid_size)
    ys = np.linspace(lo[1], hi[1], grid_size)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]

    # mask: keep cells whose nearest node is within MASK_REACH bandwidths
    gx, gy = np.meshgrid(xs, ys)  # (G, G), row iy varies y
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    near, _ = cKDTree(nodes).query(cells)
    mask = (near <= MASK_REACH * bandwidth).reshape(grid_size, grid_size)
    if not mask.any():
        raise ConfigurationError(
            f"bandwidth {bandwidth:.3g} m masks the whole {grid_size}x{grid_size} grid"
        )

    # Gaussian weights over an index window of +-KERNEL_REACH bandwidths per node
    reach = KERNEL_REACH * bandwidth
    rows, cols, vals = [], [], []
    for n, (px, py) in enumerate(nodes):
        ix0 = max(0, int(np.ceil((px - reach - lo[0]) / hx)))
        ix1 = min(grid_size - 1, int(np.floor((px + reach - lo[0]) / hx)))
        iy0 = max(0, int(np.ceil((py - reach - lo[1]) / hy)))
        iy1 = min(grid_size - 1, int(np.floor((py + reach - lo[1]) / hy)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        wx = xs[ix0 : ix1 + 1] - px
        wy = ys[iy0 : iy1 + 1] - py
        r2 = wx[None, :] ** 2 + wy[:, None] ** 2
        keep = r2 <= reach**2
        iyg, ixg = np.nonzero(keep)
        rows.append((iyg + iy0) * grid_size + (ixg + ix0))
        cols.append(np.full(len(iyg), n))
        vals.append(np.exp(-r2[keep] / (2.0 * bandwidth**2)))
    w = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid_size * grid_size, len(nodes)),
    ).tocsr()

    # zero masked rows, normalize the rest to a partition of unity
    flat_mask = mask.ravel()
    rowsum = np.asarray(w.sum(axis=1)).ravel()
    if np.any(flat_mask & (rowsum <= 0)):
        raise ConfigurationError("an unmasked cell received no kernel support")
    scale = np.zeros(grid_size * grid_size)
    scale[flat_mask] = 1.0 / rowsum[flat_mask]
    w = sp.diags(scale) @ w
    w.eliminate_zeros()
    return GridOperator(
        weights=w.tocsr(), mask=mask, xs=xs, ys=ys, bandwidth=float(bandwidth)
    )


def _axis_gradient(field: np.ndarray, mask: np.ndarray, h: float, axis: int):
    """Masked FD along one axis: central inside, one-sided at mask borders."""
    fwd_ok = np.zeros_like(mask)
    bwd_ok = np.zeros_like(mask)
    fwd = np.zeros_like(field)
    bwd = np.zeros_like(field)
    if axis == 1:  # x: neighbor columns
        fwd_ok[:, :-1] = mask[:, 1:]
        bwd_ok[:, 1:] = mask[:, :-1]
        fwd[:, :-1] = field[:, 1:]
        bwd[:, 1:] = field[:, :-1]
    else:  # y: neighbor rows
        fwd_ok[:-1, :] = mask[1:, :]
        bwd_ok[1:, :] = mask[:-1, :]
        fwd[:-1, :] = field[1:, :]
        bwd[1:, :] = field[:-1, :]
    central = fwd_ok & bwd_ok
    only_fwd = fwd_ok & ~bwd_ok
    only_bwd = bwd_ok & ~fwd_ok
    out = np.zeros_like(field)
    out[central] = (fwd[central] - bwd[central]) / (2.0 * h)
    out[only_fwd] = (fwd[only_fwd] - field[only_fwd]) / h
    out[only_bwd] = (field[only_bwd] - bwd[only_bwd]) / h
    out[~mask] = 0.0
    return out


def grid_gradient(field: np.ndarray, op: GridOperator) -> tuple[np.ndarray, np.ndarray]:
    """(d/dx, d/dy) of a grid field, respecting the validity mask."""
    g = op.grid_size
    if field.shape != (g, g):
        raise ContractError(f"field must be ({g}, {g}), got {field.shape}")
    ddx = _axis_gradient(field, op.mask, op.hx, axis=1)
    ddy = _axis_gradient(field, op.mask, op.hy, axis=0)
    return ddx, ddy


def fd_matrices(op: GridOperator) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse matrices applying the same masked stencils as grid_gradient."""
    g = op.grid_size
    mask = op.mask

    def build(axis: int, h: float) -> sp.csr_matrix:
        iy, ix = np.mgrid[0:g, 0:g]
        if axis == 1:
            fwd_ok = np.zeros_like(mask)
            bwd_ok = np.zeros_like(mask)
            fwd_ok[:, :-1] = mask[:, 1:]
            bwd_ok[:, 1:] = mask[:, :-1]
            fwd_idx = iy * g + np.minimum(ix + 1, g - 1)
            bwd_idx = iy * g + np.maximum(ix - 1, 0)
        else:
            fwd_ok = np.zeros_like(mask)
            bwd_ok = np.zeros_like(mask)
            fwd_ok[:-1, :] = mask[1:, :]
            bwd_ok[1:, :] = mask[:-1, :]
            fwd_idx = np.minimum(iy + 1, g - 1) * g + ix
            bwd_idx = np.maximum(iy - 1, 0) * g + ix
        self_idx = iy * g + ix
        rows, cols, vals = [], [], []
        central = mask & fwd_ok & bwd_ok
        only_fwd = mask & fwd_ok & ~bwd_ok
        only_bwd = mask & bwd_ok & ~fwd_ok
        for sel, pairs in (
            (central, [(fwd_idx, 0.5 / h), (bwd_idx, -0.5 / h)]),
            (only_fwd, [(fwd_idx, 1.0 / h), (self_idx, -1.0 / h)]),
            (only_bwd, [(self_idx, 1.0 / h), (bwd_idx, -1.0 / h)]),
        ):
            r = self_idx[sel]
            for idx, coef in pairs:
                rows.append(r)
                cols.append(idx[sel])
                vals.append(np.full(sel.sum(), coef))
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(g * g, g * g),
        ).tocsr()

    return build(1, op.hx), build(0, op.hy)


def residual_blocks(op: GridOperator) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(Dx W, Dy W): the assembled Jacobian blocks of the residual in sigma."""
    dx, dy = fd_matrices(op)
    return (dx @ op.weights).tocsr(), (dy @ op.weights).tocsr()


def pde_residual(
    sxx: np.ndarray,
    syy: np.ndarray,
    sxy: np.ndarray,
    b: np.ndarray,
    a: np.ndarray,
    rho: float,
    op: GridOperator,
) -> ResidualField:
    """Evaluate both in-plane equilibrium residuals on the grid.

    r_x = d(sxx)/dx + d(sxy)/dy + b_x - rho a_x
    r_y = d(syy)/dy + d(sxy)/dx + b_y - rho a_y

    All six nodal inputs live on the operator's mesh; b is a body-force
    density (N/m^3) and a an acceleration (m/s^2). The map is affine in the
    stress inputs, so exact backpropagation goes through residual_blocks.
    """
    n = op.n_nodes
    for name, arr, shape in (
        ("sxx", sxx, (n,)),
        ("syy", syy, (n,)),
        ("sxy", sxy, (n,)),
        ("b", b, (n, 2)),
        ("a", a, (n, 2)),
    ):
        if np.shape(arr) != shape:
            raise ContractError(f"{name} must have shape {shape}, got {np.shape(arr)}")
    gxx = op.lift(sxx)
    gyy = op.lift(syy)
    gxy = op.lift(sxy)
    dxx_dx, _ = grid_gradient(gxx, op)
    _, dyy_dy = grid_gradient(gyy, op)
    dxy_dx, dxy_dy = grid_gradient(gxy, op)
    bx, by = op.lift(b[:, 0]), op.lift(b[:, 1])
    ax, ay = op.lift(a[:, 0]), op.lift(a[:, 1])
    r_x = dxx_dx + dxy_dy + bx - rho * ax
    r_y = dyy_dy + dxy_dx + by - rho * ay
    r_x[~op.mask] = 0.0
    r_y[~op.mask] = 0.0
    return ResidualField(r_x=r_x, r_y=r_y)


def write_grid_raster(path: str, field: np.ndarray, channel_id: int) -> None:
    """Debug export: 16-byte header (magic, G, channel, reserved) + f32 rows."""
    g = field.shape[0]
    if field.shape != (g, g):
        raise ContractError(f"raster must be square, got {field.shape}")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<III", g, channel_id, 0))
        fh.write(np.ascontiguousarray(field, dtype="<f4").tobytes())


def read_grid_raster(path: str) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRID_MAGIC:
            raise ContractError(f"bad raster magic {magic!r}")
        g, channel_id, _ = struct.unpack("<III", fh.read(12))
        field = np.frombuffer(fh.read(4 * g * g), dtype="<f4").reshape(g, g)
    return field.astype(np.float64), channel_id
