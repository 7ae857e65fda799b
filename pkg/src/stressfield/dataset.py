"""Dataset pipeline: load histories, simulated samples, splits, container IO.

A sample is one (geometry, boundary-condition case, load case) triple run
through the transient solver. The five BC cases pair fixed edges with load
edges; loads are sine/cosine force histories split into x and y components and
shared evenly by the loaded edge's nodes. Everything is a pure function of the
master seed, so regenerating a dataset reproduces it byte for byte.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConsistencyError, ContractError
from .fem import STEEL, Material, assemble, newmark_solve, recover_stress
from .geometry import EdgeLabel, Mesh, sample_polygon, tag_edges, triangulate
from .rng import LOAD_STREAM, make_generator

T_STEPS = 100
DT = 0.01                      # s
AMPLITUDES = (2e3, 4e3, 6e3, 8e3, 10e3)  # N
FREQUENCY_RANGE = (1.0, 3.0)   # Hz
FORCE_SCALE = 1e-4             # model-input scaling for force channels
G_CHAR = 9.81                  # m/s^2, characteristic body-force scale

# Boundary-condition cases: (fixed edges, loaded edges) pairs.
BC_CASES = (
    (EdgeLabel.E2, EdgeLabel.E4 | EdgeLabel.E5),
    (EdgeLabel.E2 | EdgeLabel.E3, EdgeLabel.E5),
    (EdgeLabel.E1 | EdgeLabel.E2, EdgeLabel.E4),
    (EdgeLabel.E3, EdgeLabel.E2 | EdgeLabel.E4),
    (EdgeLabel.E1 | EdgeLabel.E5, EdgeLabel.E2),
)
BC_CASE_NAMES = tuple(bc.to_name() for bc, _ in BC_CASES)

N_LOAD_CASES = 14
FULL_GEOMETRY_IDS = tuple(range(1, 1025))
FULL_LOAD_IDS = tuple(range(1, N_LOAD_CASES + 1))
FULL_BC_CASES = tuple(range(len(BC_CASES)))

# Desk-scale preset: 24 geometries x 3 BCs x 4 loads = 288 samples, chosen so
# every split preset keeps all three parts nonempty.
DESK_GEOMETRY_IDS = tuple(range(1, 13)) + tuple(range(615, 621)) + tuple(range(820, 826))
DESK_LOAD_IDS = (1, 2, 9, 12)
DESK_BC_CASES = (0, 3, 4)

DESK_EDGE_LENGTH = 0.045
FULL_EDGE_LENGTH = 0.03

CONTAINER_MAGIC = b"SPND"
CONTAINER_VERSION = 1


@dataclass(frozen=True)
class LoadHistory:
    """One force component's time series."""

    values: np.ndarray      # (T,), N
    frequency: float        # Hz
    amplitude: float        # N
    waveform: str           # sine | cosine
    direction: str          # x | y


@dataclass(frozen=True)
class InputMatrix:
    """Per-node model input: (x, y, bc flag, force x, force y) over time."""

    data: np.ndarray  # (N, 5, T)


@dataclass(frozen=True)
class SampleRecord:
    """One simulated sample with its mesh and ground-truth fields."""

    mesh: Mesh
    input: InputMatrix
    stress: np.ndarray          # (N, 3, T), Pa, channels (sxx, syy, sxy)
    acceleration: np.ndarray    # (N, 2, T), m/s^2
    bc_case: int                # index into BC_CASES
    load_case: int              # 1-based load id
    geometry_id: int


def gen_load_history(case_id: int, rng_seed: int) -> tuple[LoadHistory, LoadHistory]:
    """Draw the (x, y) force histories for one load case.

    Deterministic per (case_id, seed). Waveform, frequency and amplitude are
    drawn independently for the two directions from the published grids.
    """
    if not 1 <= case_id <= N_LOAD_CASES:
        raise ConfigurationError(f"load case must be in 1..{N_LOAD_CASES}, got {case_id}")
    gen = make_generator(rng_seed, LOAD_STREAM, case_id)
    t = np.arange(T_STEPS) * DT
    out = []
    for direction in ("x", "y"):
        waveform = "sine" if gen.integers(2) == 0 else "cosine"
        frequency = float(gen.uniform(*FREQUENCY_RANGE))
        amplitude = float(AMPLITUDES[gen.integers(len(AMPLITUDES))])
        phase = 2.0 * np.pi * frequency * t
        values = amplitude * (np.sin(phase) if waveform == "sine" else np.cos(phase))
        out.append(
            LoadHistory(
                values=values,
                frequency=frequency,
                amplitude=amplitude,
                waveform=waveform,
                direction=direction,
            )
        )
    return out[0], out[1]


def build_input_matrix(
    mesh: Mesh,
    bc_case: EdgeLabel,
    load_position: EdgeLabel,
    loads: tuple[LoadHistory, LoadHistory],
) -> InputMatrix:
    """Assemble the N x 5 x T input: coordinates, BC flags, per-node forces.

    The total load history is shared evenly by the loaded edges' nodes; nodes
    on neither edge set carry zero force and a zero flag.
    """
    if bc_case & load_position:
        raise ConfigurationError(
            f"BC edges {bc_case.to_name()} overlap load edges {load_position.to_name()}"
        )
    flags = (mesh.edge_labels & int(bc_case)) != 0
    loaded = (mesh.edge_labels & int(load_position)) != 0
    n_loaded = int(loaded.sum())
    if n_loaded == 0:
        raise ConfigurationError(f"no mesh nodes on load edges {load_position.to_name()}")
    lx, ly = loads
    data = np.zeros((mesh.n_nodes, 5, T_STEPS))
    data[:, 0, :] = mesh.nodes[:, 0:1]
    data[:, 1, :] = mesh.nodes[:, 1:2]
    data[:, 2, :] = flags[:, None]
    data[loaded, 3, :] = lx.values / n_loaded
    data[loaded, 4, :] = ly.values / n_loaded
    return InputMatrix(data=data)


def simulate_sample(
    geometry_id: int,
    bc_case: int,
    load_case: int,
    rng_seed: int,
    target_edge_length: float = FULL_EDGE_LENGTH,
    material: Material = STEEL,
) -> SampleRecord:
    """Run geometry + FEM for one sample and collect its record."""
    if not 0 <= bc_case < len(BC_CASES):
        raise ConfigurationError(f"bc case must be in 0..{len(BC_CASES) - 1}, got {bc_case}")
    try:
        polygon = sample_polygon(geometry_id, rng_seed)
        mesh = tag_edges(triangulate(polygon, target_edge_length), polygon)
        loads = gen_load_history(load_case, rng_seed)
        bc_edges, load_edges = BC_CASES[bc_case]
        inputs = build_input_matrix(mesh, bc_edges, load_edges, loads)
        sys = assemble(mesh, material, fixed_nodes=mesh.nodes_on(bc_edges))
        load_vec = np.zeros((2 * mesh.n_nodes, T_STEPS))
        load_vec[0::2] = inputs.data[:, 3, :]
        load_vec[1::2] = inputs.data[:, 4, :]
        response = newmark_solve(sys, load_vec, DT)
        stress = recover_stress(mesh, material, response.displacements)
    except Exception as exc:
        msg = f"sample (geometry={geometry_id}, bc={bc_case}, load={load_case}): {exc}"
        try:
            wrapped = type(exc)(msg)
        except Exception:
            wrapped = ConsistencyError(msg)
        raise wrapped from exc
    return SampleRecord(
        mesh=mesh,
        input=inputs,
        stress=stress,
        acceleration=response.accelerations,
        bc_case=bc_case,
        load_case=load_case,
        geometry_id=geometry_id,
    )


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-channel symmetric scaling of stresses onto [-1, 1].

    The scale is max(|min|, |max|) of the training split, so physical zero maps
    to normalized zero and every training value lands in [-1, 1]; validation
    and test values may exceed the band (no clipping).
    """

    mins: np.ndarray  # (3,), Pa
    maxs: np.ndarray  # (3,), Pa

    def __post_init__(self):
        if np.any(self.maxs <= self.mins):
            raise ConfigurationError("normalization needs max > min per channel")

    @property
    def scales(self) -> np.ndarray:
        return np.maximum(np.abs(self.mins), np.abs(self.maxs))

    def apply(self, stress: np.ndarray) -> np.ndarray:
        """Normalize an (N, 3, T) or (3,) channel-axis-1 array."""
        return stress / self.scales[None, :, None]

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        return normalized * self.scales[None, :, None]


def fit_normalization(stresses) -> NormalizationSpec:
    """Channel-wise min/max over an iterable of (N, 3, T) stress arrays."""
    mins = np.full(3, np.inf)
    maxs = np.full(3, -np.inf)
    count = 0
    for stress in stresses:
        mins = np.minimum(mins, stress.min(axis=(0, 2)))
        maxs = np.maximum(maxs, stress.max(axis=(0, 2)))
        count += 1
    if count == 0:
        raise ConfigurationError("cannot fit normalization on an empty split")
    return NormalizationSpec(mins=mins, maxs=maxs)


SPLIT_PRESETS = ("baseline", "geometry", "load", "bc")


@dataclass(frozen=True)
class SplitSpec:
    """Named assignment of samples to train/val/test.

    The baseline preset cycles sample indices (3/1/1 of every 5); the
    generalization presets hold out geometry ids, load ids, or BC cases.
    """

    preset: str
    geometry_ids: dict | None = None   # split name -> set of geometry ids
    load_ids: dict | None = None       # split name -> set of load ids
    bc_cases: dict | None = None       # split name -> set of BC case indices

    def assign(self, sample_index: int, geometry_id: int, bc_case: int, load_case: int) -> str:
        if self.preset == "baseline":
            return ("train", "train", "train", "val", "test")[sample_index % 5]
        if self.preset == "geometry":
            table = self.geometry_ids
            key = geometry_id
        elif self.preset == "load":
            table = self.load_ids
            key = load_case
        elif self.preset == "bc":
            table = self.bc_cases
            key = bc_case
        else:
            raise ConfigurationError(f"unknown split preset {self.preset!r}")
        for name, members in table.items():
            if key in members:
                return name
        raise ConsistencyError(f"sample key {key} not covered by {self.preset} split")


def make_split(preset: str) -> SplitSpec:
    """Build one of the published split presets."""
    if preset == "baseline":
        return SplitSpec(preset="baseline")
    if preset == "geometry":
        return SplitSpec(
            preset="geometry",
            geometry_ids={
                "train": frozenset(range(1, 615)),
                "val": frozenset(range(615, 820)),
                "test": frozenset(range(820, 1025)),
            },
        )
    if preset == "load":
        return SplitSpec(
            preset="load",
            load_ids={
                "train": frozenset(range(1, 9)),
                "val": frozenset(range(9, 12)),
                "test": frozenset(range(12, 15)),
            },
        )
    if preset == "bc":
        return SplitSpec(
            preset="bc",
            bc_cases={
                "train": frozenset({0, 1, 2}),  # E2, E2E3, E1E2
                "val": frozenset({3}),          # E3
                "test": frozenset({4}),         # E1E5
            },
        )
    raise ConfigurationError(f"unknown split preset {preset!r}; choose from {SPLIT_PRESETS}")


def enumerate_sample_ids(scale: str) -> list[tuple[int, int, int]]:
    """Deterministic (geometry_id, bc_case, load_case) enumeration for a scale."""
    if scale == "desk":
        geoms, bcs, loads = DESK_GEOMETRY_IDS, DESK_BC_CASES, DESK_LOAD_IDS
    elif scale == "full":
        geoms, bcs, loads = FULL_GEOMETRY_IDS, FULL_BC_CASES, FULL_LOAD_IDS
    else:
        raise ConfigurationError(f"unknown scale {scale!r}; choose desk or full")
    return [(g, b, l) for g in geoms for b in bcs for l in loads]


@dataclass(frozen=True)
class ContainerSample:
    """One sample as stored: arrays only, float32 fields."""

    geometry_id: int
    bc_case: int
    load_case: int
    coords: np.ndarray     # (N, 2) float64
    triangles: np.ndarray  # (K, 3) int32
    bc_flags: np.ndarray   # (N,) uint8
    forces: np.ndarray     # (N, 2, T) float32
    stress: np.ndarray     # (N, 3, T) float32
    acceleration: np.ndarray  # (N, 2, T) float32

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    def input_matrix(self) -> np.ndarray:
        """(N, 5, T) float64 model input in physical units."""
        n = self.n_nodes
        data = np.zeros((n, 5, T_STEPS))
        data[:, 0, :] = self.coords[:, 0:1]
        data[:, 1, :] = self.coords[:, 1:2]
        data[:, 2, :] = (self.bc_flags != 0)[:, None]
        data[:, 3, :] = self.forces[:, 0, :]
        data[:, 4, :] = self.forces[:, 1, :]
        return data


def _as_container_sample(record) -> ContainerSample:
    if isinstance(record, ContainerSample):
        return record
    bc_edges, _ = BC_CASES[record.bc_case]
    flags = ((record.mesh.edge_labels & int(bc_edges)) != 0).astype(np.uint8)
    forces = np.stack(
        [record.input.data[:, 3, :], record.input.data[:, 4, :]], axis=1
    ).astype(np.float32)
    return ContainerSample(
        geometry_id=record.geometry_id,
        bc_case=record.bc_case,
        load_case=record.load_case,
        coords=record.mesh.nodes.astype(np.float64),
        triangles=record.mesh.triangles.astype(np.int32),
        bc_flags=flags,
        forces=forces,
        stress=record.stress.astype(np.float32),
        acceleration=record.acceleration.astype(np.float32),
    )


def write_container(path: str, samples, manifest: dict) -> None:
    """Write the binary container and its UTF-8 key=value sidecar manifest."""
    stored = [_as_container_sample(s) for s in samples]
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<II", CONTAINER_VERSION, len(stored)))
        for s in stored:
            n, k = len(s.coords), len(s.triangles)
            fh.write(struct.pack("<IBBII", s.geometry_id, s.bc_case, s.load_case, n, k))
            fh.write(np.ascontiguousarray(s.coords, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(s.triangles, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(s.bc_flags, dtype="u1").tobytes())
            fh.write(np.ascontiguousarray(s.forces, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(s.stress, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(s.acceleration, dtype="<f4").tobytes())
    lines = [f"{key}={manifest[key]}" for key in sorted(manifest)]
    with open(path + ".manifest", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: str) -> dict:
    """Read a container's manifest sidecar without loading sample payloads.

    Validates the binary header and returns the stored key=value fields.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CONTAINER_MAGIC:
            raise ContractError(f"bad container magic {magic!r}")
        version, _ = struct.unpack("<II", fh.read(8))
        if version != CONTAINER_VERSION:
            raise ContractError(f"unsupported container version {version}")
    manifest = {}
    with open(path + ".manifest", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                key, _, value = line.partition("=")
                manifest[key] = value
    return manifest


def read_container(path: str) -> tuple[list[ContainerSample], dict]:
    """Read a container and its manifest back into memory."""
    samples = []
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CONTAINER_MAGIC:
            raise ContractError(f"bad container magic {magic!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != CONTAINER_VERSION:
            raise ContractError(f"unsupported container version {version}")
        for _ in range(count):
            gid, bc, load, n, k = struct.unpack("<IBBII", fh.read(14))
            coords = np.frombuffer(fh.read(16 * n), dtype="<f8").reshape(n, 2)
            tris = np.frombuffer(fh.read(12 * k), dtype="<u4").reshape(k, 3)
            flags = np.frombuffer(fh.read(n), dtype="u1")
            forces = np.frombuffer(fh.read(4 * n * 2 * T_STEPS), dtype="<f4")
            stress = np.frombuffer(fh.read(4 * n * 3 * T_STEPS), dtype="<f4")
            accel = np.frombuffer(fh.read(4 * n * 2 * T_STEPS), dtype="<f4")
            samples.append(
                ContainerSample(
                    geometry_id=gid,
                    bc_case=bc,
                    load_case=load,
                    coords=coords.copy(),
                    triangles=tris.astype(np.int32),
                    bc_flags=flags.copy(),
                    forces=forces.reshape(n, 2, T_STEPS).copy(),
                    stress=stress.reshape(n, 3, T_STEPS).copy(),
                    acceleration=accel.reshape(n, 2, T_STEPS).copy(),
                )
            )
    return samples, read_manifest(path)


def _format_ids(ids) -> str:
    """Canonical compact range string, e.g. '1-12,615-620'."""
    ids = sorted(ids)
    parts = []
    start = prev = ids[0]
    for v in ids[1:]:
        if v == prev + 1:
            prev = v
            continue
        parts.append(f"{start}-{prev}" if prev > start else f"{start}")
        start = prev = v
    parts.append(f"{start}-{prev}" if prev > start else f"{start}")
    return ",".join(parts)


def _parse_ids(text: str) -> frozenset:
    out = set()
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    return frozenset(out)


def split_to_manifest(split: SplitSpec) -> dict:
    entries = {"split_preset": split.preset}
    tables = {
        "geometry": split.geometry_ids,
        "load": split.load_ids,
        "bc": split.bc_cases,
    }
    table = tables.get(split.preset)
    if table:
        for name, members in table.items():
            entries[f"split_{name}"] = _format_ids(members)
    return entries


def split_from_manifest(manifest: dict) -> SplitSpec:
    preset = manifest["split_preset"]
    if preset == "baseline":
        return make_split("baseline")
    table = {name: _parse_ids(manifest[f"split_{name}"]) for name in ("train", "val", "test")}
    if preset == "geometry":
        return SplitSpec(preset=preset, geometry_ids=table)
    if preset == "load":
        return SplitSpec(preset=preset, load_ids=table)
    if preset == "bc":
        return SplitSpec(preset=preset, bc_cases=table)
    raise ConfigurationError(f"unknown split preset {preset!r} in manifest")


def normalization_to_manifest(spec: NormalizationSpec) -> dict:
    out = {}
    for i, ch in enumerate(("sxx", "syy", "sxy")):
        out[f"norm_min_{ch}"] = repr(float(spec.mins[i]))
        out[f"norm_max_{ch}"] = repr(float(spec.maxs[i]))
    return out


def normalization_from_manifest(manifest: dict) -> NormalizationSpec:
    mins = np.array([float(manifest[f"norm_min_{ch}"]) for ch in ("sxx", "syy", "sxy")])
    maxs = np.array([float(manifest[f"norm_max_{ch}"]) for ch in ("sxx", "syy", "sxy")])
    return NormalizationSpec(mins=mins, maxs=maxs)


@dataclass(frozen=True)
class DatasetBundle:
    """A loaded container: samples plus parsed manifest objects."""

    samples: list
    manifest: dict
    normalization: NormalizationSpec
    split: SplitSpec

    def indices_for(self, part: str) -> list[int]:
        return [
            i
            for i, s in enumerate(self.samples)
            if self.split.assign(i, s.geometry_id, s.bc_case, s.load_case) == part
        ]


def load_dataset(path: str) -> DatasetBundle:
    samples, manifest = read_container(path)
    return DatasetBundle(
        samples=samples,
        manifest=manifest,
        normalization=normalization_from_manifest(manifest),
        split=split_from_manifest(manifest),
    )


def generate_dataset(
    path: str,
    scale: str = "desk",
    seed: int = 42,
    preset: str = "baseline",
    target_edge_length: float | None = None,
    material: Material = STEEL,
    progress=None,
) -> dict:
    """Simulate a full scale's sample grid, fit normalization, and persist.

    Returns the manifest. Normalization is fitted on the preset's training
    split so downstream training sees the published [-1, 1] convention.
    """
    if target_edge_length is None:
        target_edge_length = DESK_EDGE_LENGTH if scale == "desk" else FULL_EDGE_LENGTH
    ids = enumerate_sample_ids(scale)
    split = make_split(preset)
    records = []
    for i, (gid, bc, load) in enumerate(ids):
        records.append(
            simulate_sample(gid, bc, load, seed, target_edge_length, material)
        )
        if progress is not None and (i + 1) % 50 == 0:
            progress(i + 1, len(ids))
    train_idx = [
        i
        for i, (gid, bc, load) in enumerate(ids)
        if split.assign(i, gid, bc, load) == "train"
    ]
    if not train_idx:
        raise ConfigurationError(f"{preset} split has no training samples at {scale} scale")
    # Fit on the values as stored (float32), so a scan of the persisted
    # training split is guaranteed to stay inside [-1, 1].
    stored = [_as_container_sample(r) for r in records]
    norm = fit_normalization(stored[i].stress.astype(np.float64) for i in train_idx)
    manifest = {
        "format_version": str(CONTAINER_VERSION),
        "master_seed": str(seed),
        "scale": scale,
        "sample_count": str(len(records)),
        "t_steps": str(T_STEPS),
        "dt": repr(DT),
        "target_edge_length": repr(float(target_edge_length)),
        "force_scale": repr(FORCE_SCALE),
        "g_char": repr(G_CHAR),
        "material_youngs_modulus": repr(material.youngs_modulus),
        "material_poisson_ratio": repr(material.poisson_ratio),
        "material_density": repr(material.density),
        "material_thickness": repr(material.thickness),
    }
    manifest.update(split_to_manifest(split))
    manifest.update(normalization_to_manifest(norm))
    write_container(path, stored, manifest)
    return manifest
