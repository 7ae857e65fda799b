"""Losses, metrics, the training loop, and evaluation reports.

The total loss combines a data term (normalized-space MAE), a physics term
(mean absolute equilibrium residual on the reconstruction grid, in physical
units, nondimensionalized by rho * g_char), and a boundary term (initial-frame
pin plus constrained-node pin). Data and boundary terms act in normalized
stress space; the physics term denormalizes first. When no weights are given,
w_pde and w_bc are calibrated once at epoch 0 so each weighted term starts at
10% of the weighted data term, then frozen.
"""

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .dataset import (
    BC_CASES,
    G_CHAR,
    DatasetBundle,
    NormalizationSpec,
    SplitSpec,
)
from .errors import ConfigurationError, ContractError, TrainingError
from .fem import STEEL, Material, tributary_areas, von_mises
from .geometry import Mesh
from .grid import GridOperator, build_grid_operator, residual_blocks
from .models import save_checkpoint
from .rng import SHUFFLE_STREAM, make_generator

CHANNELS = ("sxx", "syy", "sxy", "svm")


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights for the data, physics, and boundary terms."""

    w_data: float = 1.0
    w_pde: float = 0.0
    w_bc: float = 0.0

    def __post_init__(self):
        values = (self.w_data, self.w_pde, self.w_bc)
        if any(not math.isfinite(w) or w < 0 for w in values):
            raise ConfigurationError(f"loss weights must be finite and >= 0, got {values}")
        if all(w == 0 for w in values):
            raise ConfigurationError("at least one loss weight must be positive")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings for one training run."""

    learning_rate: float = 1e-3
    batch_size: int = 10
    grad_accumulation: int = 1
    epochs: int = 60
    weight_decay: float = 1e-2
    lr_decay: float = 0.93
    adam_beta1: float = 0.9
    seed: int = 0
    pde_grid_size: int = 64
    out_dir: str = "train_out"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.grad_accumulation < 1:
            raise ConfigurationError(
                f"grad accumulation must be >= 1, got {self.grad_accumulation}"
            )
        if self.epochs < 0:
            raise ConfigurationError(f"epoch count must be >= 0, got {self.epochs}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError(f"lr decay must be in (0, 1], got {self.lr_decay}")
        if not 0.0 <= self.adam_beta1 < 1.0:
            raise ConfigurationError(
                f"adam beta1 must be in [0, 1), got {self.adam_beta1}"
            )


def _paired(pred, truth):
    """Validate shapes and lift numpy inputs to torch; remember the flavor."""
    was_numpy = not torch.is_tensor(pred)
    p = torch.as_tensor(pred, dtype=torch.float64) if was_numpy else pred
    t = torch.as_tensor(truth, dtype=p.dtype) if not torch.is_tensor(truth) else truth
    if tuple(p.shape) != tuple(t.shape):
        raise ContractError(f"shape mismatch: pred {tuple(p.shape)} vs truth {tuple(t.shape)}")
    return p, t, was_numpy


def loss_data(pred, truth):
    """Mean absolute error over every node, frame, and channel."""
    p, t, was_numpy = _paired(pred, truth)
    value = (p - t).abs().mean()
    return float(value) if was_numpy else value


def loss_bc(pred, truth, bc_mask, t0_frame: int = 0):
    """Initial-frame pin plus constrained-node pin, summed.

    pred/truth are (N, T, 3) in normalized space; bc_mask flags constrained
    nodes. The first term is the MAE of the t0 frame against zero; the second
    is the MAE of pred vs truth on constrained nodes over all frames.
    """
    p, t, was_numpy = _paired(pred, truth)
    mask = torch.as_tensor(np.asarray(bc_mask), dtype=torch.bool)
    if mask.shape != (p.shape[0],):
        raise ContractError(f"bc mask must be ({p.shape[0]},), got {tuple(mask.shape)}")
    value = p[:, t0_frame, :].abs().mean()
    if bool(mask.any()):
        value = value + (p[mask] - t[mask]).abs().mean()
    return float(value) if was_numpy else value


def total_loss(parts, weights: LossWeights):
    """Weighted sum of (data, pde, bc) loss parts."""
    data_part, pde_part, bc_part = parts
    return weights.w_data * data_part + weights.w_pde * pde_part + weights.w_bc * bc_part


def mrpe(pred, truth) -> float:
    """Mean absolute error as a percentage of the global peak magnitude."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ContractError(f"shape mismatch: pred {p.shape} vs truth {t.shape}")
    denom = max(np.abs(p).max(), np.abs(t).max())
    if denom == 0.0:
        raise ConfigurationError("MRPE undefined: both fields are identically zero")
    return float(100.0 * np.abs(p - t).mean() / denom)


def sample_mesh(sample) -> Mesh:
    """Mesh view of a SampleRecord or a stored container sample."""
    if hasattr(sample, "mesh"):
        return sample.mesh
    return Mesh(
        nodes=np.asarray(sample.coords, dtype=np.float64),
        triangles=np.asarray(sample.triangles, dtype=np.int32),
        edge_labels=np.zeros(len(sample.coords), dtype=np.uint8),
    )


def sample_forces(sample) -> np.ndarray:
    if hasattr(sample, "mesh"):
        return np.stack([sample.input.data[:, 3, :], sample.input.data[:, 4, :]], axis=1)
    return sample.forces.astype(np.float64)


def sample_bc_mask(sample) -> np.ndarray:
    if hasattr(sample, "mesh"):
        bc_edges, _ = BC_CASES[sample.bc_case]
        return (sample.mesh.edge_labels & int(bc_edges)) != 0
    return sample.bc_flags != 0


def body_force_density(sample, material: Material = STEEL) -> np.ndarray:
    """Equivalent body-force density (N, 2, T) of the applied nodal loads."""
    mesh = sample_mesh(sample)
    areas = tributary_areas(mesh)
    return sample_forces(sample) / (areas[:, None, None] * material.thickness)


class PdeOperator:
    """Dense torch form of one mesh's grid residual blocks (unmasked rows)."""

    def __init__(self, op: GridOperator, dtype: torch.dtype = torch.float64):
        gx, gy = residual_blocks(op)
        rows = np.flatnonzero(op.mask.ravel())
        self.gx = torch.from_numpy(gx.tocsr()[rows].toarray()).to(dtype)
        self.gy = torch.from_numpy(gy.tocsr()[rows].toarray()).to(dtype)
        self.lift = torch.from_numpy(op.weights.tocsr()[rows].toarray()).to(dtype)
        self.dtype = dtype

    def load_term(self, q) -> torch.Tensor:
        """Lift the fixed forcing field q = b - rho*a: (N,2,T) -> (M,2,T)."""
        qt = torch.as_tensor(np.asarray(q, dtype=np.float64), dtype=self.dtype) \
            if not torch.is_tensor(q) else q.to(self.dtype)
        n, _, t = qt.shape
        lifted = self.lift @ qt.reshape(n, 2 * t)
        return lifted.reshape(-1, 2, t)

    def residual_mean(self, stress_phys: torch.Tensor, lq: torch.Tensor) -> torch.Tensor:
        """Mean |r_x|, |r_y| over kept cells; stress_phys is (N, T, 3) in Pa."""
        sxx, syy, sxy = stress_phys[..., 0], stress_phys[..., 1], stress_phys[..., 2]
        rx = self.gx @ sxx + self.gy @ sxy + lq[:, 0]
        ry = self.gy @ syy + self.gx @ sxy + lq[:, 1]
        return 0.5 * (rx.abs().mean() + ry.abs().mean())


def loss_pde(
    pred,
    sample,
    op: GridOperator,
    normalization: NormalizationSpec,
    material: Material = STEEL,
):
    """Equilibrium-residual magnitude of a normalized prediction.

    Denormalizes pred (N, T, 3), reconstructs stress gradients on the grid,
    adds the lifted forcing (body-force density minus rho times the stored
    acceleration), and averages |r| over unmasked cells, nondimensionalized
    by rho * g_char.
    """
    was_numpy = not torch.is_tensor(pred)
    p = torch.as_tensor(np.asarray(pred), dtype=torch.float64) if was_numpy else pred
    n_nodes = len(sample_mesh(sample).nodes)
    if p.dim() != 3 or p.shape[0] != n_nodes or p.shape[2] != 3:
        raise ContractError(
            f"prediction must be ({n_nodes}, T, 3) normalized stress, got {tuple(p.shape)}"
        )
    pde_op = PdeOperator(op, dtype=p.dtype)
    rho = material.density
    q = body_force_density(sample, material) - rho * _sample_accel(sample)
    lq = pde_op.load_term(q[:, :, : p.shape[1]])
    scales = torch.as_tensor(normalization.scales, dtype=p.dtype)
    value = pde_op.residual_mean(p * scales, lq) / (rho * G_CHAR)
    return float(value) if was_numpy else value


def _sample_accel(sample) -> np.ndarray:
    if hasattr(sample, "mesh"):
        return sample.acceleration
    return sample.acceleration.astype(np.float64)


def _sample_stress(sample) -> np.ndarray:
    return np.asarray(sample.stress, dtype=np.float64)


@dataclass
class _SampleTensors:
    inputs: torch.Tensor      # (N, T, 5) float32, physical units
    truth: torch.Tensor       # (N, T, 3) float32, normalized
    bc_mask: torch.Tensor     # (N,) bool
    n_nodes: int


def _prepare_sample(sample, normalization: NormalizationSpec) -> _SampleTensors:
    if hasattr(sample, "mesh"):
        inp = sample.input.data
    else:
        inp = sample.input_matrix()
    inputs = torch.from_numpy(np.ascontiguousarray(inp.transpose(0, 2, 1))).float()
    truth_phys = _sample_stress(sample)
    truth = truth_phys.transpose(0, 2, 1) / normalization.scales[None, None, :]
    return _SampleTensors(
        inputs=inputs,
        truth=torch.from_numpy(np.ascontiguousarray(truth)).float(),
        bc_mask=torch.from_numpy(np.ascontiguousarray(sample_bc_mask(sample))),
        n_nodes=len(inp),
    )


class PdeCache:
    """Per-geometry residual operators plus per-sample lifted forcing terms.

    Grid operators depend only on node positions, so samples sharing a
    geometry share one operator; the forcing lift is per sample.
    """

    def __init__(
        self,
        bundle: DatasetBundle,
        indices,
        grid_size: int,
        material: Material = STEEL,
        dtype: torch.dtype = torch.float32,
    ):
        self.material = material
        self.scale = material.density * G_CHAR
        self.ops = {}
        self.forcing = {}   # per-sample q = b - rho*a, kept nodal to bound memory
        self.geometry_of = {}
        for i in indices:
            sample = bundle.samples[i]
            coords = np.asarray(
                sample.coords if not hasattr(sample, "mesh") else sample.mesh.nodes
            )
            gid = sample.geometry_id
            if gid not in self.ops:
                op = build_grid_operator(coords, grid_size=grid_size)
                self.ops[gid] = PdeOperator(op, dtype=dtype)
            q = body_force_density(sample, material) - material.density * _sample_accel(sample)
            self.forcing[i] = torch.as_tensor(q, dtype=dtype)
            self.geometry_of[i] = gid

    def loss(self, index: int, pred_phys: torch.Tensor) -> torch.Tensor:
        op = self.ops[self.geometry_of[index]]
        with torch.no_grad():
            lq = op.load_term(self.forcing[index])
        return op.residual_mean(pred_phys.to(op.dtype), lq) / self.scale


@dataclass
class TrainResult:
    history: list                 # per-epoch {'epoch', 'train': parts, 'val': parts}
    weights: LossWeights
    best_epoch: int
    best_val: float
    best_path: str
    last_path: str
    log_path: str
    resume_path: str


def _batch_forward(model, prepared, indices):
    """Zero-pad a batch to its widest mesh and run one forward pass.

    Tail padding is exact for this model family: recurrences run past the
    real nodes only after them in sequence order, and per-frame maps never
    mix nodes, so real-node outputs match the unpadded forward.
    """
    n_max = max(prepared[i].n_nodes for i in indices)
    t_steps = prepared[indices[0]].inputs.shape[1]
    batch = torch.zeros((len(indices), n_max, t_steps, 5))
    for row, i in enumerate(indices):
        batch[row, : prepared[i].n_nodes] = prepared[i].inputs
    return model(batch)


def _epoch_parts(part_sums, count):
    return tuple(s / count for s in part_sums)


def train(
    model,
    dataset: DatasetBundle,
    split: SplitSpec | None,
    config: TrainConfig,
    weights: LossWeights | None = None,
    resume_from: str | None = None,
    material: Material = STEEL,
    stop_after: int | None = None,
) -> TrainResult:
    """Run the optimization loop; persists best/last checkpoints and a log.

    Deterministic given the seed: batch order comes from a counter-based
    generator keyed by (seed, epoch), and resuming from the saved state
    reproduces the uninterrupted run. `stop_after` caps how many epochs this
    call executes (simulating an interruption) without changing the schedule,
    which is always laid out over the full `config.epochs`.
    """
    split = split if split is not None else dataset.split
    assign = lambda i, s: split.assign(i, s.geometry_id, s.bc_case, s.load_case)
    train_idx = [i for i, s in enumerate(dataset.samples) if assign(i, s) == "train"]
    val_idx = [i for i, s in enumerate(dataset.samples) if assign(i, s) == "val"]
    if not train_idx:
        raise ConfigurationError("training split is empty")

    os.makedirs(config.out_dir, exist_ok=True)
    best_path = os.path.join(config.out_dir, "best.ckpt")
    last_path = os.path.join(config.out_dir, "last.ckpt")
    log_path = os.path.join(config.out_dir, "train.log")
    resume_path = os.path.join(config.out_dir, "resume.pt")

    torch.manual_seed(config.seed)
    prepared = {i: _prepare_sample(dataset.samples[i], dataset.normalization) for i in train_idx + val_idx}
    scales = torch.from_numpy(dataset.normalization.scales).float()

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate,
        betas=(config.adam_beta1, 0.999), weight_decay=config.weight_decay,
    )
    # Geometric decay keeps late-stage steps small enough that per-epoch
    # averages keep descending instead of hovering at a shuffle-noise floor.
    scheduler = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=config.lr_decay)

    start_epoch = 0
    history: list = []
    best_val = math.inf
    best_epoch = -1
    if resume_from is not None:
        state = torch.load(resume_from, weights_only=False)
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        scheduler.load_state_dict(state["scheduler"])
        start_epoch = state["epoch"] + 1
        history = state["history"]
        best_val = state["best_val"]
        best_epoch = state["best_epoch"]
        weights = LossWeights(**state["weights"])

    need_pde = weights is None or weights.w_pde > 0
    pde_cache = (
        PdeCache(dataset, train_idx + val_idx, config.pde_grid_size, material)
        if need_pde
        else None
    )

    def sample_parts(out, row, index):
        """Loss parts for one sample slice of a padded batch output."""
        p = prepared[index]
        pred = out[row, : p.n_nodes]
        part_d = loss_data(pred, p.truth)
        if pde_cache is not None:
            part_p = pde_cache.loss(index, pred * scales)
        else:
            part_p = torch.zeros(())
        part_b = loss_bc(pred, p.truth, p.bc_mask)
        return part_d, part_p, part_b

    def run_split(indices, order, train_mode):
        sums = [0.0, 0.0, 0.0]
        chunks = [
            [indices[j] for j in order[lo : lo + config.batch_size]]
            for lo in range(0, len(order), config.batch_size)
        ]
        # One optimizer step per window of grad_accumulation chunks; gradients
        # are averaged over the window's samples, so a window spanning the
        # whole split takes exact full-gradient steps in chunk-sized memory.
        for w_lo in range(0, len(chunks), config.grad_accumulation):
            group = chunks[w_lo : w_lo + config.grad_accumulation]
            group_n = sum(len(c) for c in group)
            if train_mode:
                optimizer.zero_grad()
            for chunk in group:
                out = _batch_forward(model, prepared, chunk)
                totals = []
                for row, index in enumerate(chunk):
                    parts = sample_parts(out, row, index)
                    totals.append(total_loss(parts, weights))
                    for k in range(3):
                        v = parts[k]
                        sums[k] += float(v.detach()) if torch.is_tensor(v) else float(v)
                stacked = torch.stack(totals)
                if not torch.isfinite(stacked).all():
                    dump = os.path.join(config.out_dir, "diagnostic.pt")
                    torch.save(
                        {
                            "model": model.state_dict(),
                            "optimizer": optimizer.state_dict(),
                            "batch_indices": chunk,
                            "part_sums": sums,
                        },
                        dump,
                    )
                    raise TrainingError(
                        f"non-finite loss on batch {chunk}; state dumped to {dump}"
                    )
                if train_mode:
                    (stacked.sum() / group_n).backward()
            if train_mode:
                optimizer.step()
        return _epoch_parts(sums, max(1, len(order)))

    if weights is None:
        model.eval()
        with torch.no_grad():
            sums = [0.0, 0.0, 0.0]
            for lo in range(0, len(train_idx), config.batch_size):
                chunk = train_idx[lo : lo + config.batch_size]
                out = _batch_forward(model, prepared, chunk)
                for row, index in enumerate(chunk):
                    p = prepared[index]
                    pred = out[row, : p.n_nodes]
                    sums[0] += float(loss_data(pred, p.truth))
                    sums[1] += float(pde_cache.loss(index, pred * scales))
                    sums[2] += float(loss_bc(pred, p.truth, p.bc_mask))
            d0, p0, b0 = _epoch_parts(sums, len(train_idx))
        w_pde = 0.1 * d0 / p0 if p0 > 0 else 0.0
        w_bc = 0.1 * d0 / b0 if b0 > 0 else 0.0
        weights = LossWeights(1.0, w_pde, w_bc)

    end_epoch = config.epochs
    if stop_after is not None:
        end_epoch = min(end_epoch, start_epoch + stop_after)

    log = open(log_path, "a" if resume_from is not None else "w", encoding="utf-8")
    try:
        for epoch in range(start_epoch, end_epoch):
            model.train()
            order = make_generator(config.seed, SHUFFLE_STREAM, epoch).permutation(
                len(train_idx)
            )
            train_parts = run_split(train_idx, list(order), train_mode=True)
            scheduler.step()
            log.write(
                f"{epoch},train,{train_parts[0]:.8e},{train_parts[1]:.8e},"
                f"{train_parts[2]:.8e},{float(total_loss(train_parts, weights)):.8e}\n"
            )
            model.eval()
            with torch.no_grad():
                val_parts = run_split(val_idx, list(range(len(val_idx))), train_mode=False)
            val_total = float(total_loss(val_parts, weights))
            log.write(
                f"{epoch},val,{val_parts[0]:.8e},{val_parts[1]:.8e},"
                f"{val_parts[2]:.8e},{val_total:.8e}\n"
            )
            log.flush()
            history.append({"epoch": epoch, "train": train_parts, "val": val_parts})
            if val_idx and val_total < best_val:
                best_val = val_total
                best_epoch = epoch
                save_checkpoint(best_path, model, seed=config.seed)
            save_checkpoint(last_path, model, seed=config.seed)
            torch.save(
                {
                    "model": model.state_dict(),
                    "optimizer": optimizer.state_dict(),
                    "scheduler": scheduler.state_dict(),
                    "epoch": epoch,
                    "history": history,
                    "best_val": best_val,
                    "best_epoch": best_epoch,
                    "weights": {
                        "w_data": weights.w_data,
                        "w_pde": weights.w_pde,
                        "w_bc": weights.w_bc,
                    },
                },
                resume_path,
            )
    finally:
        log.close()

    if not os.path.exists(best_path):
        save_checkpoint(best_path, model, seed=config.seed)
    if not os.path.exists(last_path):
        save_checkpoint(last_path, model, seed=config.seed)
    return TrainResult(
        history=history,
        weights=weights,
        best_epoch=best_epoch,
        best_val=best_val,
        best_path=best_path,
        last_path=last_path,
        log_path=log_path,
        resume_path=resume_path,
    )


@dataclass(frozen=True)
class EvalReport:
    """Per-channel error metrics plus inference timing for one split part."""

    part: str
    n_samples: int
    mae: dict          # channel -> Pa
    mrpe: dict         # channel -> percent
    seconds_per_sample: float

    def __post_init__(self):
        for ch in CHANNELS:
            if self.mae[ch] < 0 or self.mrpe[ch] < 0:
                raise ConfigurationError("error metrics must be nonnegative")

    def to_text(self) -> str:
        lines = [f"part={self.part}", f"n_samples={self.n_samples}"]
        for ch in CHANNELS:
            lines.append(f"mae_{ch}={self.mae[ch]!r}")
        for ch in CHANNELS:
            lines.append(f"mrpe_{ch}={self.mrpe[ch]!r}")
        lines.append(f"seconds_per_sample={self.seconds_per_sample!r}")
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def parse_report(text: str) -> EvalReport:
    entries = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            entries[key] = value
    return EvalReport(
        part=entries["part"],
        n_samples=int(entries["n_samples"]),
        mae={ch: float(entries[f"mae_{ch}"]) for ch in CHANNELS},
        mrpe={ch: float(entries[f"mrpe_{ch}"]) for ch in CHANNELS},
        seconds_per_sample=float(entries["seconds_per_sample"]),
    )


def evaluate(model, dataset: DatasetBundle, split: str) -> EvalReport:
    """Error metrics of a predictor over one split part, in physical units.

    `model` is a trained module, the string "zero" (all-zero predictor), or
    the string "oracle" (returns the ground truth; a perfect-model control).
    The von Mises channel is computed from the predicted channels.
    """
    if isinstance(model, str) and model not in ("zero", "oracle"):
        raise ConfigurationError(f"unknown baseline predictor {model!r}")
    if not isinstance(model, str):
        model.eval()
    indices = dataset.indices_for(split)
    if not indices:
        raise ConfigurationError(f"split part {split!r} selects no samples")
    scales = dataset.normalization.scales
    err_sum = {ch: 0.0 for ch in CHANNELS}
    peak = {ch: 0.0 for ch in CHANNELS}
    count = 0
    elapsed = 0.0
    for i in indices:
        sample = dataset.samples[i]
        prepared = _prepare_sample(sample, dataset.normalization)
        truth_phys = _sample_stress(sample).transpose(0, 2, 1)
        start = time.perf_counter()
        if isinstance(model, str):
            pred_phys = np.zeros_like(truth_phys) if model == "zero" else truth_phys.copy()
        else:
            with torch.no_grad():
                pred_norm = model(prepared.inputs[None])[0].double().numpy()
            pred_phys = pred_norm * scales[None, None, :]
        elapsed += time.perf_counter() - start
        fields = {
            "sxx": (pred_phys[..., 0], truth_phys[..., 0]),
            "syy": (pred_phys[..., 1], truth_phys[..., 1]),
            "sxy": (pred_phys[..., 2], truth_phys[..., 2]),
            "svm": (
                von_mises(pred_phys[..., 0], pred_phys[..., 1], pred_phys[..., 2]),
                von_mises(truth_phys[..., 0], truth_phys[..., 1], truth_phys[..., 2]),
            ),
        }
        for ch, (p, t) in fields.items():
            err_sum[ch] += float(np.abs(p - t).sum())
            peak[ch] = max(peak[ch], float(np.abs(p).max()), float(np.abs(t).max()))
        count += truth_phys[..., 0].size
    mae = {ch: err_sum[ch] / count for ch in CHANNELS}
    mrpe_out = {}
    for ch in CHANNELS:
        if peak[ch] == 0.0:
            raise ConfigurationError(f"MRPE undefined for channel {ch}: all values zero")
        mrpe_out[ch] = 100.0 * mae[ch] / peak[ch]
    return EvalReport(
        part=split,
        n_samples=len(indices),
        mae=mae,
        mrpe=mrpe_out,
        seconds_per_sample=elapsed / len(indices),
    )
