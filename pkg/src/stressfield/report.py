"""Rendering of stress fields to bitmap images, CSV exports, and figures.

Grid rasters are written as uncompressed 24-bit bitmaps with a linear
blue-to-red color map over the rendered frame's value range, so identical
inputs yield byte-identical files. CSV exports carry one row per (node, frame)
with the three stress channels and the von Mises equivalent. Comparison and
loss-curve figures are rendered with matplotlib.
"""

import os
import struct

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import torch

from .errors import ContractError
from .fem import von_mises
from .grid import GridOperator, build_grid_operator
from .training import _prepare_sample, _sample_stress, sample_mesh

CSV_HEADER = "node,t,sxx,syy,sxy,svm"
CHANNEL_NAMES = ("sxx", "syy", "sxy", "svm")


def write_bmp(path: str, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 RGB array as an uncompressed 24-bit bitmap.

    Rows are stored bottom-up per the format, so rgb[0] is the bottom row.
    """
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ContractError(f"image must be (H, W, 3) uint8, got {rgb.shape} {rgb.dtype}")
    h, w, _ = rgb.shape
    row_bytes = w * 3
    padding = (4 - row_bytes % 4) % 4
    image_size = (row_bytes + padding) * h
    with open(path, "wb") as fh:
        fh.write(b"BM")
        fh.write(struct.pack("<IHHI", 54 + image_size, 0, 0, 54))
        fh.write(struct.pack("<IiiHHIIiiII", 40, w, h, 1, 24, 0, image_size, 2835, 2835, 0, 0))
        pad = b"\x00" * padding
        bgr = rgb[:, :, ::-1]
        for row in bgr:  # bottom-up: first stored row is the bottom scanline
            fh.write(row.tobytes())
            fh.write(pad)


def colorize(field: np.ndarray, mask: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map a grid field onto the blue-to-red linear color map.

    lo maps to pure blue, hi to pure red; a degenerate range (lo == hi)
    renders the uniform midpoint color. Masked cells are black.
    """
    if hi > lo:
        t = np.clip((field - lo) / (hi - lo), 0.0, 1.0)
    else:
        t = np.full_like(field, 0.5)
    rgb = np.zeros(field.shape + (3,), dtype=np.uint8)
    rgb[..., 0] = np.round(255 * t).astype(np.uint8)
    rgb[..., 2] = np.round(255 * (1.0 - t)).astype(np.uint8)
    rgb[~mask] = 0
    return rgb


def _channel_stack(stress: np.ndarray) -> np.ndarray:
    """(N, 3, T) physical stress -> (N, 4, T) with the von Mises channel."""
    svm = von_mises(stress[:, 0, :], stress[:, 1, :], stress[:, 2, :])
    return np.concatenate([stress, svm[:, None, :]], axis=1)


def write_stress_csv(path: str, stress: np.ndarray) -> None:
    """One row per (node, frame): node,t,sxx,syy,sxy,svm."""
    stacked = _channel_stack(stress)
    n, _, t_steps = stacked.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for node in range(n):
            for t in range(t_steps):
                vals = ",".join(f"{stacked[node, ch, t]:.9e}" for ch in range(4))
                fh.write(f"{node},{t},{vals}\n")


def predicted_stress(model, sample, normalization) -> np.ndarray:
    """Run a checkpointed model on one sample; returns (N, 3, T) in Pa."""
    model.eval()
    prepared = _prepare_sample(sample, normalization)
    with torch.no_grad():
        pred_norm = model(prepared.inputs[None])[0].double().numpy()  # (N, T, 3)
    return (pred_norm * normalization.scales[None, None, :]).transpose(0, 2, 1)


def render_sample(
    bundle,
    sample_index: int,
    frame: int,
    model=None,
    out_dir: str = ".",
    stem: str | None = None,
    grid_size: int | None = None,
) -> list:
    """Render one sample's stress maps and CSV exports; returns written paths.

    Always writes per-channel truth bitmaps and `<stem>_truth.csv`; with a
    model, adds prediction bitmaps sharing the truth color range,
    `<stem>_pred.csv`, and a side-by-side comparison figure.
    """
    if not 0 <= sample_index < len(bundle.samples):
        raise ContractError(
            f"sample {sample_index} out of range [0, {len(bundle.samples)})"
        )
    sample = bundle.samples[sample_index]
    truth = _sample_stress(sample)
    if not 0 <= frame < truth.shape[2]:
        raise ContractError(f"frame {frame} out of range [0, {truth.shape[2]})")
    os.makedirs(out_dir, exist_ok=True)
    if stem is None:
        stem = f"sample{sample_index:04d}_frame{frame:03d}"

    mesh = sample_mesh(sample)
    kwargs = {} if grid_size is None else {"grid_size": grid_size}
    op = build_grid_operator(mesh.nodes, **kwargs)

    truth_ch = _channel_stack(truth)
    pred_ch = None
    if model is not None:
        pred_ch = _channel_stack(predicted_stress(model, sample, bundle.normalization))

    written = []
    grids = {}
    for ci, name in enumerate(CHANNEL_NAMES):
        g_truth = op.lift(truth_ch[:, ci, frame])
        lo = float(g_truth[op.mask].min())
        hi = float(g_truth[op.mask].max())
        fields = {"truth": g_truth}
        if pred_ch is not None:
            g_pred = op.lift(pred_ch[:, ci, frame])
            lo = min(lo, float(g_pred[op.mask].min()))
            hi = max(hi, float(g_pred[op.mask].max()))
            fields["pred"] = g_pred
        grids[name] = (fields, lo, hi)
        for kind, g in fields.items():
            path = os.path.join(out_dir, f"{stem}_{name}_{kind}.bmp")
            write_bmp(path, colorize(g, op.mask, lo, hi))
            written.append(path)

    truth_csv = os.path.join(out_dir, f"{stem}_truth.csv")
    write_stress_csv(truth_csv, truth)
    written.append(truth_csv)
    if pred_ch is not None:
        pred_csv = os.path.join(out_dir, f"{stem}_pred.csv")
        write_stress_csv(pred_csv, pred_ch[:, :3, :])
        written.append(pred_csv)

    written.append(_comparison_figure(out_dir, stem, frame, grids, op))
    return written


def _comparison_figure(out_dir: str, stem: str, frame: int, grids: dict, op: GridOperator) -> str:
    rows = 2 if "pred" in grids[CHANNEL_NAMES[0]][0] else 1
    fig, axes = plt.subplots(rows, 4, figsize=(16, 3.6 * rows), squeeze=False)
    extent = (op.xs[0], op.xs[-1], op.ys[0], op.ys[-1])
    for ci, name in enumerate(CHANNEL_NAMES):
        fields, lo, hi = grids[name]
        for ri, kind in enumerate(("truth", "pred")[:rows]):
            ax = axes[ri][ci]
            shown = np.where(op.mask, fields[kind], np.nan)
            im = ax.imshow(
                shown, origin="lower", extent=extent, vmin=lo,
                vmax=hi if hi > lo else lo + 1.0, cmap="coolwarm",
            )
            ax.set_title(f"{name} {kind} (frame {frame})")
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_compare.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def loss_curves(log_path: str, out_png: str) -> str:
    """Plot per-epoch total loss for the train and val splits from a log."""
    series = {"train": ([], []), "val": ([], [])}
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6 or parts[1] not in series:
                continue
            series[parts[1]][0].append(int(parts[0]))
            series[parts[1]][1].append(float(parts[5]))
    if not series["train"][0]:
        raise ContractError(f"no loss lines found in {log_path}")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, (xs, ys) in series.items():
        if xs:
            ax.plot(xs, ys, marker="o", markersize=3, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("total loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
    return out_png
