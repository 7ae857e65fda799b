"""Neural stress-field models: the STM network and its two ablation baselines.

The main model encodes each node/frame input row with a pointwise 2-layer MLP,
passes it through three blocks that run an LSTM over time (batch B*N) and then
an LSTM over the node sequence (batch B*T), and decodes with a pointwise
linear head into the three normalized stress channels. Tempo-LSTM keeps the
same pipeline with the spatial recurrences removed (six temporal layers);
Spatio-MLP is a per-frame six-layer feedforward network over the concatenated
node features, padded to a fixed node budget.

Force channels are scaled by FORCE_SCALE at the model boundary so kN-scale
inputs enter near unity; coordinates are fed in meters unchanged.
"""

import struct
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .dataset import FORCE_SCALE
from .errors import ConfigurationError, ContractError

VARIANTS = ("Spatiotempo-LSTM", "Tempo-LSTM", "Spatio-MLP")

CHECKPOINT_MAGIC = b"STCK"
CHECKPOINT_VERSION = 1
_HEADER_FORMAT = "<IBIIIIQI"  # version, variant, d, blocks, width, max_nodes, seed, n_params


@dataclass(frozen=True)
class ModelConfig:
    """Architecture settings; the variant is fixed at construction."""

    variant: str = "Spatiotempo-LSTM"
    d: int = 64
    stm_blocks: int = 3
    in_channels: int = 5
    out_channels: int = 3
    mlp_width: int = 173
    max_nodes: int = 512

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.d < 1:
            raise ConfigurationError(f"hidden width must be >= 1, got {self.d}")
        if self.stm_blocks < 1:
            raise ConfigurationError(f"block count must be >= 1, got {self.stm_blocks}")


def _check_input(x: torch.Tensor, in_channels: int) -> None:
    if x.dim() != 4 or x.size(-1) != in_channels:
        raise ContractError(
            f"model input must be (B, N, T, {in_channels}), got {tuple(x.shape)}"
        )


def scale_inputs(x: torch.Tensor) -> torch.Tensor:
    """Scale the two force channels so typical magnitudes are near unity."""
    scale = torch.ones(x.size(-1), dtype=x.dtype, device=x.device)
    scale[3:5] = FORCE_SCALE
    return x * scale


class Encoder(nn.Module):
    """Pointwise 2-layer MLP lifting the 5 input channels to width d."""

    def __init__(self, d: int, in_channels: int = 5):
        super().__init__()
        self.in_channels = in_channels
        self.fc1 = nn.Linear(in_channels, d)
        self.fc2 = nn.Linear(d, d)
        self.act = nn.LeakyReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.in_channels)
        x = scale_inputs(x.to(self.fc1.weight.dtype))
        return self.fc2(self.act(self.fc1(x)))


class StmBlock(nn.Module):
    """One temporal-then-spatial recurrence pair; preserves (B, N, T, d)."""

    def __init__(self, d: int):
        super().__init__()
        self.temporal = nn.LSTM(d, d, batch_first=True)
        self.spatial = nn.LSTM(d, d, batch_first=True)

    def temporal_stage(self, x: torch.Tensor) -> torch.Tensor:
        b, n, t, d = x.shape
        out, _ = self.temporal(x.reshape(b * n, t, d))
        return out.reshape(b, n, t, d)

    def spatial_stage(self, x: torch.Tensor) -> torch.Tensor:
        b, n, t, d = x.shape
        seq = x.permute(0, 2, 1, 3).reshape(b * t, n, d)
        out, _ = self.spatial(seq)
        return out.reshape(b, t, n, d).permute(0, 2, 1, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.spatial_stage(self.temporal_stage(x))


class StmModel(nn.Module):
    """Encoder -> stacked temporal/spatial recurrence blocks -> linear head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config.d, config.in_channels)
        self.blocks = nn.ModuleList(StmBlock(config.d) for _ in range(config.stm_blocks))
        self.head = nn.Linear(config.d, config.out_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.encoder(x)
        for block in self.blocks:
            h = block(h)
        return self.head(h)


class TempoLstm(nn.Module):
    """Same pipeline with spatial recurrences removed: temporal layers only."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config.d, config.in_channels)
        self.layers = nn.ModuleList(
            nn.LSTM(config.d, config.d, batch_first=True)
            for _ in range(2 * config.stm_blocks)
        )
        self.head = nn.Linear(config.d, config.out_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.encoder(x)
        b, n, t, d = h.shape
        h = h.reshape(b * n, t, d)
        for layer in self.layers:
            h, _ = layer(h)
        return self.head(h.reshape(b, n, t, d))


class SpatioMlp(nn.Module):
    """Per-frame feedforward over concatenated node features, padded to a
    fixed node budget so one set of weights serves variable mesh sizes."""

    N_LAYERS = 6

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        n_in = config.max_nodes * config.in_channels
        n_out = config.max_nodes * config.out_channels
        w = config.mlp_width
        widths = [n_in] + [w] * (self.N_LAYERS - 1) + [n_out]
        self.layers = nn.ModuleList(
            nn.Linear(widths[i], widths[i + 1]) for i in range(self.N_LAYERS)
        )
        self.act = nn.LeakyReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x, self.config.in_channels)
        b, n, t, m = x.shape
        if n > self.config.max_nodes:
            raise ContractError(
                f"mesh has {n} nodes but the frame MLP is sized for {self.config.max_nodes}"
            )
        x = scale_inputs(x.to(self.layers[0].weight.dtype))
        padded = x.new_zeros((b, self.config.max_nodes, t, m))
        padded[:, :n] = x
        h = padded.permute(0, 2, 1, 3).reshape(b, t, -1)
        for layer in self.layers[:-1]:
            h = self.act(layer(h))
        h = self.layers[-1](h)
        out = h.reshape(b, t, self.config.max_nodes, self.config.out_channels)
        return out.permute(0, 2, 1, 3)[:, :n]


def build_model(config: ModelConfig, seed: int | None = None) -> nn.Module:
    """Construct a variant; with a seed, initialization is reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    if config.variant == "Spatiotempo-LSTM":
        return StmModel(config)
    if config.variant == "Tempo-LSTM":
        return TempoLstm(config)
    return SpatioMlp(config)


def param_count(config: ModelConfig) -> int:
    """Exact number of trainable scalars for a configuration."""
    model = build_model(config)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def baseline_forward(variant: str, inputs: torch.Tensor, model: nn.Module | None = None) -> torch.Tensor:
    """Run a variant on a batch; builds a freshly initialized model if none given."""
    if model is None:
        model = build_model(ModelConfig(variant=variant))
    with torch.no_grad():
        return model(inputs)


def save_checkpoint(path: str, model: nn.Module, seed: int = 0) -> None:
    """Persist config header + flat float32 parameters in traversal order."""
    config = model.config
    params = [p.detach().cpu() for _, p in model.named_parameters()]
    n_params = sum(p.numel() for p in params)
    header = struct.pack(
        _HEADER_FORMAT,
        CHECKPOINT_VERSION,
        VARIANTS.index(config.variant),
        config.d,
        config.stm_blocks,
        config.mlp_width,
        config.max_nodes,
        seed,
        n_params,
    )
    payload = np.concatenate([p.numpy().astype("<f4").ravel() for p in params])
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        fh.write(payload.tobytes())


def load_checkpoint(path: str) -> tuple[nn.Module, ModelConfig, int]:
    """Rebuild a model from a checkpoint; returns (model, config, seed)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ContractError(f"bad checkpoint magic {magic!r}")
        header = fh.read(struct.calcsize(_HEADER_FORMAT))
        version, variant_idx, d, blocks, width, max_nodes, seed, n_params = struct.unpack(
            _HEADER_FORMAT, header
        )
        if version != CHECKPOINT_VERSION:
            raise ContractError(f"unsupported checkpoint version {version}")
        if variant_idx >= len(VARIANTS):
            raise ContractError(f"unknown variant index {variant_idx}")
        payload = np.frombuffer(fh.read(4 * n_params), dtype="<f4")
    if len(payload) != n_params:
        raise ContractError(
            f"checkpoint payload truncated: expected {n_params} values, got {len(payload)}"
        )
    config = ModelConfig(
        variant=VARIANTS[variant_idx],
        d=d,
        stm_blocks=blocks,
        mlp_width=width,
        max_nodes=max_nodes,
    )
    model = build_model(config)
    offset = 0
    with torch.no_grad():
        for _, p in model.named_parameters():
            n = p.numel()
            chunk = torch.from_numpy(payload[offset : offset + n].copy())
            p.copy_(chunk.reshape(p.shape))
            offset += n
    if offset != n_params:
        raise ContractError(
            f"checkpoint payload mismatch: consumed {offset} of {n_params} values"
        )
    return model, config, seed
