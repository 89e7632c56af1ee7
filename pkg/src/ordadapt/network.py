"""The adaptation model: a shared dense feature extractor with three heads.

* a scalar regression head for fully-labeled source frames,
* a softmax head over ordinal levels for weakly-labeled target frames,
* a sigmoid domain discriminator fed through a gradient-reversal node, so
  that minimizing the domain loss trains the discriminator while pushing the
  shared features toward domain invariance.

Frames are processed independently; temporal structure enters only through
bagging and pooling upstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, affine, as_tensor

CHECKPOINT_FORMAT = "ordadapt-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint file does not match the expected layout."""


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    feature_dim: int = 16
    feature_hidden: int = 32
    domain_hidden: int = 8
    levels: int = 6
    seed: int = 0

    def __post_init__(self):
        for name in ("input_dim", "feature_dim", "feature_hidden", "domain_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")


def uniform_init_bound(fan_in: int, fan_out: int) -> float:
    """Half-width of the uniform init interval: sqrt(6 / (fan_in + fan_out))."""
    return math.sqrt(6.0 / (fan_in + fan_out))


class Network:
    """Parameter container plus the forward passes of all heads.

    The feature extractor weights are shared: every head reads the same
    parameter tensors, so gradients from all losses accumulate into one set
    of feature parameters.
    """

    # (name, fan_in attr, fan_out attr) in deterministic init order
    _LAYERS = (
        ("feat.w0", "input_dim", "feature_hidden"),
        ("feat.w1", "feature_hidden", "feature_dim"),
        ("reg.w", "feature_dim", 1),
        ("ord.w", "feature_dim", "levels"),
        ("dom.w0", "feature_dim", "domain_hidden"),
        ("dom.w1", "domain_hidden", 1),
    )

    def __init__(self, config: NetworkConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.params: dict[str, Tensor] = {}
        for name, fi, fo in self._LAYERS:
            fan_in = getattr(config, fi) if isinstance(fi, str) else fi
            fan_out = getattr(config, fo) if isinstance(fo, str) else fo
            bound = uniform_init_bound(fan_in, fan_out)
            self.params[name] = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params[name.replace(".w", ".b")] = Tensor(np.zeros(fan_out))

    # -- parameter access --------------------------------------------------

    def parameters(self) -> dict:
        return self.params

    def parameter_group(self, prefix: str) -> dict:
        """Parameters of one component: 'feat', 'reg', 'ord' or 'dom'."""
        group = {k: v for k, v in self.params.items() if k.startswith(prefix + ".")}
        if not group:
            raise KeyError(f"no parameter group {prefix!r}")
        return group

    def state_arrays(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state(self, state: dict) -> None:
        for name, tensor in self.params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise CheckpointError(
                    f"tensor {name!r}: stored shape {arr.shape} does not match "
                    f"expected {tensor.data.shape}")
            tensor.data = arr.copy()
            tensor.zero_grad()

    def clone(self) -> "Network":
        other = Network(self.config)
        other.load_state(self.state_arrays())
        return other

    # -- forward passes ----------------------------------------------------

    def _check_frames(self, frames) -> Tensor:
        frames = as_tensor(frames)
        if frames.data.ndim != 2 or frames.data.shape[1] != self.config.input_dim:
            raise ValueError(
                f"frames must be [batch, {self.config.input_dim}], got "
                f"{frames.data.shape}")
        return frames

    def features(self, frames) -> Tensor:
        """Shared extractor: two dense+ReLU layers over per-frame vectors."""
        x = self._check_frames(frames)
        h = affine(x, self.params["feat.w0"], self.params["feat.b0"]).relu()
        return affine(h, self.params["feat.w1"], self.params["feat.b1"]).relu()

    def regression_head(self, feats: Tensor) -> Tensor:
        return affine(feats, self.params["reg.w"], self.params["reg.b"])

    def ordinal_head(self, feats: Tensor) -> Tensor:
        return affine(feats, self.params["ord.w"], self.params["ord.b"]).softmax_rows()

    def domain_head(self, feats: Tensor, trade_off: float) -> Tensor:
        reversed_feats = feats.reverse_gradient(trade_off)
        h = affine(reversed_feats, self.params["dom.w0"], self.params["dom.b0"]).relu()
        return affine(h, self.params["dom.w1"], self.params["dom.b1"]).sigmoid()

    def forward_source(self, frames) -> Tensor:
        """Per-frame scalar regression output, [batch, 1]."""
        return self.regression_head(self.features(frames))

    def forward_target(self, frames) -> Tensor:
        """Per-frame softmax rows over the ordinal levels, [batch, K]."""
        return self.ordinal_head(self.features(frames))

    def forward_domain(self, frames, trade_off: float) -> Tensor:
        """Per-frame domain probability in (0, 1), [batch, 1]."""
        return self.domain_head(self.features(frames), trade_off)

    # -- checkpoint io -----------------------------------------------------
    #
    # Checkpoints are JSON with sorted keys:
    #   {"format": ..., "version": 1, "config": {...},
    #    "tensors": {name: {"shape": [...], "data": [row-major floats]}}}
    # Float round-tripping is exact (shortest-repr serialization), so a
    # save/load cycle is bit-identical.

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "tensors": {
                name: {"shape": list(t.data.shape),
                       "data": t.data.reshape(-1).tolist()}
                for name, t in self.params.items()
            },
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1))

    @classmethod
    def load(cls, path) -> "Network":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"not a checkpoint file: {exc}") from exc
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"unknown checkpoint format {payload.get('format')!r}")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
        net = cls(NetworkConfig(**payload["config"]))
        state = {}
        for name, entry in payload["tensors"].items():
            state[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        missing = set(net.params) - set(state)
        if missing:
            raise CheckpointError(f"checkpoint is missing tensors: {sorted(missing)}")
        net.load_state(state)
        return net
