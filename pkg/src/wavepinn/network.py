"""Fully connected approximator with adaptive activations.

Parameters live in numpy arrays between loss evaluations. The flat layout
used by the optimizer and by checkpoints is fixed: ``W_1`` (row-major),
``b_1``, ..., ``W_L``, ``b_L``, then the trainable raw activation
coefficients of each activation spec in its kind's coefficient order. Frozen
coefficients (beta in W-variants) are not part of the flat vector.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .activations import ActivationSpec, BoundActivation, eval_activation, init_activation, parse_activation
from .autodiff import Jet2, Scalar, Tape, affine

__all__ = ["MlpConfig", "MlpModel", "BoundMlp", "init_model", "bind", "forward", "save_checkpoint", "load_checkpoint", "CHECKPOINT_MAGIC"]

CHECKPOINT_MAGIC = "WAVEPINN1"


@dataclass
class MlpConfig:
    in_dim: int = 2
    out_dim: int = 1
    hidden_layers: int = 4
    hidden_width: int = 512
    activation: str = "tanh"
    seed: int = 5
    gabor_omega_init: int = 3
    init_mode: str = "raw"
    per_layer_activation: bool = False
    output_activation: bool = False

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("hidden_layers and hidden_width must be >= 1")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("in_dim and out_dim must be >= 1")
        parse_activation(self.activation)

    @property
    def widths(self) -> list[int]:
        return [self.in_dim] + [self.hidden_width] * self.hidden_layers + [self.out_dim]

    @property
    def n_activated(self) -> int:
        return self.hidden_layers + (1 if self.output_activation else 0)


@dataclass
class MlpModel:
    config: MlpConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[ActivationSpec] = field(default_factory=list)

    def activation_for(self, layer: int) -> ActivationSpec:
        return self.activations[layer] if self.config.per_layer_activation else self.activations[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def is_activated(self, layer: int) -> bool:
        return layer < self.n_layers - 1 or self.config.output_activation

    @property
    def parameter_count(self) -> int:
        n = sum(w.size + b.size for w, b in zip(self.weights, self.biases))
        return n + sum(len(a.trainable_names) for a in self.activations)

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        for a in self.activations:
            parts.append(np.array([a.raw[c] for c in a.trainable_names], dtype=float))
        return np.concatenate(parts)

    def set_flat(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.parameter_count,):
            raise ValueError(f"expected {self.parameter_count} parameters, got {theta.shape}")
        k = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = theta[k : k + w.size].reshape(w.shape)
            k += w.size
            b[...] = theta[k : k + b.size]
            k += b.size
        for a in self.activations:
            for c in a.trainable_names:
                a.raw[c] = float(theta[k])
                k += 1

    def copy(self) -> MlpModel:
        return MlpModel(
            MlpConfig(**asdict(self.config)),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [ActivationSpec(a.kind, dict(a.raw)) for a in self.activations],
        )


def init_model(config: MlpConfig) -> MlpModel:
    """Glorot-uniform weights, zero biases, activation coefficients at their initial values."""
    rng = np.random.default_rng(config.seed)
    widths = config.widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    n_specs = config.n_activated if config.per_layer_activation else 1
    acts = [
        init_activation(config.activation, gabor_omega_init=config.gabor_omega_init, init_mode=config.init_mode)
        for _ in range(n_specs)
    ]
    return MlpModel(config, weights, biases, acts)


@dataclass
class BoundMlp:
    """A model whose parameters are leaves of one tape."""

    model: MlpModel
    tape: Tape
    weights: list[list[list[Scalar]]]
    biases: list[list[Scalar]]
    activations: list[BoundActivation]

    def activation_for(self, layer: int) -> BoundActivation:
        return self.activations[layer] if self.model.config.per_layer_activation else self.activations[0]


def bind(model: MlpModel, tape: Tape) -> BoundMlp:
    """Register every parameter on ``tape`` in flat-vector order."""
    ws, bs = [], []
    for w, b in zip(model.weights, model.biases):
        ws.append([[tape.param(v) for v in row] for row in w.tolist()])
        bs.append([tape.param(v) for v in b.tolist()])
    acts = [a.bind(tape) for a in model.activations]
    return BoundMlp(model, tape, ws, bs, acts)


def forward(bound: BoundMlp, inputs: Sequence[Jet2]) -> list[Jet2]:
    """Evaluate the network on one point given as jets, one per input coordinate."""
    cfg = bound.model.config
    if len(inputs) != cfg.in_dim:
        raise ValueError(f"model expects {cfg.in_dim} inputs, got {len(inputs)}")
    h = list(inputs)
    n = len(bound.weights)
    for layer in range(n):
        z = [affine(row, h, b) for row, b in zip(bound.weights[layer], bound.biases[layer])]
        if bound.model.is_activated(layer):
            act = bound.activation_for(layer)
            z = [eval_activation(act, zi) for zi in z]
        h = z
    return h


def save_checkpoint(model: MlpModel, path) -> None:
    """JSON checkpoint: magic, config, flat trainable vector, raw activation coefficients."""
    doc = {
        "magic": CHECKPOINT_MAGIC,
        "config": asdict(model.config),
        "params": model.get_flat().tolist(),
        "activations": [a.to_dict() for a in model.activations],
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> MlpModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
    model = init_model(MlpConfig(**doc["config"]))
    model.activations = [ActivationSpec.from_dict(d) for d in doc["activations"]]
    model.set_flat(np.array(doc["params"], dtype=float))
    return model
