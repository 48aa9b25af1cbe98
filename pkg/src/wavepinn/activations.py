"""Adaptive wavelet-tanh activations and the wavelet function catalog.

Each adaptive activation multiplies ``tanh(beta * x)`` by a localized wavelet
factor. Coefficients are stored raw and mapped through softplus so the
effective values stay positive whatever the optimizer does to them:

=================  =========================================  ===================
family             formula                                    coefficients
=================  =========================================  ===================
tanh               tanh(x)                                    none
softmextanh        tanh(bx) (1 - g x^2) exp(-a x^2)           alpha, beta, gamma
softmortanh        cos(w x) exp(-x^2 / (2 s^2)) tanh(bx)      omega, sigma, beta
softgausstanh      tanh(bx) exp(-a x^2)                       alpha, beta
softgabortanh      tanh(bx) exp(-x^2 / (2 s^2)) cos(w x)      sigma, omega, beta
softher{n}tanh     tanh(bx) H_n(x) exp(-a x^2)                alpha, beta
=================  =========================================  ===================

A trailing ``w`` in the name (``softgabortanhw``) freezes ``beta`` at its
initial value. None of the catalog wavelets are checked for admissibility;
the Gaussian envelope makes them all decay, which is what the network needs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet2, Scalar, Tape

__all__ = [
    "COEF_NAMES",
    "FAMILIES",
    "ActivationKind",
    "ActivationSpec",
    "BoundActivation",
    "parse_activation",
    "all_activation_names",
    "softplus_map",
    "inverse_softplus",
    "hermite_poly",
    "eval_activation",
    "init_activation",
    "activation_value",
    "mexican_hat",
    "morlet",
    "hermite_function",
    "gaussian_wavelet",
    "gaussian",
    "gabor_real",
    "softplus",
    "tanh",
]

# Slot order shared with the batched kernels.
COEF_NAMES = ("alpha", "beta", "gamma", "omega", "sigma")

FAMILIES = {
    "tanh": (),
    "softmextanh": ("alpha", "beta", "gamma"),
    "softmortanh": ("omega", "sigma", "beta"),
    "softgausstanh": ("alpha", "beta"),
    "softgabortanh": ("sigma", "omega", "beta"),
    "softhertanh": ("alpha", "beta"),
}

FAMILY_IDS = {name: i for i, name in enumerate(FAMILIES)}

_NAME_RE = re.compile(r"^(tanh|softmextanh|softmortanh|softgausstanh|softgabortanh|softher([1-4])tanh)(w?)$")


@dataclass(frozen=True)
class ActivationKind:
    family: str
    w_variant: bool = False
    order: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown activation family {self.family!r}")
        if self.family == "softhertanh":
            if self.order not in (1, 2, 3, 4):
                raise ValueError(f"Hermite order must be 1..4, got {self.order}")
        elif self.order:
            raise ValueError("only softhertanh takes a Hermite order")
        if self.family == "tanh" and self.w_variant:
            # plain tanh has no beta to freeze
            object.__setattr__(self, "w_variant", False)

    @property
    def name(self) -> str:
        if self.family == "softhertanh":
            base = f"softher{self.order}tanh"
        else:
            base = self.family
        return base + ("w" if self.w_variant else "")

    @property
    def coefficients(self) -> tuple[str, ...]:
        return FAMILIES[self.family]

    @property
    def family_id(self) -> int:
        return FAMILY_IDS[self.family]

    def __str__(self) -> str:
        return self.name


def parse_activation(name: str) -> ActivationKind:
    """Parse names like ``softgabortanhw`` or ``softher2tanh``."""
    m = _NAME_RE.match(name.strip().lower())
    if m is None:
        raise ValueError(f"unknown activation {name!r}; expected one of {', '.join(all_activation_names())}")
    base, order, w = m.groups()
    if order:
        return ActivationKind("softhertanh", bool(w), int(order))
    if base == "tanh" and w:
        raise ValueError("tanh has no W-variant")
    return ActivationKind(base, bool(w))


def all_activation_names() -> list[str]:
    names = ["tanh"]
    for fam in ("softmextanh", "softmortanh", "softgausstanh", "softgabortanh"):
        names += [fam, fam + "w"]
    for n in (1, 2, 3, 4):
        names += [f"softher{n}tanh", f"softher{n}tanhw"]
    return names


def inverse_softplus(y: float) -> float:
    if y <= 0:
        raise ValueError("softplus only reaches positive values")
    return y + math.log(-math.expm1(-y))


@dataclass
class ActivationSpec:
    """Activation kind plus raw (pre-softplus) coefficient values."""

    kind: ActivationKind
    raw: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.raw) != set(self.kind.coefficients):
            raise ValueError(f"{self.kind.name} needs coefficients {self.kind.coefficients}, got {sorted(self.raw)}")

    def is_trainable(self, name: str) -> bool:
        return not (name == "beta" and self.kind.w_variant)

    @property
    def trainable_names(self) -> list[str]:
        return [c for c in self.kind.coefficients if self.is_trainable(c)]

    def effective(self) -> dict[str, float]:
        from .autodiff import softplus_value

        return {c: softplus_value(self.raw[c]) for c in self.kind.coefficients}

    def coef_vector(self) -> np.ndarray:
        """Effective coefficients in :data:`COEF_NAMES` slot order (unused slots 1)."""
        eff = self.effective()
        return np.array([eff.get(c, 1.0) for c in COEF_NAMES])

    def bind(self, tape: Tape) -> BoundActivation:
        """Put the raw coefficients on ``tape``; frozen ones become constants."""
        raw = {}
        for c in self.kind.coefficients:
            raw[c] = tape.param(self.raw[c]) if self.is_trainable(c) else tape.const(self.raw[c])
        return BoundActivation(self.kind, raw)

    def to_dict(self) -> dict:
        return {"name": self.kind.name, "raw": dict(self.raw)}

    @classmethod
    def from_dict(cls, d: dict) -> ActivationSpec:
        return cls(parse_activation(d["name"]), {k: float(v) for k, v in d["raw"].items()})


@dataclass
class BoundActivation:
    kind: ActivationKind
    raw: dict[str, Scalar]

    def effective(self) -> dict[str, Scalar]:
        return {c: softplus_map(s) for c, s in self.raw.items()}


def init_activation(kind, w_variant: bool | None = None, gabor_omega_init: float = 3, init_mode: str = "raw") -> ActivationSpec:
    """Initial coefficients: 1 everywhere, Gabor omega at 3 or 5.

    ``init_mode="raw"`` puts these numbers on the raw parameters (effective
    value ``softplus(1) ~ 1.313``); ``"effective"`` solves for raw values so
    the effective coefficients equal them.
    """
    if isinstance(kind, str):
        kind = parse_activation(kind)
    if w_variant is not None and kind.family != "tanh":
        kind = ActivationKind(kind.family, w_variant, kind.order)
    if gabor_omega_init not in (3, 5):
        raise ValueError(f"gabor_omega_init must be 3 or 5, got {gabor_omega_init!r}")
    if init_mode not in ("raw", "effective"):
        raise ValueError(f"init_mode must be 'raw' or 'effective', got {init_mode!r}")
    raw = {}
    for c in kind.coefficients:
        v = float(gabor_omega_init) if (kind.family == "softgabortanh" and c == "omega") else 1.0
        raw[c] = inverse_softplus(v) if init_mode == "effective" else v
    return ActivationSpec(kind, raw)


def softplus_map(raw: Scalar) -> Scalar:
    """Strictly positive effective coefficient from a raw one."""
    return raw.softplus()


# Elementwise helpers that accept floats, arrays or jets.


def _exp(x):
    return x.exp() if isinstance(x, (Jet2, Scalar)) else np.exp(x)


def _cos(x):
    return x.cos() if isinstance(x, (Jet2, Scalar)) else np.cos(x)


def _tanh(x):
    return x.tanh() if isinstance(x, (Jet2, Scalar)) else np.tanh(x)


def _sq(x):
    return x.square() if isinstance(x, (Jet2, Scalar)) else x * x


def hermite_poly(n: int, x):
    """Physicists' Hermite polynomial of order 1 to 4."""
    if n == 1:
        return x * 2.0
    if n == 2:
        return _sq(x) * 4.0 - 2.0
    if n == 3:
        return x * (_sq(x) * 8.0 - 12.0)
    if n == 4:
        x2 = _sq(x)
        return x2 * (x2 * 16.0 - 48.0) + 12.0
    raise ValueError(f"unsupported Hermite order {n}; expected 1..4")


def _formula(kind: ActivationKind, c: dict, x):
    fam = kind.family
    if fam == "tanh":
        return _tanh(x)
    t = _tanh(x * c["beta"])
    x2 = _sq(x)
    if fam == "softmextanh":
        return t * (1.0 - x2 * c["gamma"]) * _exp(-(x2 * c["alpha"]))
    if fam == "softgausstanh":
        return t * _exp(-(x2 * c["alpha"]))
    if fam == "softhertanh":
        return t * hermite_poly(kind.order, x) * _exp(-(x2 * c["alpha"]))
    inv = 1.0 / (_sq(c["sigma"]) * 2.0)
    env = _exp(-(x2 * inv))
    carrier = _cos(x * c["omega"])
    if fam == "softmortanh":
        return carrier * env * t
    if fam == "softgabortanh":
        return t * env * carrier
    raise ValueError(fam)  # pragma: no cover


def eval_activation(act: BoundActivation, x: Jet2) -> Jet2:
    """Activation applied to a jet; trainable coefficients stay on the tape."""
    return _formula(act.kind, act.effective(), x)


def activation_value(spec: ActivationSpec, x):
    """Plain numeric evaluation for floats or arrays."""
    eff = {k: float(v) for k, v in spec.effective().items()}
    return _formula(spec.kind, eff, np.asarray(x, dtype=float))


# Wavelet catalog. Each accepts floats, numpy arrays or jets.


def mexican_hat(x):
    return (1.0 - _sq(x)) * _exp(_sq(x) * -0.5)


def morlet(x, omega0: float = 5.0):
    return _cos(x * omega0) * _exp(_sq(x) * -0.5)


def hermite_function(n: int, x):
    return hermite_poly(n, x) * _exp(_sq(x) * -0.5)


def gaussian_wavelet(x):
    return -x * _exp(_sq(x) * -0.5)


def gaussian(x):
    return _exp(_sq(x) * -0.5)


def gabor_real(x, sigma: float = 1.0, omega0: float = 3.0):
    return _exp(_sq(x) * (-0.5 / sigma**2)) * _cos(x * omega0)


def softplus(x):
    if isinstance(x, (Jet2, Scalar)):
        if isinstance(x, Scalar):
            return x.softplus()
        s = x.val.softplus()
        e = x.val.exp()
        sig = e / (e + 1.0)
        return x.compose(s, sig, sig * (1.0 - sig))
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def tanh(x):
    return _tanh(x)
