"""Relative l1 / l2 error metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["EvalResult", "rmae", "rrmse", "evaluate"]


@dataclass
class EvalResult:
    rmae: float
    rrmse: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(pred, ref):
    pred = np.asarray(pred, dtype=float).ravel()
    ref = np.asarray(ref, dtype=float).ravel()
    if pred.shape != ref.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {ref.size} references")
    if pred.size == 0:
        raise ValueError("no points")
    return pred, ref


def rmae(pred, ref) -> float:
    """``sum |pred - ref| / sum |ref|``."""
    pred, ref = _pair(pred, ref)
    denom = np.sum(np.abs(ref))
    if denom == 0:
        raise ValueError("reference is identically zero")
    return float(np.sum(np.abs(pred - ref)) / denom)


def rrmse(pred, ref) -> float:
    """``sqrt(sum (pred - ref)^2 / sum ref^2)``."""
    pred, ref = _pair(pred, ref)
    denom = np.sum(ref * ref)
    if denom == 0:
        raise ValueError("reference is identically zero")
    return float(np.sqrt(np.sum((pred - ref) ** 2) / denom))


def evaluate(pred, ref) -> EvalResult:
    pred, ref = _pair(pred, ref)
    return EvalResult(rmae(pred, ref), rrmse(pred, ref), int(pred.size))
