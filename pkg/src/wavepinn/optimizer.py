"""Full-batch L-BFGS with a strong Wolfe line search."""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["LbfgsConfig", "IterRecord", "OptimTrace", "minimize", "strong_wolfe", "two_loop_direction", "check_wolfe"]

log = logging.getLogger(__name__)


@dataclass
class LbfgsConfig:
    max_iters: int = 1000
    history: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-9
    max_linesearch_evals: int = 25
    initial_step: float = 1.0
    # "steps": max_iters bounds accepted steps; "evals": it bounds objective evaluations
    count: str = "steps"

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.history < 1:
            raise ValueError("history must be >= 1")
        if self.count not in ("steps", "evals"):
            raise ValueError("count must be 'steps' or 'evals'")


@dataclass
class IterRecord:
    iteration: int
    loss: float
    grad_norm: float
    step: float
    evals: int
    # line-search quantities, kept so the Wolfe inequalities can be re-checked
    prev_loss: float = math.nan
    slope0: float = math.nan
    slope: float = math.nan


@dataclass
class OptimTrace:
    records: list[IterRecord] = field(default_factory=list)
    status: str = "running"
    initial_loss: float = math.nan
    initial_grad_norm: float = math.nan
    function_evals: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def write_csv(self, path) -> None:
        """``iter,loss,grad_norm,step,evals``; row 0 is the starting point."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "loss", "grad_norm", "step", "evals"])
            w.writerow([0, repr(self.initial_loss), repr(self.initial_grad_norm), 0.0, 1])
            for r in self.records:
                w.writerow([r.iteration, repr(r.loss), repr(r.grad_norm), repr(r.step), r.evals])

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "status": self.status,
            "iterations": len(self.records),
            "function_evals": self.function_evals,
            "initial_loss": self.initial_loss,
            "final_loss": last.loss if last else self.initial_loss,
            "final_grad_norm": last.grad_norm if last else self.initial_grad_norm,
        }


def check_wolfe(rec: IterRecord, c1: float, c2: float) -> tuple[bool, bool]:
    """Re-check sufficient decrease and strong curvature from logged values."""
    armijo = rec.loss <= rec.prev_loss + c1 * rec.step * rec.slope0
    curvature = abs(rec.slope) <= c2 * abs(rec.slope0)
    return armijo, curvature


def two_loop_direction(g: np.ndarray, pairs) -> np.ndarray:
    """``-H g`` from stored ``(s, y, rho)`` pairs, oldest first."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _cubic_min(x1, f1, g1, x2, f2, g2, lo, hi):
    """Minimizer of the cubic through two points with slopes, clamped to ``[lo, hi]``."""
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    disc = d1 * d1 - g1 * g2
    if disc >= 0 and math.isfinite(disc):
        d2 = math.sqrt(disc)
        if x1 > x2:
            d2 = -d2
        denom = g2 - g1 + 2.0 * d2
        if denom != 0:
            x = x2 - (x2 - x1) * ((g2 + d2 - d1) / denom)
            if math.isfinite(x):
                return min(max(x, lo), hi)
    return 0.5 * (lo + hi)


def strong_wolfe(phi: Callable, f0: float, slope0: float, alpha: float, c1: float, c2: float, max_evals: int):
    """Bracketing line search followed by cubic zoom.

    ``phi(alpha)`` returns ``(f, g, slope)`` at ``theta + alpha d``. Returns
    ``(alpha, f, g, slope, evals)`` with ``alpha = None`` on failure.
    """
    evals = 0
    a_prev, f_prev, s_prev = 0.0, f0, slope0
    g_prev = None
    lo = hi = None
    while evals < max_evals:
        f, g, s = phi(alpha)
        evals += 1
        if not math.isfinite(f) or not math.isfinite(s):
            lo, hi = (a_prev, f_prev, s_prev, g_prev), (alpha, math.inf, math.nan, None)
            break
        if f > f0 + c1 * alpha * slope0 or (evals > 1 and f >= f_prev):
            lo, hi = (a_prev, f_prev, s_prev, g_prev), (alpha, f, s, g)
            break
        if abs(s) <= -c2 * slope0:
            return alpha, f, g, s, evals
        if s >= 0:
            lo, hi = (alpha, f, s, g), (a_prev, f_prev, s_prev, g_prev)
            break
        nxt = _cubic_min(a_prev, f_prev, s_prev, alpha, f, s, alpha + 0.01 * (alpha - a_prev), 10.0 * alpha)
        a_prev, f_prev, s_prev, g_prev = alpha, f, s, g
        alpha = nxt
    else:
        return None, None, None, None, evals

    # zoom: lo always satisfies sufficient decrease and has the lowest value seen
    while evals < max_evals:
        a_lo, f_lo, s_lo, _ = lo
        a_hi, f_hi, s_hi, _ = hi
        width = abs(a_hi - a_lo)
        if width < 1e-16 * max(1.0, abs(a_lo)):
            break
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 0.1 * width
        if math.isfinite(f_hi) and math.isfinite(s_hi):
            a = _cubic_min(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi, left + margin, right - margin)
        else:
            a = 0.5 * (a_lo + a_hi)
        f, g, s = phi(a)
        evals += 1
        if not math.isfinite(f) or f > f0 + c1 * a * slope0 or f >= f_lo:
            hi = (a, f, s, g)
            continue
        if abs(s) <= -c2 * slope0:
            return a, f, g, s, evals
        if s * (a_hi - a_lo) >= 0:
            hi = lo
        lo = (a, f, s, g)
    return None, None, None, None, evals


def minimize(objective: Callable, theta0, config: LbfgsConfig | None = None, callback: Callable | None = None):
    """Minimize ``objective(theta) -> (loss, grad)`` from ``theta0``.

    One iteration is one accepted step. Stops at ``max_iters`` (steps or
    evaluations, per ``config.count``), when the gradient norm drops below
    ``grad_tol``, or when the line search fails twice in a row (the second
    attempt restarts from steepest descent with an empty history).
    Returns ``(theta, trace)``.
    """
    cfg = config or LbfgsConfig()
    theta = np.array(theta0, dtype=float)
    f, g = objective(theta)
    g = np.asarray(g, dtype=float)
    trace = OptimTrace(function_evals=1)
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at the starting point")
    gnorm = float(np.linalg.norm(g))
    trace.initial_loss, trace.initial_grad_norm = float(f), gnorm
    pairs: deque = deque(maxlen=cfg.history)
    fresh = True

    def budget_left() -> bool:
        if cfg.count == "steps":
            return len(trace.records) < cfg.max_iters
        return trace.function_evals < cfg.max_iters

    while True:
        if gnorm < cfg.grad_tol:
            trace.status = "converged"
            break
        if not budget_left():
            trace.status = "max_iters"
            break
        d = two_loop_direction(g, list(pairs))
        slope0 = float(np.dot(g, d))
        if not slope0 < 0 or not math.isfinite(slope0):
            pairs.clear()
            fresh = True
            d = -g
            slope0 = -gnorm * gnorm
        alpha0 = cfg.initial_step * min(1.0, 1.0 / float(np.sum(np.abs(g)))) if fresh else cfg.initial_step

        def phi(a, d=d):
            fa, ga = objective(theta + a * d)
            ga = np.asarray(ga, dtype=float)
            return float(fa), ga, float(np.dot(ga, d))

        max_ls = cfg.max_linesearch_evals
        if cfg.count == "evals":
            max_ls = max(1, min(max_ls, cfg.max_iters - trace.function_evals))
        alpha, f_new, g_new, s_new, ev = strong_wolfe(phi, f, slope0, alpha0, cfg.wolfe_c1, cfg.wolfe_c2, max_ls)
        trace.function_evals += ev
        if alpha is None:
            if pairs and budget_left():
                log.debug("line search failed at iteration %d; restarting from steepest descent", len(trace.records))
                pairs.clear()
                fresh = True
                continue
            trace.status = "linesearch_failed"
            break
        s_vec = alpha * d
        y_vec = g_new - g
        sy = float(np.dot(s_vec, y_vec))
        if sy > 1e-10 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            pairs.append((s_vec, y_vec, 1.0 / sy))
        theta = theta + s_vec
        prev = f
        f, g = f_new, g_new
        gnorm = float(np.linalg.norm(g))
        fresh = False
        rec = IterRecord(len(trace.records) + 1, f, gnorm, alpha, ev, prev, slope0, s_new)
        trace.records.append(rec)
        if callback is not None:
            callback(rec, theta)
    return theta, trace
