"""Composite training objective.

``total = w_R * L_R + w_B * L_B + w_I * L_I`` where each component is the
mean over its points of the per-point squared error norm. For Navier-Stokes
the velocity data fit occupies the initial-condition slot and there is no
boundary group.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .autodiff import Scalar, Tape
from .batched import VTape, network_fields, vmean
from .network import MlpModel, bind
from .pde import CollocationSet, ProblemSpec, ic_bc_terms, residual

__all__ = ["LossWeights", "LossBreakdown", "total_loss", "loss_and_grad", "make_objective"]


@dataclass(frozen=True)
class LossWeights:
    residual: float = 1.0
    boundary: float = 1.0
    initial: float = 1.0

    def __post_init__(self):
        if min(self.residual, self.boundary, self.initial) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossBreakdown:
    total: float
    residual_mse: float
    boundary_mse: float
    initial_mse: float
    initial_is_data: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _check_sets(problem: ProblemSpec, colloc: CollocationSet) -> None:
    if colloc.n_residual == 0:
        raise ValueError("no residual points")
    if problem.kind == "navier_stokes":
        if colloc.data is None or colloc.data.shape[0] != colloc.n_residual:
            raise ValueError("navier_stokes needs velocity data for every training point")
        return
    if colloc.n_initial == 0:
        raise ValueError("no initial points")
    if colloc.n_boundary == 0:
        raise ValueError("no boundary points")


def _mean(terms: list[Scalar], tape: Tape) -> Scalar:
    if not terms:
        return tape.zero()
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc * (1.0 / len(terms))


def total_loss(model: MlpModel, problem: ProblemSpec, colloc: CollocationSet, weights: LossWeights = LossWeights(), tape: Tape | None = None):
    """Loss on the scalar tape, summed point by point in input order.

    ``model`` may also be a plain callable mapping input jets to output
    jets, such as a closed-form solution graph.

    Returns ``(loss, breakdown)``; ``loss.tape`` holds the model parameters
    in flat order, so ``backward(loss.tape, loss)`` is the flat gradient.
    Meant for small models and checks; training uses :func:`loss_and_grad`.
    """
    _check_sets(problem, colloc)
    tape = Tape() if tape is None else tape
    bound = bind(model, tape) if isinstance(model, MlpModel) else model
    res_terms = []
    for pt in colloc.interior:
        r = residual(problem, bound, pt, tape)
        rs = r if isinstance(r, list) else [r]
        acc = rs[0].square()
        for extra in rs[1:]:
            acc = acc + extra.square()
        res_terms.append(acc)
    cond = ic_bc_terms(problem, bound, colloc, tape)
    l_r = _mean(res_terms, tape)
    l_b = _mean(cond["boundary"], tape)
    l_i = _mean(cond["initial"], tape)
    loss = l_r * weights.residual + l_b * weights.boundary + l_i * weights.initial
    bd = LossBreakdown(loss.primal, l_r.primal, l_b.primal, l_i.primal, problem.kind == "navier_stokes")
    return loss, bd


def _sum_sq(errs):
    acc = errs[0] * errs[0]
    for e in errs[1:]:
        acc = acc + e * e
    return acc


def loss_and_grad(model: MlpModel, problem: ProblemSpec, colloc: CollocationSet, weights: LossWeights = LossWeights()):
    """Loss value, flat parameter gradient and breakdown via the batched engine."""
    _check_sets(problem, colloc)
    tape = VTape(model.parameter_count)
    coords, outs = problem.coords, problem.outputs
    dirs, pairs = problem.residual_derivatives()
    F = network_fields(tape, model, colloc.interior, coords, outs, dirs, pairs)
    l_r = vmean(_sum_sq(problem.residuals(F)))
    if problem.kind == "navier_stokes":
        l_i = vmean(_sum_sq(problem.data_errors(F, (colloc.data[:, 0], colloc.data[:, 1]))))
        l_b = None
    else:
        idirs, ipairs = problem.initial_derivatives()
        FI = network_fields(tape, model, colloc.initial, coords, outs, idirs, ipairs)
        l_i = vmean(_sum_sq(problem.initial_errors(FI, colloc.initial[:, 0])))
        left, right = colloc.boundary
        # one pass over both sides keeps the batch large
        FB = network_fields(tape, model, np.vstack([left, right]), coords, outs)
        nb = left.shape[0]
        u = FB("u")
        side = _Split(u, nb)
        l_b = vmean(_sum_sq(problem.boundary_errors(side.left, side.right)))
    total = l_r * weights.residual + l_i * weights.initial
    if l_b is not None:
        total = total + l_b * weights.boundary
    grad = tape.backward(total).copy()
    bd = LossBreakdown(
        float(total.value),
        float(l_r.value),
        0.0 if l_b is None else float(l_b.value),
        float(l_i.value),
        problem.kind == "navier_stokes",
    )
    tape.release()
    return bd.total, grad, bd


class _Split:
    """Row split of a stacked boundary batch into left/right field accessors."""

    def __init__(self, node, n):
        tape = node.tape
        full = node.value
        shape = full.shape

        def part(sl):
            def vjp(g):
                out = np.zeros(shape)
                out[sl] = g
                return (out,)

            return tape.push(full[sl], (node.index,), vjp)

        lu, ru = part(slice(0, n)), part(slice(n, None))
        self.left = lambda var, *d: _only_value(var, d, lu)
        self.right = lambda var, *d: _only_value(var, d, ru)


def _only_value(var, dirs, node):
    if var != "u" or dirs:
        raise KeyError(f"boundary terms only read u, not {var} {dirs}")
    return node


def make_objective(model: MlpModel, problem: ProblemSpec, colloc: CollocationSet, weights: LossWeights = LossWeights()) -> Callable:
    """Closure ``theta -> (loss, grad)`` that writes ``theta`` into ``model``.

    The last breakdown is kept on the closure as ``objective.last``.
    """

    def objective(theta: np.ndarray):
        model.set_flat(theta)
        val, grad, bd = loss_and_grad(model, problem, colloc, weights)
        objective.last = bd
        return val, grad

    objective.last = None
    return objective
