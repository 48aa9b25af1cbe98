"""Benchmark problems: residual operators, conditions, exact solutions, sampling.

Problem formulas are written once against a field accessor ``F(var, *dirs)``
returning the output ``var`` or its partial derivatives along the named
input coordinates, e.g. ``F("u", "x", "x")`` for ``u_xx``. The scalar
reference route feeds it tape Scalars read off jets; the batched route feeds
it array nodes. Both only need ``+``, ``-`` and ``*``.

Input columns are ``(x, t)`` for the 1D problems and ``(x, y, t)`` for
Navier-Stokes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import Jet2, Scalar, Tape, jet_input

__all__ = [
    "PROBLEM_KINDS",
    "ProblemSpec",
    "CollocationSet",
    "ReferenceField",
    "ReferenceParseError",
    "make_problem",
    "sample_uniform",
    "sample_random",
    "test_grid",
    "residual",
    "ic_bc_terms",
    "analytic",
    "analytic_values",
    "analytic_jet",
    "load_reference_csv",
    "write_reference_csv",
    "manufactured_reference",
]

PROBLEM_KINDS = ("reaction", "wave", "convection", "navier_stokes")

_DEFAULTS = {
    "reaction": {"rho": 5.0},
    "wave": {"beta": 3.0, "c2": 4.0},
    "convection": {"beta": 50.0},
    "navier_stokes": {"lambda1": 1.0, "lambda2": 0.01, "continuity": 0.0},
}

_BOUNDS = {
    "reaction": {"x": (0.0, 2.0 * math.pi), "t": (0.0, 1.0)},
    "wave": {"x": (0.0, 1.0), "t": (0.0, 1.0)},
    "convection": {"x": (0.0, 2.0 * math.pi), "t": (0.0, 1.0)},
}


@dataclass
class ProblemSpec:
    kind: str
    constants: dict[str, float]
    bounds: dict[str, tuple[float, float]]

    @property
    def coords(self) -> tuple[str, ...]:
        return ("x", "y", "t") if self.kind == "navier_stokes" else ("x", "t")

    @property
    def outputs(self) -> tuple[str, ...]:
        return ("u", "v", "p") if self.kind == "navier_stokes" else ("u",)

    @property
    def in_dim(self) -> int:
        return len(self.coords)

    @property
    def out_dim(self) -> int:
        return len(self.outputs)

    @property
    def periodic(self) -> bool:
        return self.kind in ("reaction", "convection")

    @property
    def has_analytic(self) -> bool:
        return self.kind != "navier_stokes"

    # derivative requests: (first-order directions, second-order pairs)

    def residual_derivatives(self) -> tuple[list[str], list[tuple[str, str]]]:
        if self.kind == "reaction":
            return ["t"], []
        if self.kind == "convection":
            return ["x", "t"], []
        if self.kind == "wave":
            return ["x", "t"], [("x", "x"), ("t", "t")]
        return ["x", "y", "t"], [("x", "x"), ("y", "y")]

    def initial_derivatives(self) -> tuple[list[str], list[tuple[str, str]]]:
        return (["t"], []) if self.kind == "wave" else ([], [])

    # formulas

    def residuals(self, F: Callable) -> list:
        c = self.constants
        if self.kind == "reaction":
            u = F("u")
            return [F("u", "t") - c["rho"] * (u * (1.0 - u))]
        if self.kind == "convection":
            return [F("u", "t") + c["beta"] * F("u", "x")]
        if self.kind == "wave":
            return [F("u", "t", "t") - c["c2"] * F("u", "x", "x")]
        l1, l2 = c["lambda1"], c["lambda2"]
        u, v = F("u"), F("v")
        r_u = F("u", "t") + l1 * (u * F("u", "x") + v * F("u", "y")) + F("p", "x") - l2 * (F("u", "x", "x") + F("u", "y", "y"))
        r_v = F("v", "t") + l1 * (u * F("v", "x") + v * F("v", "y")) + F("p", "y") - l2 * (F("v", "x", "x") + F("v", "y", "y"))
        out = [r_u, r_v]
        if c.get("continuity"):
            out.append(F("u", "x") + F("v", "y"))
        return out

    def initial_target(self, x):
        """Initial profile ``u(x, 0)``; accepts floats or arrays."""
        if self.kind == "reaction":
            return np.exp(-((x - np.pi) ** 2) / (2.0 * (np.pi / 4.0) ** 2))
        if self.kind == "wave":
            return np.sin(np.pi * x) + 0.5 * np.sin(self.constants["beta"] * np.pi * x)
        if self.kind == "convection":
            return np.sin(x)
        raise ValueError("navier_stokes has no initial profile; it is fit to reference data")

    def initial_errors(self, F: Callable, x) -> list:
        errs = [F("u") - self.initial_target(x)]
        if self.kind == "wave":
            errs.append(F("u", "t"))
        return errs

    def boundary_errors(self, F_left: Callable, F_right: Callable) -> list:
        if self.periodic:
            return [F_left("u") - F_right("u")]
        if self.kind == "wave":
            return [F_left("u"), F_right("u")]
        raise ValueError("navier_stokes has no boundary term")

    def data_errors(self, F: Callable, targets) -> list:
        """Velocity data fit for Navier-Stokes; pressure is never fit."""
        return [F("u") - targets[0], F("v") - targets[1]]


def make_problem(kind: str, bounds: dict | None = None, **overrides) -> ProblemSpec:
    kind = kind.lower().replace("-", "_")
    if kind in ("ns", "navierstokes"):
        kind = "navier_stokes"
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem {kind!r}; expected one of {PROBLEM_KINDS}")
    consts = dict(_DEFAULTS[kind])
    for k, v in overrides.items():
        if k not in consts:
            raise ValueError(f"{kind} has no constant {k!r}")
        consts[k] = float(v)
    if bounds is None:
        if kind == "navier_stokes":
            raise ValueError("navier_stokes bounds come from the reference data")
        bounds = dict(_BOUNDS[kind])
    return ProblemSpec(kind, consts, dict(bounds))


@dataclass
class ReferenceField:
    """Reference records ``(t, x, y, u, v, p)`` as column arrays."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def bounds(self) -> dict[str, tuple[float, float]]:
        return {k: (float(getattr(self, k).min()), float(getattr(self, k).max())) for k in ("x", "y", "t")}

    def subset(self, mask) -> ReferenceField:
        return ReferenceField(*(getattr(self, k)[mask] for k in ("t", "x", "y", "u", "v", "p")))

    def split_final_time(self) -> tuple[ReferenceField, ReferenceField]:
        """Training records and the held-out records at the last time instance."""
        t_max = self.t.max()
        last = self.t == t_max
        return self.subset(~last), self.subset(last)

    def inputs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y, self.t])


class ReferenceParseError(ValueError):
    def __init__(self, reason: str, message: str, row: int | None = None):
        self.reason = reason
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class MissingColumnsError(ReferenceParseError):
    pass


class NonFiniteError(ReferenceParseError):
    pass


class EmptyReferenceError(ReferenceParseError):
    pass


_REF_COLS = ("t", "x", "y", "u", "v", "p")


def load_reference_csv(path) -> ReferenceField:
    """Parse a ``t,x,y,u,v,p`` CSV. Row numbers in errors count the header as row 1."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyReferenceError("empty", f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in _REF_COLS if c not in header]
        if missing:
            raise MissingColumnsError("missing_columns", f"{path}: missing columns {missing}", row=1)
        idx = [header.index(c) for c in _REF_COLS]
        rows = []
        seen = set()
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                vals = [float(rec[i]) for i in idx]
            except (ValueError, IndexError) as exc:
                raise ReferenceParseError("malformed", f"cannot parse record {rec!r}", row=rownum) from exc
            if not all(math.isfinite(v) for v in vals):
                bad = [c for c, v in zip(_REF_COLS, vals) if not math.isfinite(v)]
                raise NonFiniteError("non_finite", f"non-finite value in column(s) {bad}", row=rownum)
            key = tuple(vals[:3])
            if key in seen:
                raise ReferenceParseError("duplicate", f"duplicate (t,x,y) key {key}", row=rownum)
            seen.add(key)
            rows.append(vals)
    if not rows:
        raise EmptyReferenceError("empty", f"{path}: no data rows")
    arr = np.array(rows)
    return ReferenceField(*(arr[:, k].copy() for k in range(6)))


def write_reference_csv(ref: ReferenceField, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_REF_COLS)
        for row in zip(ref.t, ref.x, ref.y, ref.u, ref.v, ref.p):
            w.writerow([repr(float(v)) for v in row])


def manufactured_reference(nx: int = 8, ny: int = 6, times: Sequence[float] = (0.0, 0.5, 1.0), nu: float = 0.01) -> ReferenceField:
    """Smooth decaying vortex on [0,2]x[0,1]; cheap stand-in for benchmark data."""
    xs = np.linspace(0.0, 2.0, nx)
    ys = np.linspace(0.0, 1.0, ny)
    T, X, Y = np.meshgrid(np.asarray(times, dtype=float), xs, ys, indexing="ij")
    decay = np.exp(-2.0 * nu * T)
    u = -np.cos(X) * np.sin(Y) * decay
    v = np.sin(X) * np.cos(Y) * decay
    p = -0.25 * (np.cos(2 * X) + np.cos(2 * Y)) * decay**2
    return ReferenceField(*(a.ravel() for a in (T, X, Y, u, v, p)))


@dataclass
class CollocationSet:
    """Training points. Arrays have one row per point and one column per input coordinate.

    ``boundary`` holds ``(left, right)`` point arrays paired row by row.
    ``data`` holds velocity targets ``(u, v)`` for Navier-Stokes interior points.
    """

    interior: np.ndarray
    initial: np.ndarray | None = None
    boundary: tuple[np.ndarray, np.ndarray] | None = None
    data: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_residual(self) -> int:
        return self.interior.shape[0]

    @property
    def n_initial(self) -> int:
        return 0 if self.initial is None else self.initial.shape[0]

    @property
    def n_boundary(self) -> int:
        return 0 if self.boundary is None else self.boundary[0].shape[0]


def sample_uniform(problem: ProblemSpec, nx: int, nt: int) -> CollocationSet:
    """Tensor grid interior, ``nx`` initial points, ``nt`` boundary pairs."""
    if problem.kind == "navier_stokes":
        raise ValueError("navier_stokes points are drawn from reference data; use sample_random")
    if nx < 2 or nt < 2:
        raise ValueError("nx and nt must be >= 2")
    (x0, x1), (t0, t1) = problem.bounds["x"], problem.bounds["t"]
    xs = np.linspace(x0, x1, nx)
    ts = np.linspace(t0, t1, nt)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    interior = np.column_stack([X.ravel(), T.ravel()])
    initial = np.column_stack([xs, np.full(nx, t0)])
    left = np.column_stack([np.full(nt, x0), ts])
    right = np.column_stack([np.full(nt, x1), ts])
    return CollocationSet(interior, initial, (left, right), meta={"sampler": "uniform", "nx": nx, "nt": nt})


def test_grid(problem: ProblemSpec, nx: int = 101, nt: int = 101) -> np.ndarray:
    return sample_uniform(problem, nx, nt).interior


test_grid.__test__ = False  # keep pytest from collecting it when imported into test modules


def sample_random(problem: ProblemSpec, n: int, seed: int, reference: ReferenceField | None = None) -> CollocationSet:
    """Random training points.

    Navier-Stokes: ``n`` reference records drawn without replacement, with
    their velocities as data targets. 1D problems: ``n`` interior points and
    ``n`` initial/boundary points uniform in the domain.
    """
    rng = np.random.default_rng(seed)
    if problem.kind == "navier_stokes":
        if reference is None:
            raise ValueError("navier_stokes sampling needs a ReferenceField")
        if n > len(reference):
            raise ValueError(f"requested {n} records but only {len(reference)} are available")
        pick = rng.permutation(len(reference))[:n]
        sub = reference.subset(pick)
        return CollocationSet(sub.inputs(), data=np.column_stack([sub.u, sub.v]), meta={"sampler": "random", "n": n, "seed": seed})
    (x0, x1), (t0, t1) = problem.bounds["x"], problem.bounds["t"]
    interior = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(t0, t1, n)])
    initial = np.column_stack([rng.uniform(x0, x1, n), np.full(n, t0)])
    ts = rng.uniform(t0, t1, n)
    left = np.column_stack([np.full(n, x0), ts])
    right = np.column_stack([np.full(n, x1), ts])
    return CollocationSet(interior, initial, (left, right), meta={"sampler": "random", "n": n, "seed": seed})


# exact solutions


def analytic_values(problem: ProblemSpec, points) -> np.ndarray:
    if not problem.has_analytic:
        raise ValueError("navier_stokes has no closed-form solution")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, t = pts[:, 0], pts[:, 1]
    c = problem.constants
    if problem.kind == "reaction":
        h = problem.initial_target(x)
        # h e / (h e + 1 - h) rewritten with expm1 so that t = 0 returns h bit for bit
        m = np.expm1(c["rho"] * t)
        return h * (1.0 + m) / (1.0 + h * m)
    if problem.kind == "wave":
        b = c["beta"]
        return np.sin(np.pi * x) * np.cos(2 * np.pi * t) + 0.5 * np.sin(b * np.pi * x) * np.cos(2 * b * np.pi * t)
    return np.sin(x - c["beta"] * t)


def analytic(problem: ProblemSpec, point) -> float:
    return float(analytic_values(problem, [point])[0])


def analytic_jet(problem: ProblemSpec, inputs: Sequence[Jet2]) -> list[Jet2]:
    """The exact solution as a jet graph, usable wherever a bound model is."""
    x, t = inputs
    c = problem.constants
    if problem.kind == "reaction":
        h = ((x - math.pi).square() * (-1.0 / (2.0 * (math.pi / 4.0) ** 2))).exp()
        e = h * (t * c["rho"]).exp()
        return [e / (e + 1.0 - h)]
    if problem.kind == "wave":
        b = c["beta"]
        u = (x * math.pi).sin() * (t * (2 * math.pi)).cos() + ((x * (b * math.pi)).sin() * (t * (2 * b * math.pi)).cos()).scale(0.5)
        return [u]
    if problem.kind == "convection":
        return [(x - t * c["beta"]).sin()]
    raise ValueError("navier_stokes has no closed-form solution")


# scalar reference route


def _jet_fields(problem: ProblemSpec, outs: Sequence[Jet2]) -> Callable:
    names = problem.outputs
    coords = problem.coords

    def F(var: str, *dirs: str):
        jet = outs[names.index(var)]
        if not dirs:
            return jet.val
        if len(dirs) == 1:
            return jet.grad[coords.index(dirs[0])]
        return jet.hess_at(coords.index(dirs[0]), coords.index(dirs[1]))

    return F


def _eval_point(problem: ProblemSpec, model, point, tape: Tape):
    from .network import BoundMlp, forward

    dim = problem.in_dim
    jets = [jet_input(tape, float(point[k]), k, dim) for k in range(dim)]
    if isinstance(model, BoundMlp):
        outs = forward(model, jets)
    else:
        outs = model(jets)
    return _jet_fields(problem, outs)


def _tape_of(model, tape):
    if tape is not None:
        return tape
    t = getattr(model, "tape", None)
    if t is None:
        raise ValueError("pass a tape when the model is a plain jet function")
    return t


def residual(problem: ProblemSpec, model, point, tape: Tape | None = None):
    """PDE residual at one point: a Scalar, or a list of Scalars for Navier-Stokes.

    ``model`` is a :class:`~wavepinn.network.BoundMlp` or any callable mapping
    input jets to output jets (for instance ``lambda j: analytic_jet(problem, j)``).
    """
    tape = _tape_of(model, tape)
    res = problem.residuals(_eval_point(problem, model, point, tape))
    return res if problem.kind == "navier_stokes" else res[0]


def ic_bc_terms(problem: ProblemSpec, model, colloc: CollocationSet, tape: Tape | None = None) -> dict[str, list[Scalar]]:
    """Per-point squared discrepancies for the initial (or data) and boundary groups."""
    tape = _tape_of(model, tape)
    initial, boundary = [], []
    if problem.kind == "navier_stokes":
        for pt, target in zip(colloc.interior, colloc.data):
            errs = problem.data_errors(_eval_point(problem, model, pt, tape), target)
            initial.append(_sum_squares(errs))
        return {"initial": initial, "boundary": boundary}
    for pt in colloc.initial:
        errs = problem.initial_errors(_eval_point(problem, model, pt, tape), float(pt[0]))
        initial.append(_sum_squares(errs))
    left, right = colloc.boundary
    for pl, pr in zip(left, right):
        errs = problem.boundary_errors(_eval_point(problem, model, pl, tape), _eval_point(problem, model, pr, tape))
        boundary.append(_sum_squares(errs))
    return {"initial": initial, "boundary": boundary}


def _sum_squares(errs):
    total = None
    for e in errs:
        sq = e.square() if isinstance(e, Scalar) else e * e
        total = sq if total is None else total + sq
    return total
