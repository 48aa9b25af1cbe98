"""Experiment orchestration: train one (problem, activation) pair and report.

A run writes ``report.json``, ``loss_history.csv``, ``prediction_grid.csv``
and ``model.json`` (checkpoint) into its output directory. ``aggregate``
collects reports from several runs into one comparison table.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import kernels
from .activations import parse_activation
from .batched import VTape, network_fields
from .loss import LossWeights, loss_and_grad, make_objective
from .metrics import evaluate
from .network import MlpConfig, MlpModel, init_model, save_checkpoint
from .optimizer import LbfgsConfig, OptimTrace, minimize
from .pde import PROBLEM_KINDS, ProblemSpec, ReferenceField, ReferenceParseError, analytic_values, load_reference_csv, make_problem, sample_random, sample_uniform, test_grid

__all__ = [
    "ConfigError",
    "RunConfig",
    "TrainReport",
    "SCALE_PRESETS",
    "apply_scale",
    "scale_preset",
    "build_problem",
    "predict",
    "run_experiment",
    "evaluate_model",
    "aggregate",
    "AggregateResult",
    "AGGREGATE_COLUMNS",
]

log = logging.getLogger(__name__)

SCALE_PRESETS = {
    "paper": {"hidden_layers": 4, "hidden_width": 512, "iterations": 1000, "nx": 101, "nt": 101},
    "desk": {"hidden_layers": 4, "hidden_width": 64, "iterations": 500, "nx": 51, "nt": 51},
}

AGGREGATE_COLUMNS = ("problem", "activation", "loss", "rmae", "rrmse", "wall_s")


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    """Everything that determines a run.

    ``nx``/``nt`` set the uniform training grid of the 1D problems (interior
    ``nx*nt``, ``nx`` initial points, ``nt`` boundary pairs); ``n_random`` is
    the number of reference records drawn for Navier-Stokes. ``constants``
    overrides problem constants, e.g. ``{"beta": 10}``.
    """

    problem: str = "reaction"
    activation: str = "tanh"
    hidden_layers: int = 4
    hidden_width: int = 512
    iterations: int = 1000
    seed: int = 5
    weight_residual: float = 1.0
    weight_boundary: float = 1.0
    weight_initial: float = 1.0
    nx: int = 101
    nt: int = 101
    n_random: int = 2500
    gabor_omega_init: int = 3
    reference_data: str | None = None
    output_dir: str = "runs/run"
    constants: dict = field(default_factory=dict)
    eval_nx: int = 101
    eval_nt: int = 101
    history: int = 10
    iteration_count: str = "steps"

    def __post_init__(self):
        self.problem = str(self.problem).lower()
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {', '.join(PROBLEM_KINDS)}")
        try:
            parse_activation(self.activation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.gabor_omega_init not in (3, 5):
            raise ConfigError("gabor_omega_init must be 3 or 5")
        if self.problem == "navier_stokes" and not self.reference_data:
            raise ConfigError("navier_stokes needs reference_data")
        for name in ("hidden_layers", "hidden_width", "iterations", "n_random", "history"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("nx", "nt", "eval_nx", "eval_nt"):
            if int(getattr(self, name)) < 2:
                raise ConfigError(f"{name} must be >= 2")
        if min(self.weight_residual, self.weight_boundary, self.weight_initial) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.iteration_count not in ("steps", "evals"):
            raise ConfigError("iteration_count must be 'steps' or 'evals'")
        self.constants = {str(k): float(v) for k, v in dict(self.constants).items()}

    @property
    def w_variant(self) -> bool:
        return parse_activation(self.activation).w_variant

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.weight_residual, self.weight_boundary, self.weight_initial)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        """Build from a flat dict. A ``scale`` key applies that preset first."""
        d = dict(d)
        scale = d.pop("scale", None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        base = scale_preset(scale)
        base.update(d)
        try:
            return cls(**base)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> RunConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)


def scale_preset(scale: str | None) -> dict:
    if scale is None:
        return {}
    if scale not in SCALE_PRESETS:
        raise ConfigError(f"unknown scale {scale!r}; expected one of {', '.join(SCALE_PRESETS)}")
    return dict(SCALE_PRESETS[scale])


def apply_scale(config: RunConfig, scale: str) -> RunConfig:
    """Copy of ``config`` with a scale preset's fields substituted."""
    return replace(config, **scale_preset(scale))


@dataclass
class TrainReport:
    config: dict
    status: str
    loss: dict | None
    eval: dict | None
    activation_coefficients: list[dict]
    trace: dict
    wall_s: float
    backend: str = kernels.BACKEND

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


def build_problem(config: RunConfig, reference: ReferenceField | None = None) -> ProblemSpec:
    try:
        if config.problem == "navier_stokes":
            if reference is None:
                raise ConfigError("navier_stokes needs a loaded reference field")
            return make_problem("navier_stokes", bounds=reference.bounds, **config.constants)
        return make_problem(config.problem, **config.constants)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_reference(config: RunConfig) -> ReferenceField:
    try:
        return load_reference_csv(config.reference_data)
    except (OSError, ReferenceParseError) as exc:
        raise ConfigError(f"cannot read reference data: {exc}") from None


def predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Network outputs at the rows of ``X``, shape ``(N, out_dim)``."""
    names = tuple(f"o{k}" for k in range(model.config.out_dim))
    coords = tuple(f"c{k}" for k in range(model.config.in_dim))
    tape = VTape(model.parameter_count)
    F = network_fields(tape, model, X, coords, names)
    out = np.column_stack([F(n).value for n in names])
    tape.release()
    return out


def evaluate_model(model: MlpModel, problem: ProblemSpec, nx: int = 101, nt: int = 101, reference: ReferenceField | None = None):
    """Evaluate on the test grid (1D) or held-out final-time pressure (Navier-Stokes).

    Returns ``(EvalResult, header, rows)`` where ``rows`` is the prediction
    grid table matching ``header``.
    """
    if problem.kind == "navier_stokes":
        if reference is None:
            raise ConfigError("navier_stokes evaluation needs reference data")
        _, test = reference.split_final_time()
        X = test.inputs()
        p_pred = predict(model, X)[:, 2]
        # raw pressure, no constant-shift correction
        res = evaluate(p_pred, test.p)
        rows = np.column_stack([test.x, test.y, p_pred, test.p, np.abs(p_pred - test.p)])
        return res, ("x", "y", "p_pred", "p_ref", "abs_err"), rows
    X = test_grid(problem, nx, nt)
    u_pred = predict(model, X)[:, 0]
    u_ref = analytic_values(problem, X)
    res = evaluate(u_pred, u_ref)
    rows = np.column_stack([X[:, 0], X[:, 1], u_pred, u_ref, np.abs(u_pred - u_ref)])
    return res, ("x", "t", "u_pred", "u_exact", "abs_err"), rows


def _write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def _finite_tree(obj) -> bool:
    if isinstance(obj, float):
        return math.isfinite(obj)
    if isinstance(obj, dict):
        return all(_finite_tree(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return all(_finite_tree(v) for v in obj)
    return True


def run_experiment(config: RunConfig, write: bool = True) -> TrainReport:
    """Train, evaluate and (optionally) write the run artifacts."""
    t0 = time.perf_counter()
    reference = _load_reference(config) if config.problem == "navier_stokes" else None
    problem = build_problem(config, reference)
    if problem.kind == "navier_stokes":
        train, _ = reference.split_final_time()
        if config.n_random > len(train):
            raise ConfigError(f"n_random={config.n_random} exceeds the {len(train)} training records")
        colloc = sample_random(problem, config.n_random, config.seed, reference=train)
    else:
        colloc = sample_uniform(problem, config.nx, config.nt)

    model = init_model(
        MlpConfig(
            in_dim=problem.in_dim,
            out_dim=problem.out_dim,
            hidden_layers=config.hidden_layers,
            hidden_width=config.hidden_width,
            activation=config.activation,
            seed=config.seed,
            gabor_omega_init=config.gabor_omega_init,
        )
    )
    objective = make_objective(model, problem, colloc, config.weights)
    lcfg = LbfgsConfig(max_iters=config.iterations, history=config.history, count=config.iteration_count)
    log.info("training %s/%s: %d parameters, %d residual points", config.problem, config.activation, model.parameter_count, colloc.n_residual)

    status = None
    try:
        theta, trace = minimize(objective, model.get_flat(), lcfg)
        model.set_flat(theta)
        status = trace.status
    except ValueError as exc:
        # raised when the starting loss is not finite
        log.warning("training diverged: %s", exc)
        trace = OptimTrace(status="diverged")
        status = "diverged"

    loss_bd = None
    ev = None
    header, rows = None, None
    if status != "diverged":
        _, _, bd = loss_and_grad(model, problem, colloc, config.weights)
        loss_bd = bd.to_dict()
        if not _finite_tree(loss_bd):
            status = "diverged"
    if status != "diverged":
        res, header, rows = evaluate_model(model, problem, config.eval_nx, config.eval_nt, reference)
        ev = res.to_dict()
        if not _finite_tree(ev):
            status, ev = "diverged", None

    report = TrainReport(
        config=config.to_dict(),
        status=status,
        loss=loss_bd,
        eval=ev,
        activation_coefficients=[a.effective() for a in model.activations],
        trace=trace.summary(),
        wall_s=time.perf_counter() - t0,
    )
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write(out / "report.json")
        trace.write_csv(out / "loss_history.csv")
        if rows is not None:
            _write_table(out / "prediction_grid.csv", header, rows)
        if status != "diverged":
            save_checkpoint(model, out / "model.json")
    return report


# aggregation


@dataclass
class AggregateResult:
    rows: list[dict]
    warnings: list[str]
    duplicates: list[tuple[str, str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in self.rows:
            w.writerow([r[c] for c in AGGREGATE_COLUMNS])
        return buf.getvalue()


def _num(v):
    return float("nan") if v is None else float(v)


def aggregate(run_dirs) -> AggregateResult:
    """Collect ``report.json`` from each directory into one table.

    Rows are sorted by ``(problem, rrmse)``; diverged runs sort last within
    their problem. Malformed or missing reports are skipped with a warning.
    Duplicate ``(problem, activation)`` pairs are all kept and listed in
    ``duplicates`` (each row also gets ``duplicate = True``).
    """
    rows, warnings = [], []
    for d in run_dirs:
        path = Path(d) / "report.json" if Path(d).is_dir() else Path(d)
        try:
            doc = json.loads(path.read_text())
            cfg = doc["config"]
            loss = doc.get("loss") or {}
            ev = doc.get("eval") or {}
            row = {
                "problem": str(cfg["problem"]),
                "activation": str(cfg["activation"]),
                "loss": _num(loss.get("total")),
                "rmae": _num(ev.get("rmae")),
                "rrmse": _num(ev.get("rrmse")),
                "wall_s": _num(doc["wall_s"]),
                "source": str(path),
            }
        except (OSError, ValueError, KeyError, TypeError) as exc:
            warnings.append(f"skipped {path}: {exc.__class__.__name__}: {exc}")
            continue
        rows.append(row)

    def key(r):
        e = r["rrmse"]
        return (r["problem"], math.isnan(e), e if not math.isnan(e) else 0.0, r["activation"])

    rows.sort(key=key)
    counts: dict[tuple[str, str], int] = {}
    for r in rows:
        counts[(r["problem"], r["activation"])] = counts.get((r["problem"], r["activation"]), 0) + 1
    dups = sorted(k for k, n in counts.items() if n > 1)
    for r in rows:
        r["duplicate"] = (r["problem"], r["activation"]) in dups
    for p, a in dups:
        warnings.append(f"duplicate runs for ({p}, {a}); all rows kept")
    return AggregateResult(rows, warnings, dups)
