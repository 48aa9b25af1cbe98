"""Independent oracles and shared checks for the test suite.

The mpmath closed forms below are written from the formulas directly and do
not import package code, so they serve as an independent reference. Numeric
derivatives come from ``mpmath.diff`` at 30 digits, a central-difference
scheme whose error is far below the float64 tolerances used in the tests.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from wavepinn import activations as act
from wavepinn.autodiff import Tape, backward, grad_check, jet_input
from wavepinn.loss import total_loss
from wavepinn.network import MlpConfig, init_model
from wavepinn.pde import make_problem, manufactured_reference, sample_random, sample_uniform

mp.mp.dps = 30

SAMPLE_X = (-3.0, -1.0, -0.1, 0.1, 1.0, 3.0)

# frozen high-precision values (mpmath, 30 digits)
SOFTPLUS_0 = 0.693147180559945309417232121458
SOFTPLUS_1 = 1.31326168751822283404899549497
SOFTGAUSS_AT_1 = 0.280174832492443077979453583065  # tanh(1) exp(-1)
SOFTGABOR_AT_1 = -0.461930205845136303195559068893  # tanh(1) exp(-1/2) cos(pi)
CONVECTION_IC_MEAN = 0.49504950495049504950495049505  # mean sin^2 over 101 points of [0, 2pi]
PARAM_COUNT_2_4x512_1 = 790017


def _h(n, x):
    return {1: 2 * x, 2: 4 * x**2 - 2, 3: 8 * x**3 - 12 * x, 4: 16 * x**4 - 48 * x**2 + 12}[n]


CATALOG_MP = {
    "mexican_hat": (lambda x: (1 - x**2) * mp.exp(-(x**2) / 2), act.mexican_hat),
    "morlet": (lambda x: mp.cos(5 * x) * mp.exp(-(x**2) / 2), act.morlet),
    "gaussian_wavelet": (lambda x: -x * mp.exp(-(x**2) / 2), act.gaussian_wavelet),
    "gaussian": (lambda x: mp.exp(-(x**2) / 2), act.gaussian),
    "gabor_real": (lambda x: mp.exp(-(x**2) / 2) * mp.cos(3 * x), act.gabor_real),
    "softplus": (lambda x: mp.log(1 + mp.exp(x)), act.softplus),
    "tanh": (lambda x: mp.tanh(x), act.tanh),
    "tanh_gauss_product": (lambda x: mp.tanh(x) * mp.exp(-(x**2) / 2), lambda j: j.tanh() * (j.square() * -0.5).exp()),
}
for _n in range(1, 5):
    CATALOG_MP[f"hermite_function_{_n}"] = (
        (lambda n: lambda x: _h(n, x) * mp.exp(-(x**2) / 2))(_n),
        (lambda n: lambda j: act.hermite_function(n, j))(_n),
    )


def activation_mp(name: str, coef: dict):
    """mpmath closed form of an activation with effective coefficients ``coef``."""
    kind = act.parse_activation(name)
    fam = kind.family
    c = {k: mp.mpf(v) for k, v in coef.items()}
    if fam == "tanh":
        return mp.tanh
    if fam == "softmextanh":
        return lambda x: mp.tanh(c["beta"] * x) * (1 - c["gamma"] * x**2) * mp.exp(-c["alpha"] * x**2)
    if fam == "softgausstanh":
        return lambda x: mp.tanh(c["beta"] * x) * mp.exp(-c["alpha"] * x**2)
    if fam == "softhertanh":
        return lambda x: mp.tanh(c["beta"] * x) * _h(kind.order, x) * mp.exp(-c["alpha"] * x**2)
    if fam in ("softmortanh", "softgabortanh"):
        return lambda x: mp.tanh(c["beta"] * x) * mp.exp(-(x**2) / (2 * c["sigma"] ** 2)) * mp.cos(c["omega"] * x)
    raise ValueError(name)


def ten_variants() -> list[str]:
    """Five Soft* families, each with trainable and frozen beta (Hermite at order 2)."""
    base = ["softmextanh", "softmortanh", "softgausstanh", "softgabortanh", "softher2tanh"]
    return base + [b + "w" for b in base]


def jet_derivs(fn, x: float) -> tuple[float, float, float]:
    tape = Tape()
    j = fn(jet_input(tape, x, 0, 1))
    return j.val.primal, j.grad[0].primal, j.hess[0].primal


def rel_err(a: float, ref: float) -> float:
    return abs(a - ref) / max(abs(ref), 1e-12)


def jet_fd_error(fn_jet, fn_mp, xs=SAMPLE_X) -> float:
    """Worst relative error of jet value/first/second derivative vs the mpmath oracle.

    Relative to ``max(|ref|, 1)`` so values that are exact zeros of a
    derivative do not blow up the ratio.
    """
    worst = 0.0
    for x in xs:
        got = jet_derivs(fn_jet, x)
        for k in range(3):
            ref = float(mp.diff(fn_mp, mp.mpf(x), k))
            worst = max(worst, abs(got[k] - ref) / max(abs(ref), 1.0))
    return worst


def activation_jet_error(name: str) -> float:
    """Jet-vs-oracle error of an activation at its initial coefficients."""
    spec = act.init_activation(name)
    eff = spec.effective()

    def fn_jet(j):
        tape = j.tape
        return act.eval_activation(spec.bind(tape), j)

    return jet_fd_error(fn_jet, activation_mp(name, eff))


def small_problem_setup(kind: str, activation: str = "softgabortanh", width: int = 8, seed: int = 5):
    """Width-``width`` two-hidden-layer model and a handful of points for ``kind``."""
    if kind == "navier_stokes":
        ref = manufactured_reference(nx=4, ny=3, times=(0.0, 0.5))
        problem = make_problem("navier_stokes", bounds=ref.bounds)
        colloc = sample_random(problem, 5, seed, reference=ref)
    else:
        problem = make_problem(kind)
        colloc = sample_uniform(problem, 3, 3)
    cfg = MlpConfig(problem.in_dim, problem.out_dim, 2, width, activation, seed)
    model = init_model(cfg)
    # perturb activation coefficients and biases away from their symmetric start
    rng = np.random.default_rng(seed)
    theta = model.get_flat()
    model.set_flat(theta + 0.05 * rng.standard_normal(theta.size))
    return model, problem, colloc


def loss_grad_check(kind: str, activation: str = "softgabortanh") -> float:
    """grad_check of total_loss over all trainable parameters of a width-8 model."""
    model, problem, colloc = small_problem_setup(kind, activation)
    theta0 = model.get_flat()

    def objective(tape, theta):
        m = model.copy()
        m.set_flat(np.asarray(theta))
        loss, _ = total_loss(m, problem, colloc, tape=tape)
        return loss

    # the loss graph has no value-dependent branches, so replaying the first recording is exact
    return grad_check(objective, theta0, replay=True)


def quadratic(c):
    c = np.asarray(c, dtype=float)

    def f(theta):
        d = theta - c
        return 0.5 * float(d @ d), d.copy()

    return f


def rosenbrock(theta):
    x, y = theta
    f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
    g = np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])
    return f, g


def finite(x) -> bool:
    return bool(np.all(np.isfinite(x)))


def isclose(a, b, tol) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
