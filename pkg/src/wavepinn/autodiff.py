"""Scalar reverse-mode tape with second-order forward jets layered on top.

The tape records every primitive as ``(opcode, operands, primal)``. A
:class:`Jet2` carries the value, gradient and upper-triangular Hessian of a
quantity with respect to up to three input directions; every component is a
:class:`Scalar` on the same tape, so parameter gradients of input derivatives
(``d/dtheta u_xx`` and friends) come out of one reverse sweep.

This is the reference route. Training uses the vectorized engine in
:mod:`wavepinn.batched`, which is checked against this module.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "Tape",
    "Scalar",
    "Jet2",
    "scalar_param",
    "scalar_const",
    "jet_input",
    "jet_const",
    "backward",
    "grad_check",
    "softplus_value",
]

_SOFTPLUS_CUT = 30.0


class DomainError(ArithmeticError):
    """Raised when a primitive is evaluated outside its domain."""


def softplus_value(x: float) -> float:
    """Overflow-safe ``ln(1 + exp(x))``."""
    if x > _SOFTPLUS_CUT:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _apply(op: str, a: float, b: float, n: int) -> float:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "square":
        return a * a
    if op == "powi":
        return a**n
    if op == "exp":
        return math.exp(a)
    if op == "ln":
        return math.log(a)
    if op == "sin":
        return math.sin(a)
    if op == "cos":
        return math.cos(a)
    if op == "tanh":
        return math.tanh(a)
    if op == "softplus":
        return softplus_value(a)
    raise ValueError(f"unknown opcode {op!r}")


_NP_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "neg": np.negative,
    "square": np.square,
    "exp": np.exp,
    "ln": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "softplus": lambda a: np.logaddexp(0.0, a),
}

_UNARY = {"neg", "square", "powi", "exp", "ln", "sin", "cos", "tanh", "softplus"}
_BINARY = {"add", "sub", "mul", "div"}


class Tape:
    """Append-only record of scalar primitives.

    Node ``k`` stores ``ops[k]``, ``args[k]`` (operand indices, always
    ``< k``), ``vals[k]`` and for ``powi`` the exponent in ``ints[k]``.
    Leaves are ``"param"`` (trainable) or ``"const"``.
    """

    def __init__(self) -> None:
        self.ops: list[str] = []
        self.args: list[tuple[int, ...]] = []
        self.vals: list[float] = []
        self.ints: list[int] = []
        self.params: list[int] = []
        self._zero: Scalar | None = None
        self._one: Scalar | None = None

    def __len__(self) -> int:
        return len(self.vals)

    @property
    def parameter_count(self) -> int:
        return len(self.params)

    def _push(self, op: str, args: tuple[int, ...], val: float, n: int = 0) -> Scalar:
        self.ops.append(op)
        self.args.append(args)
        self.vals.append(val)
        self.ints.append(n)
        return Scalar(self, len(self.vals) - 1)

    def param(self, value: float) -> Scalar:
        s = self._push("param", (), float(value))
        self.params.append(s.index)
        return s

    def const(self, value: float) -> Scalar:
        if value == 0.0 and self._zero is not None:
            return self._zero
        if value == 1.0 and self._one is not None:
            return self._one
        s = self._push("const", (), float(value))
        if value == 0.0 and self._zero is None:
            self._zero = s
        elif value == 1.0 and self._one is None:
            self._one = s
        return s

    def zero(self) -> Scalar:
        return self.const(0.0)

    def unary(self, op: str, a: Scalar, n: int = 0) -> Scalar:
        self._check(a)
        x = a.primal
        if op == "ln" and not x > 0.0:
            raise DomainError(f"ln of non-positive value {x!r} at node {len(self.vals)} (operand node {a.index})")
        return self._push(op, (a.index,), _apply(op, x, 0.0, n), n)

    def binary(self, op: str, a: Scalar, b: Scalar) -> Scalar:
        self._check(a)
        self._check(b)
        if op == "div" and b.primal == 0.0:
            raise DomainError(f"div by zero at node {len(self.vals)} (divisor node {b.index})")
        return self._push(op, (a.index, b.index), _apply(op, a.primal, b.primal, 0))

    def _check(self, s: Scalar) -> None:
        if s.tape is not self:
            raise ValueError(f"operand node {s.index} belongs to a different tape")

    def replay(self) -> list[float]:
        """Recompute every primal from the leaves, in recording order."""
        out: list[float] = []
        for op, args, val, n in zip(self.ops, self.args, self.vals, self.ints):
            if op in ("param", "const"):
                out.append(val)
            elif op in _UNARY:
                out.append(_apply(op, out[args[0]], 0.0, n))
            else:
                out.append(_apply(op, out[args[0]], out[args[1]], 0))
        return out

    def replay_batch(self, root: Scalar, param_values) -> np.ndarray:
        """Value of ``root`` for each row of ``param_values`` (shape ``(k, parameter_count)``).

        Every node is re-evaluated as a length-``k`` array, so this is only
        valid when the recorded graph does not depend on the parameter values.
        """
        self._check(root)
        P = np.atleast_2d(np.asarray(param_values, dtype=float))
        if P.shape[1] != len(self.params):
            raise ValueError(f"expected {len(self.params)} parameter columns, got {P.shape[1]}")
        slot = {node: j for j, node in enumerate(self.params)}
        out: list = []
        for k in range(root.index + 1):
            op = self.ops[k]
            if op == "param":
                out.append(P[:, slot[k]])
            elif op == "const":
                out.append(self.vals[k])
            elif op == "powi":
                out.append(np.power(out[self.args[k][0]], self.ints[k]))
            elif op in _UNARY:
                out.append(_NP_OPS[op](out[self.args[k][0]]))
            else:
                a, b = self.args[k]
                out.append(_NP_OPS[op](out[a], out[b]))
        return np.broadcast_to(out[root.index], (P.shape[0],)).astype(float)

    def gradient(self, loss: Scalar) -> np.ndarray:
        return backward(self, loss)


class Scalar:
    """Handle to one node of a :class:`Tape`."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None

    def __init__(self, tape: Tape, index: int) -> None:
        self.tape = tape
        self.index = index

    @property
    def primal(self) -> float:
        return self.tape.vals[self.index]

    def __repr__(self) -> str:
        return f"Scalar({self.primal!r}, node={self.index})"

    def _lift(self, other) -> Scalar:
        if isinstance(other, Scalar):
            return other
        return self.tape.const(float(other))

    def __add__(self, other):
        return self.tape.binary("add", self, self._lift(other))

    def __radd__(self, other):
        return self.tape.binary("add", self._lift(other), self)

    def __sub__(self, other):
        return self.tape.binary("sub", self, self._lift(other))

    def __rsub__(self, other):
        return self.tape.binary("sub", self._lift(other), self)

    def __mul__(self, other):
        return self.tape.binary("mul", self, self._lift(other))

    def __rmul__(self, other):
        return self.tape.binary("mul", self._lift(other), self)

    def __truediv__(self, other):
        return self.tape.binary("div", self, self._lift(other))

    def __rtruediv__(self, other):
        return self.tape.binary("div", self._lift(other), self)

    def __neg__(self):
        return self.tape.unary("neg", self)

    def square(self) -> Scalar:
        return self.tape.unary("square", self)

    def powi(self, n: int) -> Scalar:
        return self.tape.unary("powi", self, int(n))

    def exp(self) -> Scalar:
        return self.tape.unary("exp", self)

    def ln(self) -> Scalar:
        return self.tape.unary("ln", self)

    def sin(self) -> Scalar:
        return self.tape.unary("sin", self)

    def cos(self) -> Scalar:
        return self.tape.unary("cos", self)

    def tanh(self) -> Scalar:
        return self.tape.unary("tanh", self)

    def softplus(self) -> Scalar:
        return self.tape.unary("softplus", self)


def scalar_param(tape: Tape, value: float) -> Scalar:
    """Register a trainable leaf."""
    return tape.param(value)


def scalar_const(tape: Tape, value: float) -> Scalar:
    return tape.const(value)


def backward(tape: Tape, loss: Scalar) -> np.ndarray:
    """Gradient of ``loss`` with respect to every trainable leaf.

    One reverse sweep over the tape; parameters not reachable from ``loss``
    get 0. The result is aligned with parameter registration order.
    """
    if not isinstance(loss, Scalar) or loss.tape is not tape or not 0 <= loss.index < len(tape):
        raise ValueError("loss is not a node of this tape")
    vals = tape.vals
    adj = [0.0] * (loss.index + 1)
    adj[loss.index] = 1.0
    ops, args, ints = tape.ops, tape.args, tape.ints
    for k in range(loss.index, -1, -1):
        g = adj[k]
        if g == 0.0:
            continue
        op = ops[k]
        if op in ("param", "const"):
            continue
        a = args[k]
        if op == "add":
            adj[a[0]] += g
            adj[a[1]] += g
        elif op == "sub":
            adj[a[0]] += g
            adj[a[1]] -= g
        elif op == "mul":
            adj[a[0]] += g * vals[a[1]]
            adj[a[1]] += g * vals[a[0]]
        elif op == "div":
            b = vals[a[1]]
            adj[a[0]] += g / b
            adj[a[1]] -= g * vals[k] / b
        elif op == "neg":
            adj[a[0]] -= g
        elif op == "square":
            adj[a[0]] += 2.0 * g * vals[a[0]]
        elif op == "powi":
            n = ints[k]
            adj[a[0]] += g * n * vals[a[0]] ** (n - 1) if n != 0 else 0.0
        elif op == "exp":
            adj[a[0]] += g * vals[k]
        elif op == "ln":
            adj[a[0]] += g / vals[a[0]]
        elif op == "sin":
            adj[a[0]] += g * math.cos(vals[a[0]])
        elif op == "cos":
            adj[a[0]] -= g * math.sin(vals[a[0]])
        elif op == "tanh":
            t = vals[k]
            adj[a[0]] += g * (1.0 - t * t)
        elif op == "softplus":
            adj[a[0]] += g * _sigmoid(vals[a[0]])
        else:  # pragma: no cover
            raise ValueError(f"unknown opcode {op!r}")
    return np.array([adj[i] if i <= loss.index else 0.0 for i in tape.params])


def _tri(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def _tri_index(i: int, j: int, dim: int) -> int:
    if i > j:
        i, j = j, i
    return i * dim - i * (i - 1) // 2 + (j - i)


class Jet2:
    """Truncated second-order Taylor expansion in ``dim`` input directions.

    ``grad[i]`` is the first partial along direction ``i``; ``hess`` holds the
    upper triangle row by row, and :meth:`hess_at` maps ``(i, j)`` and
    ``(j, i)`` to the same node.
    """

    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, val: Scalar, grad: Sequence[Scalar], hess: Sequence[Scalar]) -> None:
        dim = len(grad)
        if not 1 <= dim <= 3:
            raise ValueError(f"jet dimension must be 1, 2 or 3, got {dim}")
        if len(hess) != dim * (dim + 1) // 2:
            raise ValueError("hessian length does not match dimension")
        self.val = val
        self.grad = list(grad)
        self.hess = list(hess)

    @property
    def dim(self) -> int:
        return len(self.grad)

    @property
    def tape(self) -> Tape:
        return self.val.tape

    def hess_at(self, i: int, j: int) -> Scalar:
        return self.hess[_tri_index(i, j, self.dim)]

    def __repr__(self) -> str:
        g = ", ".join(f"{s.primal:.6g}" for s in self.grad)
        h = ", ".join(f"{s.primal:.6g}" for s in self.hess)
        return f"Jet2(val={self.val.primal:.6g}, grad=({g}), hess=({h}))"

    def _same(self, other: Jet2) -> None:
        if other.dim != self.dim:
            raise ValueError(f"jet dimension mismatch: {self.dim} vs {other.dim}")

    def _lift(self, other) -> Jet2:
        if isinstance(other, Jet2):
            self._same(other)
            return other
        return jet_const(self.tape, other, self.dim)

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.val + other, self.grad, self.hess)
        self._same(other)
        return Jet2(
            self.val + other.val,
            [a + b for a, b in zip(self.grad, other.grad)],
            [a + b for a, b in zip(self.hess, other.hess)],
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, [-a for a in self.grad], [-a for a in self.hess])

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.val - other, self.grad, self.hess)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return self.scale(other)
        self._same(other)
        f, g = self, other
        grad = [f.grad[i] * g.val + f.val * g.grad[i] for i in range(f.dim)]
        hess = []
        for k, (i, j) in enumerate(_tri(f.dim)):
            h = f.hess[k] * g.val + f.grad[i] * g.grad[j] + f.grad[j] * g.grad[i] + f.val * g.hess[k]
            hess.append(h)
        return Jet2(f.val * g.val, grad, hess)

    __rmul__ = __mul__

    def scale(self, c) -> Jet2:
        """Multiply by a Scalar or float that does not depend on the inputs."""
        return Jet2(self.val * c, [a * c for a in self.grad], [a * c for a in self.hess])

    def compose(self, h0: Scalar, h1: Scalar, h2: Scalar) -> Jet2:
        """Apply a unary map given its value and first two derivatives at ``val``."""
        grad = [h1 * fi for fi in self.grad]
        hess = []
        for k, (i, j) in enumerate(_tri(self.dim)):
            hess.append(h2 * (self.grad[i] * self.grad[j]) + h1 * self.hess[k])
        return Jet2(h0, grad, hess)

    def reciprocal(self) -> Jet2:
        r = 1.0 / self.val
        r2 = r.square()
        return self.compose(r, -r2, 2.0 * (r2 * r))

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self.scale(1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal().scale(other)

    def square(self) -> Jet2:
        return self * self

    def powi(self, n: int) -> Jet2:
        n = int(n)
        if n < 0:
            raise ValueError("negative powers are not supported on jets")
        if n == 0:
            return jet_const(self.tape, 1.0, self.dim)
        if n == 1:
            return self
        x = self.val
        h0 = x.powi(n)
        h1 = n * x.powi(n - 1)
        h2 = (n * (n - 1)) * x.powi(n - 2) if n >= 2 else self.tape.zero()
        return self.compose(h0, h1, h2)

    def exp(self) -> Jet2:
        e = self.val.exp()
        return self.compose(e, e, e)

    def sin(self) -> Jet2:
        s = self.val.sin()
        c = self.val.cos()
        return self.compose(s, c, -s)

    def cos(self) -> Jet2:
        s = self.val.sin()
        c = self.val.cos()
        return self.compose(c, -s, -c)

    def tanh(self) -> Jet2:
        t = self.val.tanh()
        d1 = 1.0 - t.square()
        d2 = -2.0 * (t * d1)
        return self.compose(t, d1, d2)


def affine(weights: Sequence, jets: Sequence[Jet2], bias=None) -> Jet2:
    """``sum_k w_k * J_k + b`` with Scalar weights; the bias only touches the value."""
    if not jets:
        raise ValueError("affine combination needs at least one jet")
    dim = jets[0].dim
    for j in jets:
        if j.dim != dim:
            raise ValueError("jet dimension mismatch in affine combination")
    val = None
    grad: list = [None] * dim
    hess: list = [None] * (dim * (dim + 1) // 2)
    for w, j in zip(weights, jets):
        val = j.val * w if val is None else val + j.val * w
        for i in range(dim):
            t = j.grad[i] * w
            grad[i] = t if grad[i] is None else grad[i] + t
        for k in range(len(hess)):
            t = j.hess[k] * w
            hess[k] = t if hess[k] is None else hess[k] + t
    if bias is not None:
        val = val + bias
    return Jet2(val, grad, hess)


def jet_input(tape: Tape, value: float, direction_index: int, dim: int) -> Jet2:
    """Seed an independent variable: unit gradient along ``direction_index``."""
    if not 1 <= dim <= 3:
        raise ValueError(f"jet dimension must be 1, 2 or 3, got {dim}")
    if not 0 <= direction_index < dim:
        raise IndexError(f"direction {direction_index} out of range for dim {dim}")
    zero = tape.zero()
    one = tape.const(1.0)
    grad = [one if i == direction_index else zero for i in range(dim)]
    return Jet2(tape.const(value), grad, [zero] * (dim * (dim + 1) // 2))


def jet_const(tape: Tape, value, dim: int) -> Jet2:
    v = value if isinstance(value, Scalar) else tape.const(float(value))
    zero = tape.zero()
    return Jet2(v, [zero] * dim, [zero] * (dim * (dim + 1) // 2))


def grad_check(
    objective: Callable[[Tape, Sequence[float]], Scalar],
    theta: Sequence[float],
    step: float = 1e-5,
    trainable: Sequence[bool] | None = None,
    replay: bool = False,
) -> float:
    """Largest relative gap between the tape gradient and central differences.

    ``objective(tape, theta)`` must register ``theta[k]`` as a parameter when
    ``trainable[k]`` is true (the default) and as a constant otherwise.
    Frozen entries are skipped. The error per entry is
    ``|analytic - fd| / max(1, |analytic|)``.

    With ``replay=True`` the perturbed losses come from
    :meth:`Tape.replay_batch` on the first recording instead of fresh calls
    to ``objective``; use it only for graphs free of value-dependent branches.
    """
    theta = [float(v) for v in theta]
    mask = [True] * len(theta) if trainable is None else list(trainable)
    tape = Tape()
    loss = objective(tape, theta)
    grad = backward(tape, loss)
    if replay:
        base = np.array([tape.vals[i] for i in tape.params])
        n = base.size
        rows = np.tile(base, (2 * n, 1))
        idx = np.arange(n)
        rows[2 * idx, idx] += step
        rows[2 * idx + 1, idx] -= step
        vals = tape.replay_batch(loss, rows)
        fd = (vals[0::2] - vals[1::2]) / (2.0 * step)
        return float(np.max(np.abs(grad - fd) / np.maximum(1.0, np.abs(grad)), initial=0.0))
    worst = 0.0
    gi = 0
    for k, free in enumerate(mask):
        if not free:
            continue
        plus = list(theta)
        minus = list(theta)
        plus[k] += step
        minus[k] -= step
        fp = objective(Tape(), plus).primal
        fm = objective(Tape(), minus).primal
        fd = (fp - fm) / (2.0 * step)
        a = grad[gi]
        worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
        gi += 1
    return worst
