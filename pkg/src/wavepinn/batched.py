"""Vectorized forward-over-reverse engine used for training.

Same mathematics as the scalar route in :mod:`wavepinn.autodiff`, batched
over collocation points: the network is pushed through as stacked jet
components ``(value, first partials, selected second partials)`` and the
loss head is recorded on a small reverse tape whose nodes hold arrays.
Only the derivative components a problem actually reads are propagated,
which is exact because each second partial ``(i, j)`` depends only on the
value, the first partials ``i`` and ``j`` and itself.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import kernels
from .activations import COEF_NAMES
from .network import MlpModel

__all__ = ["VTape", "VNode", "network_fields", "vmean"]


class VTape:
    """Reverse tape over array-valued nodes with an external parameter gradient."""

    def __init__(self, n_params: int) -> None:
        self.values: list[np.ndarray] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list[Callable | None] = []
        self.param_grad = np.zeros(n_params)

    def push(self, value, parents: tuple[int, ...] = (), vjp: Callable | None = None) -> VNode:
        self.values.append(value)
        self.parents.append(parents)
        self.vjps.append(vjp)
        return VNode(self, len(self.values) - 1)

    def backward(self, root: VNode) -> np.ndarray:
        """Accumulate d(root)/d(parameters) into :attr:`param_grad` and return it."""
        adj: dict[int, np.ndarray] = {root.index: np.ones_like(self.values[root.index])}
        for k in range(root.index, -1, -1):
            g = adj.pop(k, None)
            if g is None or self.vjps[k] is None:
                continue
            grads = self.vjps[k](g)
            for p, gp in zip(self.parents[k], grads):
                if p in adj:
                    adj[p] = adj[p] + gp
                else:
                    adj[p] = gp
        return self.param_grad

    def release(self) -> None:
        """Drop recorded values and closures; they form reference cycles with the tape."""
        self.values.clear()
        self.parents.clear()
        self.vjps.clear()


def _unbroadcast(g, shape):
    g = np.asarray(g)
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class VNode:
    """Array node supporting the arithmetic the problem formulas use."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None

    def __init__(self, tape: VTape, index: int) -> None:
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.index]

    def __add__(self, other):
        if isinstance(other, VNode):
            sa, sb = np.shape(self.value), np.shape(other.value)
            return self.tape.push(self.value + other.value, (self.index, other.index), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))
        sa = np.shape(self.value)
        return self.tape.push(self.value + other, (self.index,), lambda g: (_unbroadcast(g, sa),))

    __radd__ = __add__

    def __neg__(self):
        return self.tape.push(-self.value, (self.index,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, VNode):
            return self + (-other)
        return self + (-np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a = self.value
        if isinstance(other, VNode):
            b = other.value
            sa, sb = np.shape(a), np.shape(b)
            return self.tape.push(a * b, (self.index, other.index), lambda g: (_unbroadcast(g * b, sa), _unbroadcast(g * a, sb)))
        c = other
        return self.tape.push(a * c, (self.index,), lambda g: (_unbroadcast(g * c, np.shape(a)),))

    __rmul__ = __mul__


def vmean(node: VNode) -> VNode:
    n = node.value.size
    shape = node.value.shape
    return node.tape.push(np.array(node.value.sum() / n), (node.index,), lambda g: (np.full(shape, float(g) / n),))


def _input_components(X: np.ndarray, dirs: Sequence[int], n_pairs: int) -> np.ndarray:
    N, d = X.shape
    H = np.zeros((1 + len(dirs) + n_pairs, N, d))
    H[0] = X
    for k, i in enumerate(dirs):
        H[1 + k, :, i] = 1.0
    return H


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x)) if x >= 0 else np.exp(x) / (1.0 + np.exp(x))


def network_fields(
    tape: VTape,
    model: MlpModel,
    X: np.ndarray,
    coords: Sequence[str],
    outputs: Sequence[str],
    dirs: Sequence[str] = (),
    pairs: Sequence[tuple[str, str]] = (),
) -> Callable:
    """Run the network on the rows of ``X`` and return a field accessor.

    The accessor ``F(var, *dirs)`` yields :class:`VNode` arrays for the output
    ``var`` and the requested partials. Backward through the returned nodes
    accumulates into ``tape.param_grad`` in flat-parameter order.
    """
    X = np.ascontiguousarray(X, dtype=float)
    dir_idx = [coords.index(d) for d in dirs]
    pos = {d: k for k, d in enumerate(dirs)}
    pi = np.array([pos[a] for a, _ in pairs], dtype=np.intp)
    pj = np.array([pos[b] for _, b in pairs], dtype=np.intp)
    nd = len(dirs)
    H = _input_components(X, dir_idx, len(pairs))
    C, N = H.shape[0], H.shape[1]

    cache = []
    for layer, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = H @ W.T
        Z[0] += b
        entry = {"H": H, "act": None}
        if model.is_activated(layer):
            spec = model.activation_for(layer)
            slots = [COEF_NAMES.index(c) for c in spec.trainable_names]
            Zf = np.ascontiguousarray(Z.reshape(C, -1))
            A, D, S = kernels.jet_forward(spec.kind.family_id, spec.kind.order, Zf, spec.coef_vector(), nd, pi, pj, np.array(slots, dtype=np.intp))
            entry["act"] = (Zf, D, S, spec, slots)
            H = A.reshape(Z.shape)
        else:
            H = Z
        cache.append(entry)
    Y = H

    # flat offsets of each block
    offsets = []
    k = 0
    for W, b in zip(model.weights, model.biases):
        offsets.append((k, k + W.size, k + W.size + b.size))
        k += W.size + b.size
    act_offsets = {}
    for spec in model.activations:
        act_offsets[id(spec)] = k
        k += len(spec.trainable_names)

    def vjp(Ybar):
        grad = tape.param_grad
        Abar = Ybar
        for layer in range(len(cache) - 1, -1, -1):
            entry = cache[layer]
            W = model.weights[layer]
            if entry["act"] is not None:
                Zf, D, S, spec, slots = entry["act"]
                Zbar_f, cbar = kernels.jet_backward(Zf, D, S, np.ascontiguousarray(Abar.reshape(C, -1)), nd, pi, pj)
                Zbar = Zbar_f.reshape(Abar.shape)
                base = act_offsets[id(spec)]
                for j, name in enumerate(spec.trainable_names):
                    grad[base + j] += cbar[j] * _sigmoid(spec.raw[name])
            else:
                Zbar = Abar
            Hin = entry["H"]
            w0, w1, b1 = offsets[layer]
            grad[w0:w1] += (Zbar.reshape(-1, W.shape[0]).T @ Hin.reshape(-1, W.shape[1])).ravel()
            grad[w1:b1] += Zbar[0].sum(axis=0)
            if layer > 0:
                Abar = Zbar @ W
        return ()

    ynode = tape.push(Y, (), vjp)

    comp_index = {(): 0}
    for k, d in enumerate(dirs):
        comp_index[(d,)] = 1 + k
    for p, (a, b) in enumerate(pairs):
        comp_index[(a, b)] = comp_index[(b, a)] = 1 + nd + p
    shape = Y.shape

    def F(var: str, *ds: str) -> VNode:
        try:
            c = comp_index[tuple(ds)]
        except KeyError:
            raise KeyError(f"derivative {ds} of {var!r} was not requested") from None
        o = outputs.index(var)

        def pick(g, c=c, o=o):
            full = np.zeros(shape)
            full[c, :, o] = g
            return (full,)

        return tape.push(Y[c, :, o], (ynode.index,), pick)

    return F
