"""Tape-based reverse-mode automatic differentiation over scalars.

Each node on the tape is one scalar in the computation, but its value may be
a numpy array: the same scalar evaluated at every sample of a batch. Leaves
(learnable parameters) stay plain floats; reverse accumulation sums adjoint
arrays back down to them, which is exactly the gradient of a summed batch
loss. This keeps the graph size independent of the batch size.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit


class DomainError(ValueError):
    """A forward operation left its domain (non-finite result, div by zero, ...)."""


def _check_finite(value, what):
    if isinstance(value, np.ndarray):
        if not np.all(np.isfinite(value)):
            raise DomainError(f"non-finite value in {what}")
    elif not math.isfinite(value):
        raise DomainError(f"non-finite value in {what}: {value!r}")
    return value


class Var:
    """Handle to one node on a tape: a value plus its position in the graph."""

    __slots__ = ("tape", "idx", "value")

    # make numpy defer to the reflected operators instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, tape, idx, value):
        self.tape = tape
        self.idx = idx
        self.value = value

    def __repr__(self):
        return f"Var({self.value!r}, idx={self.idx})"

    # arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if n == 2:
            return square(self)
        raise NotImplementedError("only **2 is supported; compose mul for higher powers")


class Tape:
    """Ordered record of scalar operations; parents always precede children."""

    def __init__(self):
        self._values = []
        self._parents = []   # tuple of parent indices per node
        self._partials = []  # matching local partial derivatives
        self.adjoints = None

    def __len__(self):
        return len(self._values)

    def var(self, value):
        """Create a leaf node holding `value` (a finite float)."""
        return self._push(_check_finite(float(value), "var"), (), ())

    def _push(self, value, parents, partials):
        idx = len(self._values)
        self._values.append(value)
        self._parents.append(parents)
        self._partials.append(partials)
        return Var(self, idx, value)

    def backward(self, root):
        """Reverse sweep from `root`; afterwards adjoint(leaf) = d root / d leaf."""
        if root.tape is not self or not (0 <= root.idx < len(self._values)):
            raise ValueError("root is not a node on this tape")
        if np.ndim(root.value) != 0:
            raise ValueError("backward root must be a scalar (reduce the batch first)")
        n = len(self._values)
        adj = [0.0] * n
        adj[root.idx] = 1.0
        touched = bytearray(n)
        touched[root.idx] = 1
        values = self._values
        for i in range(root.idx, -1, -1):
            if not touched[i]:
                continue
            a = adj[i]
            for p, d in zip(self._parents[i], self._partials[i]):
                touched[p] = 1
                contrib = d * a
                if np.ndim(contrib) != 0 and np.ndim(values[p]) == 0:
                    contrib = float(np.sum(contrib))
                adj[p] = adj[p] + contrib
        self.adjoints = adj
        return adj

    def adjoint(self, v):
        if self.adjoints is None:
            raise ValueError("call backward() first")
        return self.adjoints[v.idx]

    def grad(self, leaves):
        """Adjoints of a list of leaf Vars as a float array."""
        return np.array([self.adjoint(v) for v in leaves], dtype=float)


def _is_var(x):
    return isinstance(x, Var)


def _tape_of(a, b=None):
    if _is_var(a):
        if _is_var(b) and b.tape is not a.tape:
            raise ValueError("operands live on different tapes")
        return a.tape
    return b.tape


def _val(x):
    return x.value if _is_var(x) else x


# -- elementary operations --------------------------------------------------
# Each accepts Vars, floats or numpy arrays; with no Var involved the plain
# numeric result is returned, so the same formulas run with or without a tape.

def add(a, b):
    if not (_is_var(a) or _is_var(b)):
        return _val(a) + _val(b)
    tape = _tape_of(a, b)
    out = _check_finite(_val(a) + _val(b), "add")
    parents, partials = [], []
    if _is_var(a):
        parents.append(a.idx)
        partials.append(1.0)
    if _is_var(b):
        parents.append(b.idx)
        partials.append(1.0)
    return tape._push(out, tuple(parents), tuple(partials))


def sub(a, b):
    if not (_is_var(a) or _is_var(b)):
        return _val(a) - _val(b)
    tape = _tape_of(a, b) if _is_var(a) else _tape_of(b)
    out = _check_finite(_val(a) - _val(b), "sub")
    parents, partials = [], []
    if _is_var(a):
        parents.append(a.idx)
        partials.append(1.0)
    if _is_var(b):
        parents.append(b.idx)
        partials.append(-1.0)
    return tape._push(out, tuple(parents), tuple(partials))


def mul(a, b):
    av, bv = _val(a), _val(b)
    if not (_is_var(a) or _is_var(b)):
        return av * bv
    tape = _tape_of(a, b)
    out = _check_finite(av * bv, "mul")
    parents, partials = [], []
    if _is_var(a):
        parents.append(a.idx)
        partials.append(bv)
    if _is_var(b):
        parents.append(b.idx)
        partials.append(av)
    return tape._push(out, tuple(parents), tuple(partials))


def div(a, b):
    av, bv = _val(a), _val(b)
    if isinstance(bv, np.ndarray):
        if np.any(bv == 0.0):
            raise DomainError("division by zero")
    elif bv == 0.0:
        raise DomainError("division by zero")
    if not (_is_var(a) or _is_var(b)):
        return av / bv
    tape = _tape_of(a, b)
    out = _check_finite(av / bv, "div")
    parents, partials = [], []
    if _is_var(a):
        parents.append(a.idx)
        partials.append(1.0 / bv)
    if _is_var(b):
        parents.append(b.idx)
        partials.append(-av / (bv * bv))
    return tape._push(out, tuple(parents), tuple(partials))


def neg(a):
    if not _is_var(a):
        return -a
    return a.tape._push(-a.value, (a.idx,), (-1.0,))


def sin(x):
    if not _is_var(x):
        return np.sin(x) if isinstance(x, np.ndarray) else math.sin(x)
    v = np.sin(x.value) if isinstance(x.value, np.ndarray) else math.sin(x.value)
    c = np.cos(x.value) if isinstance(x.value, np.ndarray) else math.cos(x.value)
    return x.tape._push(v, (x.idx,), (c,))


def cos(x):
    if not _is_var(x):
        return np.cos(x) if isinstance(x, np.ndarray) else math.cos(x)
    v = np.cos(x.value) if isinstance(x.value, np.ndarray) else math.cos(x.value)
    s = np.sin(x.value) if isinstance(x.value, np.ndarray) else math.sin(x.value)
    return x.tape._push(v, (x.idx,), (-s,))


def sqrt(x):
    xv = _val(x)
    if isinstance(xv, np.ndarray):
        if np.any(xv < 0.0):
            raise DomainError("sqrt of negative value")
    elif xv < 0.0:
        raise DomainError(f"sqrt of negative value {xv!r}")
    if not _is_var(x):
        return np.sqrt(xv) if isinstance(xv, np.ndarray) else math.sqrt(xv)
    v = np.sqrt(xv) if isinstance(xv, np.ndarray) else math.sqrt(xv)
    if isinstance(v, np.ndarray):
        if np.any(v == 0.0):
            raise DomainError("sqrt gradient undefined at 0")
    elif v == 0.0:
        raise DomainError("sqrt gradient undefined at 0")
    return x.tape._push(v, (x.idx,), (0.5 / v,))


def square(x):
    xv = _val(x)
    if not _is_var(x):
        return xv * xv
    return x.tape._push(_check_finite(xv * xv, "square"), (x.idx,), (2.0 * xv,))


def sigmoid(x):
    xv = _val(x)
    s = expit(xv)
    if not _is_var(x):
        return s if isinstance(xv, np.ndarray) else float(s)
    if not isinstance(xv, np.ndarray):
        s = float(s)
    return x.tape._push(s, (x.idx,), (s * (1.0 - s),))


def vsum(x):
    """Reduce a batch-valued node to the scalar sum over the batch."""
    if not _is_var(x):
        return float(np.sum(x))
    if np.ndim(x.value) == 0:
        return x
    return x.tape._push(float(np.sum(x.value)), (x.idx,), (1.0,))


def value(x):
    """Numeric payload of a Var, or `x` itself when it is already numeric."""
    return x.value if _is_var(x) else x


def grad_check(f, x, eps=1e-6):
    """Compare the taped gradient of ``f`` against central finite differences.

    ``f`` takes a list of scalars (Vars or floats) and returns a scalar; it is
    evaluated once on a fresh tape for the analytic gradient and 2·len(x)
    times on plain floats for the numeric one. Returns the max over
    coordinates of |analytic - numeric| / max(1, |numeric|).
    """
    x = [float(v) for v in x]
    tape = Tape()
    leaves = [tape.var(v) for v in x]
    out = f(leaves)
    if _is_var(out):
        tape.backward(out)
        analytic = tape.grad(leaves)
    else:
        analytic = np.zeros(len(x))
    worst = 0.0
    for i in range(len(x)):
        probe = list(x)
        probe[i] = x[i] + eps
        hi = float(value(f(probe)))
        probe[i] = x[i] - eps
        lo = float(value(f(probe)))
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise DomainError(f"f non-finite at finite-difference probe {i}")
        numeric = (hi - lo) / (2.0 * eps)
        worst = max(worst, abs(analytic[i] - numeric) / max(1.0, abs(numeric)))
    return worst
