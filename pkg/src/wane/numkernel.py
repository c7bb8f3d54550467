"""Dense numeric primitives with hand-derived backward rules.

Forward functions return plain float64 arrays plus whatever saved state the
matching backward rule needs (argmax indices, softmax outputs).  Backward
functions take the upstream gradient and that saved state and return the
gradient for each input.  There is no tape or graph object; callers wire
compositions by hand and are responsible for calling backwards in reverse
order.

Every rule here is checked against central finite differences in the test
suite.
"""

import numpy as np


def matmul(a, b):
    """Standard matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects 2-d arrays, got %d-d and %d-d" % (a.ndim, b.ndim))
    if a.shape[1] != b.shape[0]:
        raise ValueError("matmul: incompatible shapes %r x %r" % (a.shape, b.shape))
    return a @ b


def matmul_backward(g, a, b):
    """dL/dA = g @ B^T, dL/dB = A^T @ g."""
    return g @ b.T, a.T @ g


def col_softmax(a):
    """Column-wise softmax with per-column max subtraction for stability."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("col_softmax expects a non-empty 2-d array")
    z = a - a.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def col_softmax_backward(g, s):
    """Per-column Jacobian-vector product: s * (g - <g, s>)."""
    dot = (g * s).sum(axis=0, keepdims=True)
    return s * (g - dot)


def maxpool_cols(m):
    """Row-wise max over columns; returns (values, argmax indices).

    Ties break to the first occurrence so the backward route is deterministic.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0 or m.shape[0] == 0:
        raise ValueError("maxpool_cols expects a non-empty 2-d array")
    idx = m.argmax(axis=1)
    vals = m[np.arange(m.shape[0]), idx]
    return vals, idx


def maxpool_cols_backward(g, idx, shape):
    """Routes each row's gradient to the argmax column only."""
    out = np.zeros(shape, dtype=np.float64)
    out[np.arange(shape[0]), idx] = g
    return out


def meanpool_cols(m):
    """Row means over columns."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0 or m.shape[0] == 0:
        raise ValueError("meanpool_cols expects a non-empty 2-d array")
    return m.mean(axis=1)


def meanpool_cols_backward(g, ncols):
    """Distributes the gradient evenly: each column receives g / ncols."""
    return np.outer(np.asarray(g, dtype=np.float64), np.full(ncols, 1.0 / ncols))


def elementwise(a, b, op):
    """Elementwise sub or mul of two equal-shape arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("elementwise: shape mismatch %r vs %r" % (a.shape, b.shape))
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError("elementwise op must be 'sub' or 'mul', got %r" % (op,))


def elementwise_backward(g, a, b, op):
    """sub -> (g, -g); mul -> (g*b, g*a)."""
    if op == "sub":
        return g, -g
    if op == "mul":
        return g * b, g * a
    raise ValueError("elementwise op must be 'sub' or 'mul', got %r" % (op,))


def tanh(v):
    return np.tanh(np.asarray(v, dtype=np.float64))


def tanh_backward(g, t):
    return g * (1.0 - t * t)


def sigmoid(x):
    """Numerically stable logistic function for scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    p = 1.0 / (1.0 + e)
    out = np.where(x >= 0, p, 1.0 - p)
    if out.ndim == 0:
        return float(out)
    return out


def sigmoid_backward(g, s):
    return g * s * (1.0 - s)


def log_sigmoid(x):
    """log(sigmoid(x)) computed as -softplus(-x); finite for any finite x."""
    out = -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))
    if out.ndim == 0:
        return float(out)
    return out
