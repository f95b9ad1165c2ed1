"""Dense complex linear algebra for small Hilbert spaces.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
helpers here validate shapes and finiteness and provide the few kernels the
rest of the package needs (Kronecker products and a scaling-and-squaring
matrix exponential that also accepts stacks of matrices).
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .errors import ShapeError

__all__ = [
    "as_matrix",
    "adjoint",
    "trace",
    "matmul",
    "kron",
    "kron_all",
    "expm",
    "identity",
    "basis",
    "projector",
]

# Pade [6/6] coefficients b_k = (12-k)! 6! / (12! k! (6-k)!)
_PADE6 = np.array([1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280])
_SCALED_NORM = 0.5


def as_matrix(a, *, square: bool = False) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def basis(n: int, k: int) -> np.ndarray:
    """Computational basis vector ``|k>`` of an ``n``-level system."""
    v = np.zeros(n, dtype=np.complex128)
    v[k] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def adjoint(a) -> np.ndarray:
    return np.swapaxes(np.asarray(a, dtype=np.complex128), -1, -2).conj()


def trace(a) -> complex:
    a = as_matrix(a, square=True)
    return complex(np.trace(a))


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    """Kronecker product with ``(a ⊗ b)[i*rb + k, j*cb + l] = a[i, j] * b[k, l]``."""
    a, b = as_matrix(a), as_matrix(b)
    ra, ca = a.shape
    rb, cb = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def kron_all(*factors) -> np.ndarray:
    return reduce(kron, factors)


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a [6/6] Pade kernel.

    Accepts a single square matrix or a stack with shape ``(..., n, n)``. The
    matrix is scaled by ``2**-s`` so its 1-norm is below 0.5, where the
    truncation error of the kernel is below double-precision roundoff.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"expm needs square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    n = a.shape[-1]
    norm = float(np.max(np.sum(np.abs(a), axis=-2))) if a.size else 0.0
    s = 0
    if norm > _SCALED_NORM:
        s = int(np.ceil(np.log2(norm / _SCALED_NORM)))
    x = a / (2.0**s)

    eye = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    b = _PADE6
    even = b[0] * eye + b[2] * x2 + b[4] * x4 + b[6] * x6
    odd = x @ (b[1] * eye + b[3] * x2 + b[5] * x4)
    r = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        r = r @ r
    return r
