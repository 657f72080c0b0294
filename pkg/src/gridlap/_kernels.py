"""Compiled Gauss-Seidel sweeps over CSR matrices."""

import numba
import numpy as np


@numba.njit(cache=True)
def gs_forward(indptr, indices, data, b, x):
    n = b.shape[0]
    for i in range(n):
        s = b[i]
        diag = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j == i:
                diag = data[p]
            else:
                s -= data[p] * x[j]
        x[i] = s / diag
    return x


@numba.njit(cache=True)
def gs_backward(indptr, indices, data, b, x):
    n = b.shape[0]
    for i in range(n - 1, -1, -1):
        s = b[i]
        diag = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j == i:
                diag = data[p]
            else:
                s -= data[p] * x[j]
        x[i] = s / diag
    return x


def check_diagonal(A) -> None:
    if np.any(A.diagonal() == 0):
        raise ZeroDivisionError("Gauss-Seidel needs a nonzero diagonal")
