"""Independent reference values: dense Jacobi eigenvalues, Bessel zeros, closed forms.

None of these share code with the sparse assembly or the iterative solver;
they exist to check them.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

__all__ = ["jacobi_eigenvalues", "bessel_zero", "disk_dirichlet_eigenvalue", "masked_rectangle_eigenvalues", "weyl_count"]


def jacobi_eigenvalues(A, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("jacobi_eigenvalues needs a square symmetric matrix")
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(A * A) - np.sum(np.diag(A) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                app, aqq = A[p, p], A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # limit of the formula below, avoids overflow in theta²
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                A[p, :] = A[:, p]
                A[q, :] = A[:, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def bessel_zero(nu: int, m: int) -> float:
    """m-th positive zero of J_nu, bracketed by a sign scan then polished by Brent."""
    x = np.arange(0.5, 10.0 + 4.0 * (m + nu), 0.05)
    y = jv(nu, x)
    found = 0
    for k in range(len(x) - 1):
        if y[k] == 0.0 or y[k] * y[k + 1] < 0:
            found += 1
            if found == m:
                return float(brentq(lambda z: jv(nu, z), x[k], x[k + 1], xtol=1e-15))
    raise ValueError(f"zero {m} of J_{nu} not bracketed")


def disk_dirichlet_eigenvalue(nu: int, m: int, r: float = 1.0) -> float:
    return (bessel_zero(nu, m) / r) ** 2


def masked_rectangle_eigenvalues(nx: int, ny: int, h: float) -> np.ndarray:
    """All eigenvalues of the 5-point Laplacian on an nx-by-ny node block, ascending.

    Dirichlet data sits one spacing beyond the outermost nodes, so the
    modes are sines on (nx + 1) h by (ny + 1) h.
    """
    p = np.arange(1, nx + 1)
    q = np.arange(1, ny + 1)
    lx = 4 / h**2 * np.sin(p * np.pi / (2 * (nx + 1))) ** 2
    ly = 4 / h**2 * np.sin(q * np.pi / (2 * (ny + 1))) ** 2
    return np.sort((lx[:, None] + ly[None, :]).ravel())


def weyl_count(area: float, perimeter: float, lam: float) -> float:
    """Two-term Weyl estimate of the Dirichlet counting function."""
    return area / (4 * math.pi) * lam - perimeter / (4 * math.pi) * math.sqrt(lam)
