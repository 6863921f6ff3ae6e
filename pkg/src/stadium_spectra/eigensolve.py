"""Smallest eigenpairs of a sparse SPD matrix by blocked LOBPCG.

The iteration keeps an orthonormal block X of Ritz vectors, extends it with
Jacobi-preconditioned residuals W and the previous search directions P, and
runs Rayleigh-Ritz on span[X, W, P].  The block carries a few guard vectors
beyond the k requested so that the k-th pair is not slowed by its neighbour.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular

from .discretize import DimensionMismatch, SparseSymMatrix, matvec

__all__ = [
    "EigenPair",
    "SolveReport",
    "DimensionError",
    "smallest_k",
    "residual",
    "splitmix64",
    "random_block",
    "block_size",
    "amg_preconditioner",
    "make_preconditioner",
]

log = logging.getLogger(__name__)

GRAM_COND_LIMIT = 1e8
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class DimensionError(ValueError):
    pass


@dataclass
class EigenPair:
    lam: float
    vector: np.ndarray


@dataclass
class SolveReport:
    iterations: int
    final_residuals: list[float]
    converged: bool
    seed: int
    matvecs: int = 0
    ritz_history: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residuals": [float(r) for r in self.final_residuals],
            "converged": self.converged,
            "seed": self.seed,
            "matvecs": self.matvecs,
        }


def splitmix64(seed: int, count: int) -> np.ndarray:
    """``count`` successive outputs of the splitmix64 generator."""
    with np.errstate(over="ignore"):
        state = np.uint64(seed % 2**64) + _GAMMA * np.arange(1, count + 1, dtype=np.uint64)
        z = state
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def random_block(n: int, m: int, seed: int) -> np.ndarray:
    """(n, m) block of uniforms in [-1/2, 1/2), filled column by column."""
    bits = splitmix64(seed, n * m)
    u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53 - 0.5
    return u.reshape(m, n).T.copy()


def block_size(k: int, n: int) -> int:
    return min(n, k + max(2, math.ceil(k / 4)))


def _project_out(V, Q):
    return V - Q @ (Q.T @ V)


def _mgs(V, drop_tol=1e-10):
    cols = []
    for c in range(V.shape[1]):
        v = V[:, c].copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q in cols:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > drop_tol * norm0:
            cols.append(v / nv)
    if not cols:
        return V[:, :0]
    return np.column_stack(cols)


def _orthonormalize(V, Q=None):
    """Orthonormal basis of the part of span(V) outside span(Q).

    CholQR2 when the Gram matrix is well conditioned; otherwise modified
    Gram-Schmidt, dropping directions that are numerically dependent.
    """
    if V.shape[1] == 0:
        return V
    has_q = Q is not None and Q.shape[1] > 0
    if has_q:
        V = _project_out(V, Q)
    norms = np.linalg.norm(V, axis=0)
    V = V[:, norms > 0]
    if V.shape[1] == 0:
        return V
    V = V / norms[norms > 0]
    ev = np.linalg.eigvalsh(V.T @ V)
    if ev[0] > 0 and ev[-1] / ev[0] <= GRAM_COND_LIMIT:
        # CholQR2, with a second projection between the passes
        for _ in range(2):
            L = cholesky(V.T @ V, lower=True)
            V = solve_triangular(L, V.T, lower=True, trans=0).T
            if has_q and _ == 0:
                V = _project_out(V, Q)
        return V
    if has_q:
        return _mgs(np.column_stack([Q, V]))[:, Q.shape[1]:]
    return _mgs(V)


def smallest_k(
    m: SparseSymMatrix,
    k: int,
    tol: float = 1e-7,
    seed: int = 0,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
    preconditioner=None,
) -> tuple[list[EigenPair], SolveReport]:
    """The ``k`` smallest eigenpairs of ``m``, ascending.

    Convergence is declared when every one of the first ``k`` Ritz pairs has
    ``||M x - θ x|| <= tol * θ``.  Without convergence the current Ritz pairs
    are still returned and ``report.converged`` is False.

    ``x0`` optionally supplies starting columns (e.g. from a neighbouring
    sweep point); the block is completed from the seeded generator.
    ``preconditioner`` maps an (n, b) residual block to a search block and
    defaults to the inverse diagonal.
    """
    n = m.n
    if not 1 <= k <= n:
        raise DimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 < tol <= 1e-2:
        raise ValueError(f"tol must lie in (0, 1e-2], got {tol}")
    bs = block_size(k, n)
    if maxiter is None:
        # budget of ~10 n matvecs per requested pair, two block products per sweep
        maxiter = max(200, math.ceil(10 * n * k / (2 * bs)))

    X = random_block(n, bs, seed)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(n, -1)[:, :bs]
        X[:, : x0.shape[1]] = x0
    X = _orthonormalize(X)
    if X.shape[1] < bs:
        X = np.column_stack([X, _orthonormalize(random_block(n, bs - X.shape[1], seed + 1), X)])
    if preconditioner is None:
        inv_diag = 1.0 / m.diagonal()

        def preconditioner(R):
            return R * inv_diag[:, None]

    AX = matvec(m, X)
    nmv = bs
    theta, C = eigh(_sym(X.T @ AX))
    X, AX = X @ C, AX @ C
    P = AP = None
    history = [float(theta[0])]
    it = 0
    converged = False
    while True:
        R = AX - X * theta
        res = np.linalg.norm(R, axis=0)
        done = res <= tol * np.abs(theta)
        if done[:k].all():
            converged = True
            break
        if it >= maxiter:
            break
        it += 1
        active = np.flatnonzero(~done)

        W = _orthonormalize(preconditioner(R[:, active]), X)
        if P is not None and P.shape[1]:
            P = _orthonormalize(P, np.column_stack([X, W]) if W.shape[1] else X)
        blocks = [X, W] + ([P] if P is not None and P.shape[1] else [])
        Q = np.column_stack(blocks)
        AW = matvec(m, W)
        AQ = [AX, AW]
        nmv += W.shape[1]
        if len(blocks) == 3:
            AQ.append(matvec(m, P))
            nmv += P.shape[1]
        AQ = np.column_stack(AQ)

        vals, vecs = eigh(_sym(Q.T @ AQ))
        Cx = vecs[:, :bs]
        theta = vals[:bs]
        X = Q @ Cx
        AX = AQ @ Cx
        # new search directions: the non-X part of the updated active vectors
        Cp = Cx[bs:, :][:, active]
        P = Q[:, bs:] @ Cp
        history.append(float(theta[0]))

    order = np.argsort(theta[:k], kind="stable")
    pairs = [EigenPair(float(theta[c]), X[:, c] / np.linalg.norm(X[:, c])) for c in order]
    report = SolveReport(
        iterations=it,
        final_residuals=[float(res[c]) for c in order],
        converged=converged,
        seed=seed,
        matvecs=nmv,
        ritz_history=history,
    )
    if not converged:
        log.warning("LOBPCG stopped after %d iterations without convergence (max res %.3g)", it, res[:k].max())
    return pairs, report


def _sym(A):
    return 0.5 * (A + A.T)


def residual(m: SparseSymMatrix, pair: EigenPair) -> float:
    v = np.asarray(pair.vector, dtype=float)
    if v.shape[0] != m.n:
        raise DimensionMismatch(f"vector length {v.shape[0]} != {m.n}")
    return float(np.linalg.norm(matvec(m, v) - pair.lam * v))


def amg_preconditioner(m: SparseSymMatrix):
    """One smoothed-aggregation V-cycle per residual column."""
    import pyamg

    # setup estimates spectral radii from np.random start vectors; pin them so
    # repeated runs build the same hierarchy, without touching the caller's stream
    state = np.random.get_state()
    np.random.seed(0)
    try:
        ml = pyamg.smoothed_aggregation_solver(m.csr, symmetry="symmetric", max_coarse=200)
    finally:
        np.random.set_state(state)
    zero = np.zeros(m.n)

    def apply(R):
        out = np.empty_like(R)
        for c in range(R.shape[1]):
            out[:, c] = ml.solve(R[:, c], x0=zero, maxiter=1, cycle="V", tol=1e-300)
        return out

    return apply


def make_preconditioner(m: SparseSymMatrix, kind: str):
    if kind == "jacobi":
        return None
    if kind == "amg":
        return amg_preconditioner(m)
    raise ValueError(f"unknown preconditioner {kind!r}")
