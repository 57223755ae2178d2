"""Combining several source estimates into a single source direction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, DegenerateError, ShapeError, SourceEstimate, save_vector_csv

#: Relative eigen-gap below which the leading eigenvalue counts as repeated.
GAP_TOL = 1e-12


@dataclass(frozen=True)
class SourceBundle:
    estimates: tuple

    def __init__(self, estimates):
        est = tuple(e if isinstance(e, SourceEstimate) else SourceEstimate(e) for e in estimates)
        if not est:
            raise ShapeError("a source bundle needs at least one estimate")
        p = est[0].p
        for k, e in enumerate(est):
            if e.p != p:
                raise ShapeError(f"estimate {k} has length {e.p}, expected {p}")
        object.__setattr__(self, "estimates", est)

    @property
    def K(self) -> int:
        return len(self.estimates)

    @property
    def p(self) -> int:
        return self.estimates[0].p

    def matrix(self) -> np.ndarray:
        """K x p matrix whose rows are the estimates."""
        return np.vstack([e.w_hat for e in self.estimates])

    def normalized(self) -> np.ndarray:
        W = self.matrix()
        norms = np.linalg.norm(W, axis=1)
        if np.any(norms == 0):
            k = int(np.flatnonzero(norms == 0)[0])
            raise DegenerateError(f"source estimate {k} is the zero vector and cannot be normalised")
        return W / norms[:, None]


@dataclass(frozen=True)
class AggregationResult:
    w_agg: np.ndarray
    weights: np.ndarray
    method: str
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "weights": [float(x) for x in self.weights],
            "flags": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.flags.items()},
            "p": int(self.w_agg.shape[0]),
        }

    def save(self, w_path) -> None:
        save_vector_csv(w_path, self.w_agg)


def aggregate_validation(bundle: SourceBundle, val: Dataset) -> AggregationResult:
    """Least-squares combination weights fitted on a validation set.

    Weights minimise ``||Y - X sum_k theta_k w_k||^2``, solved through the
    K x K Gram system of the fitted directions ``X w_k``. A rank-deficient
    Gram matrix is resolved by the minimum-norm solution and flagged.
    """
    if val.p != bundle.p:
        raise ShapeError(f"validation design has {val.p} columns, sources have length {bundle.p}")
    W = bundle.matrix()
    Z = val.X @ W.T
    G = Z.T @ Z
    b = Z.T @ val.Y
    rank = int(np.linalg.matrix_rank(G, hermitian=True))
    theta = np.linalg.pinv(G, hermitian=True) @ b
    return AggregationResult(
        w_agg=W.T @ theta,
        weights=theta,
        method="validation_ls",
        flags={"rank_deficient": rank < bundle.K, "gram_rank": rank},
    )


def _leading_eigenvector(M: np.ndarray) -> tuple[np.ndarray, bool]:
    vals, vecs = np.linalg.eigh(M)
    top = vals[-1]
    scale = max(abs(top), np.finfo(float).tiny)
    in_top = (top - vals) <= GAP_TOL * scale
    degenerate = int(in_top.sum()) > 1
    if not degenerate:
        u = vecs[:, -1]
    else:
        # basis-independent choice: project e_j onto the eigenspace for the
        # smallest j with a nonzero projection
        Q = vecs[:, in_top]
        P = Q @ Q.T
        j = int(np.flatnonzero(np.linalg.norm(P, axis=0) > 1e-8)[0])
        u = P[:, j] / np.linalg.norm(P[:, j])
    lead = int(np.argmax(np.abs(u)))
    if u[lead] < 0:
        u = -u
    return u, degenerate


def aggregate_spectral(bundle: SourceBundle) -> AggregationResult:
    """Weight normalised sources by the absolute leading eigenvector of their Gram matrix.

    Flags: ``degenerate_spectrum`` if the top eigenvalue is repeated (the
    tie-break rule is in :func:`_leading_eigenvector`), ``mixed_sign`` if the
    eigenvector had entries of both signs before taking absolute values.
    """
    Wbar = bundle.normalized()
    u, degenerate = _leading_eigenvector(Wbar @ Wbar.T)
    tol = 1e-12
    mixed = bool(np.any(u > tol) and np.any(u < -tol))
    s_hat = np.abs(u)
    return AggregationResult(
        w_agg=Wbar.T @ s_hat,
        weights=s_hat,
        method="spectral",
        flags={"degenerate_spectrum": degenerate, "mixed_sign": mixed, "eigenvector": u},
    )


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateError("cosine of an angle with a zero vector is undefined")
    return float(a @ b / (na * nb))


def similarity_diagnostics(bundle: SourceBundle, beta_true) -> np.ndarray:
    """Cosines between each source estimate and the true target coefficients."""
    beta_true = np.asarray(beta_true, dtype=np.float64).reshape(-1)
    if beta_true.shape[0] != bundle.p:
        raise ShapeError(f"beta has length {beta_true.shape[0]}, sources have length {bundle.p}")
    return np.array([cosine(e.w_hat, beta_true) for e in bundle.estimates])
