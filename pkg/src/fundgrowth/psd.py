"""Symmetric positive-semidefinite matrix primitives.

Everything downstream (simulation, filtering, shrinkage, backtesting) pushes
covariance-like matrices around: covariance *rates* against an operational
clock and cumulative integrated covariances.  This module fixes the numerical
conventions once: symmetrisation on input, eigenvalue clamping, matrix square
roots, orthogonal projections onto fund spans, and pseudo-inverses restricted
to a projection subspace.

All values are immutable after construction and all operations are pure, so
they are safe for unrestricted concurrent use.
"""

from __future__ import annotations

import numpy as np

from .errors import RankDeficient, SingularOnSubspace

# Input gate: relative asymmetry above this rejects the matrix outright.
SYM_RTOL = 1e-12
# Negative eigenvalues no worse than -EIG_DUST_RTOL * lambda_max count as
# round-off dust and are clamped to zero; anything below is a hard failure.
EIG_DUST_RTOL = 1e-10
# Spectral cutoff for the subspace pseudo-inverse, relative to trace.
SUBSPACE_CUTOFF_RTOL = 1e-12


class CovMatrix:
    """A symmetric positive-semidefinite matrix with cached eigendecomposition.

    Entries are symmetrised as ``(m + m.T)/2`` on construction (tolerating the
    asymmetric round-off that accumulation produces), eigenvalues are stored
    nonincreasing, and negative dust above ``-1e-10 * lambda_max`` is clamped
    to zero.  A genuinely indefinite input raises ``ValueError``.
    """

    __slots__ = ("entries", "eigenvalues", "eigenvectors")

    def __init__(self, entries):
        m = np.array(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        scale = float(np.abs(m).max())
        if scale > 0.0 and float(np.abs(m - m.T).max()) > SYM_RTOL * scale:
            raise ValueError("matrix is not symmetric to 1e-12 relative tolerance")
        m = 0.5 * (m + m.T)
        w, v = np.linalg.eigh(m)
        lam_max = max(float(w[-1]), 0.0)
        if float(w[0]) < -EIG_DUST_RTOL * lam_max:
            raise ValueError(
                f"matrix is not positive semidefinite (min eigenvalue {float(w[0]):.3e})"
            )
        w = np.clip(w, 0.0, None)
        self.entries = m
        self.eigenvalues = w[::-1].copy()          # nonincreasing
        self.eigenvectors = v[:, ::-1].copy()      # columns match eigenvalues
        for arr in (self.entries, self.eigenvalues, self.eigenvectors):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def __repr__(self) -> str:
        return f"CovMatrix(dim={self.dim}, eigenvalues={self.eigenvalues})"


class Projection:
    """An orthogonal projection matrix; rank is the trace rounded to integer.

    Construction validates ``p @ p == p`` and ``p.T == p`` to 1e-10 absolute
    tolerance.
    """

    __slots__ = ("entries", "rank")

    def __init__(self, entries):
        p = np.array(entries, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
            raise ValueError(f"expected a nonempty square matrix, got shape {p.shape}")
        if float(np.abs(p - p.T).max()) > 1e-10:
            raise ValueError("projection matrix is not symmetric")
        if float(np.abs(p @ p - p).max()) > 1e-10:
            raise ValueError("projection matrix is not idempotent")
        self.entries = 0.5 * (p + p.T)
        self.rank = int(round(float(np.trace(p))))
        self.entries.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Projection":
        return cls(np.eye(dim))

    def __repr__(self) -> str:
        return f"Projection(dim={self.dim}, rank={self.rank})"


def sqrt_entries(m: CovMatrix) -> np.ndarray:
    """Raw entries of the PSD square root; skips re-wrapping as a CovMatrix.

    Monte-Carlo sweeps call this once per path, so avoiding the construction
    round trip matters.
    """
    root = (m.eigenvectors * np.sqrt(m.eigenvalues)) @ m.eigenvectors.T
    return 0.5 * (root + root.T)


def mat_sqrt(m: CovMatrix) -> CovMatrix:
    """Symmetric PSD square root, computed in the cached eigenbasis."""
    return CovMatrix(sqrt_entries(m))


def projection_from_frame(f: np.ndarray) -> Projection:
    """Orthogonal projection onto the column span of a full-column-rank frame.

    Raises ``RankDeficient`` when the smallest singular value of ``f`` falls
    below ``1e-10`` times the largest.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or f.shape[1] == 0 or f.shape[0] < f.shape[1]:
        raise ValueError(f"expected a tall dim x k frame, got shape {f.shape}")
    sv = np.linalg.svd(f, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("frame columns are numerically dependent")
    q, _ = np.linalg.qr(f)
    p = q @ q.T
    return Projection(0.5 * (p + p.T))


def subspace_pinv(c: CovMatrix, p: Projection) -> np.ndarray:
    """Inverse of ``p c p`` viewed as a linear map on the range of ``p``.

    The result vanishes on ``ker(p)``.  Realised by eigendecomposition with a
    spectral cutoff of ``1e-12 * trace(c)`` so the subspace semantics stay
    explicit; raises ``SingularOnSubspace`` when the restriction has fewer
    eigenvalues above the cutoff than ``rank(p)``.
    """
    if c.dim != p.dim:
        raise ValueError(f"dimension mismatch: c is {c.dim}, p is {p.dim}")
    a = p.entries @ c.entries @ p.entries
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    cutoff = SUBSPACE_CUTOFF_RTOL * max(c.trace, 0.0)
    keep = w > cutoff
    if int(keep.sum()) < p.rank:
        raise SingularOnSubspace(
            f"restriction to the rank-{p.rank} subspace is numerically singular"
        )
    vk = v[:, keep]
    return (vk / w[keep]) @ vk.T


def check_lemma_error_reduction(c: CovMatrix, p: Projection) -> float:
    """Smallest eigenvalue of ``c - c (p c p)^+ c``.

    Nonnegative up to round-off for every PSD ``c`` and projection ``p``: a
    restricted universe never increases the estimation loss it quantifies.
    """
    pinv = subspace_pinv(c, p)
    diff = c.entries - c.entries @ pinv @ c.entries
    diff = 0.5 * (diff + diff.T)
    return float(np.linalg.eigvalsh(diff)[0])
