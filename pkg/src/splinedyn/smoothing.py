"""Least-squares and roughness-penalised B-spline smoothing.

All normal equations are assembled directly in LAPACK upper-banded storage
(bandwidth = spline degree), so fits over ~10^5 samples with ~10^4 basis
functions stay cheap.  Leverages for cross validation come from the banded
part of the inverse (Hutchinson & de Hoog style backward recursion), never
from an explicit inverse.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg as la

from .bspline import BSplineBasis, eval_basis, eval_local
from .errors import ConfigError, SingularFitError

log = logging.getLogger(__name__)

DomainKind = Literal["time", "voltage"]

# dense QR fallback is only attempted below this many basis functions
_QR_FALLBACK_MAX = 4000
_COND_RATIO = 1e-6


@dataclass(frozen=True)
class PenaltyMatrix:
    """Gram matrix of the ``m``-th basis derivatives, kept in banded form."""

    banded: np.ndarray  # shape (degree + 1, nbasis), LAPACK upper storage
    m: int

    @property
    def nbasis(self) -> int:
        return self.banded.shape[1]

    @property
    def R(self) -> np.ndarray:
        return _banded_to_dense(self.banded)

    def quad_form(self, c) -> float:
        c = np.asarray(c, dtype=float)
        return float(c @ _banded_matvec(self.banded, c))


@dataclass(frozen=True)
class SmoothFit:
    """A fitted spline ``f(x) = sum_j c_j phi_j(x)``."""

    basis: BSplineBasis
    coefficients: np.ndarray
    lam: float = 0.0
    penalty_order: int = 2
    domain_kind: DomainKind = "time"

    def __call__(self, points, derivative_order: int = 0) -> np.ndarray:
        return evaluate(self, points, derivative_order)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.to_dict(),
            "coefficients": np.asarray(self.coefficients).tolist(),
            "lambda": self.lam,
            "penalty_order": self.penalty_order,
            "domain_kind": self.domain_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothFit":
        return cls(
            basis=BSplineBasis.from_dict(d["basis"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            lam=float(d["lambda"]),
            penalty_order=int(d["penalty_order"]),
            domain_kind=d["domain_kind"],
        )


@dataclass
class SmoothingDiagnostics:
    leverage: np.ndarray
    trace_S: float
    sse: float
    ocv_score: float
    S: np.ndarray | None = field(default=None, repr=False)


# banded helpers ---------------------------------------------------------------

def _banded_to_dense(ab: np.ndarray) -> np.ndarray:
    u, n = ab.shape[0] - 1, ab.shape[1]
    out = np.zeros((n, n))
    for d in range(u + 1):
        diag = ab[u - d, d:]
        idx = np.arange(n - d)
        out[idx, idx + d] = diag
        out[idx + d, idx] = diag
    return out


def _banded_matvec(ab: np.ndarray, c: np.ndarray) -> np.ndarray:
    u = ab.shape[0] - 1
    out = ab[u] * c
    for d in range(1, u + 1):
        diag = ab[u - d, d:]
        out[:-d] += diag * c[d:]
        out[d:] += diag * c[:-d]
    return out


def _gram_banded(first: np.ndarray, vals: np.ndarray, nbasis: int, weights=None) -> np.ndarray:
    """Upper-banded ``sum_i w_i b_i b_i^T`` where row ``i`` is local (first, vals)."""
    order = vals.shape[1]
    u = order - 1
    ab = np.zeros((order, nbasis))
    w = 1.0 if weights is None else weights
    for r in range(order):
        for s in range(r, order):
            d = s - r
            ab[u - d] += np.bincount(first + s, weights=w * vals[:, r] * vals[:, s], minlength=nbasis)[:nbasis]
    return ab


def _rhs(first: np.ndarray, vals: np.ndarray, y: np.ndarray, nbasis: int) -> np.ndarray:
    out = np.zeros(nbasis)
    for r in range(vals.shape[1]):
        out += np.bincount(first + r, weights=vals[:, r] * y, minlength=nbasis)[:nbasis]
    return out


def _apply_local(first: np.ndarray, vals: np.ndarray, c: np.ndarray) -> np.ndarray:
    idx = first[:, None] + np.arange(vals.shape[1])[None, :]
    return np.einsum("ij,ij->i", vals, c[idx])


def _banded_inverse_band(cb: np.ndarray) -> np.ndarray:
    """Entries ``Z[i, i+d]`` (d = 0..u) of ``M^{-1}`` from the upper Cholesky factor.

    ``cb`` is the output of ``scipy.linalg.cholesky_banded`` (upper form,
    ``M = U^T U``).  Uses ``U Z = U^{-T}`` row by row from the bottom; every
    entry needed lies inside the band.
    """
    u, n = cb.shape[0] - 1, cb.shape[1]
    # U[i][d] = U_{i, i+d}
    padded = np.zeros((u + 1, n + u))
    for d in range(u + 1):
        padded[d, : n - d] = cb[u - d, d:]
    U = padded[:, :n].T.tolist()
    Z = [[0.0] * (u + 1) for _ in range(n)]
    for i in range(n - 1, -1, -1):
        Ui = U[i]
        uii = Ui[0]
        kmax = min(u, n - 1 - i)
        Zi = Z[i]
        rows = Z[i + 1 : i + 1 + kmax]
        for d in range(kmax, 0, -1):
            s = 0.0
            for e in range(1, kmax + 1):
                # Z[i+e, i+d] from band storage
                s += Ui[e] * (rows[e - 1][d - e] if e <= d else rows[d - 1][e - d])
            Zi[d] = -s / uii
        s = 0.0
        for e in range(1, kmax + 1):
            s += Ui[e] * Zi[e]
        Zi[0] = (1.0 / uii - s) / uii
    return np.array(Z)


def _leverages(first: np.ndarray, vals: np.ndarray, zband: np.ndarray) -> np.ndarray:
    """Diagonal of ``Phi M^{-1} Phi^T`` from the band of ``M^{-1}``."""
    order = vals.shape[1]
    h = np.zeros(len(first))
    for r in range(order):
        for s in range(order):
            lo = np.minimum(r, s)
            d = abs(s - r)
            h += vals[:, r] * vals[:, s] * zband[first + lo, d]
    return h


# penalty ----------------------------------------------------------------------

def penalty_matrix(basis: BSplineBasis, m: int = 2, quadrature_points_per_span: int | None = None) -> PenaltyMatrix:
    """Roughness penalty ``R_jk = integral D^m phi_j D^m phi_k dx``.

    Gauss-Legendre quadrature on every non-empty knot span; with at least
    ``degree - m + 1`` points the piecewise-polynomial integrand is exact.
    """
    if m < 1 or m > basis.degree:
        raise ConfigError(f"invalid penalty order m={m} for degree {basis.degree}")
    q = basis.degree + 1 if quadrature_points_per_span is None else int(quadrature_points_per_span)
    if q < max(m + 1, basis.degree - m + 1):
        raise ConfigError(f"need at least {max(m + 1, basis.degree - m + 1)} quadrature points per span, got {q}")
    nodes, weights = np.polynomial.legendre.leggauss(q)
    bp = basis.breakpoints
    a, b = bp[:-1], bp[1:]
    half = 0.5 * (b - a)
    xs = (0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]
    ws = half[:, None] * weights[None, :]
    first, vals = eval_local(basis, xs.ravel(), m)
    return PenaltyMatrix(_gram_banded(first, vals, basis.nbasis, ws.ravel()), m)


# fitting ----------------------------------------------------------------------

def _check_xy(basis: BSplineBasis, x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ConfigError(f"x and y lengths differ ({len(x)} != {len(y)})")
    if len(x) < basis.nbasis:
        raise ConfigError(f"need at least nbasis={basis.nbasis} samples, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ConfigError("x and y must be finite")
    return x, y


def _empty_spans(basis: BSplineBasis, x: np.ndarray) -> list[tuple[float, float]]:
    bp = basis.breakpoints
    counts = np.histogram(x, bins=bp)[0]
    return [(float(bp[i]), float(bp[i + 1])) for i in np.flatnonzero(counts == 0)]


def _singular(basis: BSplineBasis, x: np.ndarray) -> SingularFitError:
    empty = _empty_spans(basis, x)
    if empty:
        spans = ", ".join(f"[{a:.6g}, {b:.6g})" for a, b in empty[:5])
        more = f" (+{len(empty) - 5} more)" if len(empty) > 5 else ""
        return SingularFitError(f"rank-deficient normal equations: empty knot span(s) {spans}{more}")
    return SingularFitError("rank-deficient normal equations")


class _System:
    """Banded normal equations for one (basis, x, y) triple, reused across lambda."""

    def __init__(self, basis: BSplineBasis, x: np.ndarray, y: np.ndarray, m: int | None):
        self.basis = basis
        self.x, self.y = x, y
        self.first, self.vals = eval_local(basis, x, 0)
        self.gram = _gram_banded(self.first, self.vals, basis.nbasis)
        self.rhs = _rhs(self.first, self.vals, y, basis.nbasis)
        self.penalty = penalty_matrix(basis, m) if m is not None else None

    def matrix(self, lam: float) -> np.ndarray:
        if lam == 0 or self.penalty is None:
            return self.gram.copy()
        return self.gram + lam * self.penalty.banded

    def factor(self, lam: float) -> np.ndarray:
        M = self.matrix(lam)
        if lam == 0 and np.any(M[-1] <= 0):
            # a basis function with no data in its support
            raise _singular(self.basis, self.x)
        cb = la.cholesky_banded(M, lower=False)
        diag = cb[-1]
        # diag ratio r means cond(M) ~ 1/r^2; QR is only affordable for small bases
        limit = _COND_RATIO if self.basis.nbasis <= _QR_FALLBACK_MAX else 1e-9
        if diag.min() <= limit * diag.max():
            raise la.LinAlgError("ill-conditioned banded factor")
        return cb

    def solve(self, lam: float) -> tuple[np.ndarray, np.ndarray | None]:
        try:
            cb = self.factor(lam)
        except la.LinAlgError:
            log.debug("banded Cholesky unreliable at lambda=%g; falling back to QR", lam)
            return self._solve_qr(lam), None
        return la.cho_solve_banded((cb, False), self.rhs), cb

    def _solve_qr(self, lam: float) -> np.ndarray:
        nb = self.basis.nbasis
        if nb > _QR_FALLBACK_MAX:
            raise _singular(self.basis, self.x)
        Phi = eval_basis(self.basis, self.x).values
        rows, rhs = [Phi], [self.y]
        if lam > 0 and self.penalty is not None:
            w, V = np.linalg.eigh(self.penalty.R)
            # round-off in the null space would otherwise be amplified by lam
            w[w <= 1e-12 * w.max()] = 0.0
            rows.append(np.sqrt(lam * w)[:, None] * V.T)
            rhs.append(np.zeros(nb))
        A = np.vstack(rows)
        Q, Rq = np.linalg.qr(A)
        d = np.abs(np.diag(Rq))
        if d.min() <= 1e-10 * d.max():
            raise _singular(self.basis, self.x)
        return la.solve_triangular(Rq, Q.T @ np.concatenate(rhs))


def fit_least_squares(basis: BSplineBasis, x, y, domain_kind: DomainKind = "time") -> SmoothFit:
    """Ordinary least-squares spline fit."""
    x, y = _check_xy(basis, x, y)
    c, _ = _System(basis, x, y, None).solve(0.0)
    return SmoothFit(basis, c, 0.0, 2, domain_kind)


def fit_penalized(basis: BSplineBasis, x, y, lam: float, m: int = 2, domain_kind: DomainKind = "time") -> SmoothFit:
    """Minimise ``||y - Phi c||^2 + lam c^T R c``."""
    if lam < 0:
        raise ConfigError(f"lambda must be non-negative, got {lam}")
    x, y = _check_xy(basis, x, y)
    c, _ = _System(basis, x, y, m).solve(float(lam))
    return SmoothFit(basis, c, float(lam), m, domain_kind)


def evaluate(fit: SmoothFit, points, derivative_order: int = 0) -> np.ndarray:
    """``D^m f`` at ``points``."""
    if derivative_order > fit.basis.degree:
        raise ConfigError(
            f"derivative order {derivative_order} exceeds spline degree {fit.basis.degree}"
        )
    first, vals = eval_local(fit.basis, points, derivative_order)
    return _apply_local(first, vals, np.asarray(fit.coefficients, dtype=float))


def roughness(fit: SmoothFit, m: int | None = None) -> float:
    """``c^T R c`` for the fit's penalty order (or ``m``)."""
    return penalty_matrix(fit.basis, m or fit.penalty_order).quad_form(fit.coefficients)


def _diagnostics(sys_: _System, lam: float, c: np.ndarray, cb: np.ndarray | None, full: bool) -> SmoothingDiagnostics:
    resid = sys_.y - _apply_local(sys_.first, sys_.vals, c)
    if cb is None:
        cb = la.cholesky_banded(sys_.matrix(lam), lower=False)
    h = _leverages(sys_.first, sys_.vals, _banded_inverse_band(cb))
    S = None
    if full:
        Phi = eval_basis(sys_.basis, sys_.x).values
        S = Phi @ la.cho_solve_banded((cb, False), Phi.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(h >= 1.0):
            score = np.inf
        else:
            score = float(np.mean((resid / (1.0 - h)) ** 2))
    return SmoothingDiagnostics(h, float(h.sum()), float(resid @ resid), score, S)


def smoothing_diagnostics(basis: BSplineBasis, x, y, lam: float = 0.0, m: int = 2, full_matrix: bool = False) -> SmoothingDiagnostics:
    """Leverages, effective degrees of freedom, SSE and OCV score of a fit.

    ``full_matrix=True`` also returns the dense ``n x n`` smoothing matrix.
    """
    x, y = _check_xy(basis, x, y)
    sys_ = _System(basis, x, y, m)
    c, cb = sys_.solve(float(lam))
    return _diagnostics(sys_, float(lam), c, cb, full_matrix)


def select_lambda_ocv(basis: BSplineBasis, x, y, m: int = 2, lambda_grid=None) -> tuple[float, list[float]]:
    """Ordinary cross validation over ``lambda_grid``.

    Returns the minimising lambda (ties go to the larger, smoother value)
    and the score for every grid entry.  Grid values that saturate a
    leverage (``S_ii >= 1``) score ``inf``.
    """
    grid = default_lambda_grid() if lambda_grid is None else [float(v) for v in lambda_grid]
    if not grid:
        raise ConfigError("lambda grid must be non-empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ConfigError("lambda grid must be sorted ascending")
    if grid[0] < 0:
        raise ConfigError("lambda grid values must be non-negative")
    x, y = _check_xy(basis, x, y)
    sys_ = _System(basis, x, y, m)
    scores = []
    for lam in grid:
        try:
            c, cb = sys_.solve(lam)
            diag = _diagnostics(sys_, lam, c, cb, False)
            score = diag.ocv_score
        except (SingularFitError, la.LinAlgError):
            score = np.inf
        if not np.isfinite(score):
            warnings.warn(f"lambda={lam:g} saturates a leverage; skipped", stacklevel=2)
        scores.append(score)
    finite = [s for s in scores if np.isfinite(s)]
    if not finite:
        raise SingularFitError("no lambda in the grid yields a finite OCV score")
    best = min(finite)
    tol = 1e-12 * float(np.mean(y * y)) + 1e-9 * best
    best_idx = max(i for i, s in enumerate(scores) if s <= best + tol)
    return grid[best_idx], scores


def default_lambda_grid(lo_exp: int = -8, hi_exp: int = 2, n: int = 11) -> list[float]:
    return [float(v) for v in np.logspace(lo_exp, hi_exp, n)]


def fit_ocv(basis: BSplineBasis, x, y, m: int = 2, lambda_grid=None, domain_kind: DomainKind = "time") -> tuple[SmoothFit, list[float]]:
    """Select lambda by OCV and return the corresponding penalised fit."""
    lam, scores = select_lambda_ocv(basis, x, y, m, lambda_grid)
    return fit_penalized(basis, x, y, lam, m, domain_kind), scores
