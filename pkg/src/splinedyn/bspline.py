"""B-spline bases on clamped knot vectors.

Values come from the Cox-de Boor recursion evaluated span by span, so only
the ``order`` functions that are nonzero at a point are ever computed.  The
dense :class:`BasisMatrix` is built from that local form; large smoothing
problems use :func:`eval_local` directly and never materialise it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

MAX_DEGREE = 7


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis.

    Parameters
    ----------
    knots : ndarray
        Full knot vector, including the ``order``-fold repeated end knots.
    degree : int
        Polynomial degree; ``order = degree + 1``.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1:
            raise ConfigError("knot vector must be one-dimensional")
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ConfigError(f"degree must be in [0, {MAX_DEGREE}], got {self.degree}")
        if len(knots) < 2 * self.order:
            raise ConfigError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise ConfigError("knot vector must be non-decreasing")
        if not knots[self.degree] < knots[-self.order]:
            raise ConfigError("knot vector spans an empty domain")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def order(self) -> int:
        return self.degree + 1

    @property
    def nbasis(self) -> int:
        return len(self.knots) - self.order

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.order])

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knots inside the domain, endpoints included."""
        lo, hi = self.domain
        inner = self.knots[self.degree : len(self.knots) - self.degree]
        return np.unique(inner[(inner >= lo) & (inner <= hi)])

    def greville(self) -> np.ndarray:
        """Greville abscissae; these coefficients reproduce ``f(x) = x``."""
        if self.degree == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        idx = np.arange(self.nbasis)[:, None] + np.arange(1, self.order)[None, :]
        return self.knots[idx].mean(axis=1)

    def support(self, j: int) -> tuple[float, float]:
        """Closed interval outside of which basis function ``j`` vanishes."""
        return float(self.knots[j]), float(self.knots[j + self.order])

    def to_dict(self) -> dict:
        return {"degree": self.degree, "knots": self.knots.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BSplineBasis":
        return cls(np.asarray(d["knots"], dtype=float), int(d["degree"]))


@dataclass
class BasisMatrix:
    """Dense evaluation of every basis function (or a derivative) at points."""

    values: np.ndarray
    eval_points: np.ndarray
    derivative_order: int
    # set when derivative_order exceeds the degree; values are then all zero
    zero_derivative: bool = field(default=False)


def make_uniform_basis(domain_lo: float, domain_hi: float, grid_size: int, degree: int) -> BSplineBasis:
    """Clamped basis with ``grid_size`` equal intervals on ``[domain_lo, domain_hi]``.

    ``grid_size`` counts knot intervals, so the basis has
    ``degree + grid_size`` functions (17 intervals of cubics give 20).
    """
    if not domain_lo < domain_hi:
        raise DomainError(f"invalid domain: lo={domain_lo} must be < hi={domain_hi}")
    if grid_size < 2:
        raise ConfigError(f"grid_size must be >= 2, got {grid_size}")
    if not 0 <= degree <= MAX_DEGREE:
        raise ConfigError(f"degree must be in [0, {MAX_DEGREE}], got {degree}")
    grid = np.linspace(domain_lo, domain_hi, grid_size + 1)
    knots = np.concatenate([np.full(degree, domain_lo), grid, np.full(degree, domain_hi)])
    return BSplineBasis(knots, degree)


def find_spans(basis: BSplineBasis, x: np.ndarray) -> np.ndarray:
    """Index ``mu`` with ``knots[mu] <= x < knots[mu + 1]``; the last span is closed."""
    lo, hi = basis.domain
    x = np.asarray(x, dtype=float)
    if x.size and (not np.all(np.isfinite(x)) or x.min() < lo or x.max() > hi):
        bad = x[~((x >= lo) & (x <= hi))]
        raise DomainError(f"point {bad[0]!r} outside basis domain [{lo}, {hi}]")
    k = basis.knots
    mu = np.searchsorted(k, x, side="right") - 1
    # right endpoint belongs to the last non-empty span
    last = len(k) - basis.order - 1
    while k[last] == k[last + 1]:
        last -= 1
    return np.clip(mu, basis.degree, last)


def _local_values(knots: np.ndarray, mu: np.ndarray, x: np.ndarray, degree: int) -> np.ndarray:
    """Nonzero degree-``degree`` basis values at ``x``, columns ``mu-degree .. mu``.

    Triangular Cox-de Boor recursion; 0/0 terms from repeated knots are 0.
    """
    n = len(x)
    vals = np.ones((n, 1))
    for q in range(1, degree + 1):
        new = np.zeros((n, q + 1))
        for r in range(q):
            # basis index i = mu - (q - 1) + r at degree q - 1
            i = mu - (q - 1) + r
            left = knots[i]
            right = knots[i + q]
            den = right - left
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(den > 0, vals[:, r] / np.where(den > 0, den, 1.0), 0.0)
            new[:, r] += (right - x) * w
            new[:, r + 1] += (x - left) * w
        vals = new
    return vals


def eval_local(basis: BSplineBasis, points, derivative_order: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero entries of the basis (derivative) matrix.

    Returns
    -------
    first : ndarray of int, shape (n,)
        Column of the first nonzero function at each point.
    values : ndarray, shape (n, order)
        ``values[i, r]`` is ``D^m phi_{first[i] + r}(x_i)``.
    """
    x = np.atleast_1d(np.asarray(points, dtype=float))
    p = basis.degree
    m = int(derivative_order)
    if m < 0:
        raise ConfigError("derivative_order must be non-negative")
    mu = find_spans(basis, x)
    first = mu - p
    if m > p:
        return first, np.zeros((len(x), basis.order))
    k = basis.knots
    vals = _local_values(k, mu, x, p - m)
    for q in range(p - m + 1, p + 1):
        # D phi_{i,q} = q (phi_{i,q-1}/(k[i+q]-k[i]) - phi_{i+1,q-1}/(k[i+q+1]-k[i+1]))
        n = len(x)
        padded = np.zeros((n, q + 1))
        padded[:, 1:] = vals  # indices mu-q .. mu at degree q-1; first slot is zero
        new = np.zeros((n, q + 1))
        for r in range(q + 1):
            i = mu - q + r
            den_a = k[i + q] - k[i]
            a = np.where(den_a > 0, padded[:, r] / np.where(den_a > 0, den_a, 1.0), 0.0)
            if r < q:
                den_b = k[i + q + 1] - k[i + 1]
                b = np.where(den_b > 0, padded[:, r + 1] / np.where(den_b > 0, den_b, 1.0), 0.0)
            else:
                b = 0.0
            new[:, r] = q * (a - b)
        vals = new
    return first, vals


def eval_basis(basis: BSplineBasis, points, derivative_order: int = 0) -> BasisMatrix:
    """Dense ``n x nbasis`` matrix of ``D^m phi_j(x_i)``."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    zero = derivative_order > basis.degree
    if zero:
        warnings.warn(
            f"derivative order {derivative_order} exceeds degree {basis.degree}; returning zeros",
            stacklevel=2,
        )
    first, vals = eval_local(basis, x, derivative_order)
    dense = np.zeros((len(x), basis.nbasis))
    rows = np.repeat(np.arange(len(x)), basis.order)
    cols = (first[:, None] + np.arange(basis.order)[None, :]).ravel()
    dense[rows, cols] = vals.ravel()
    return BasisMatrix(dense, x, int(derivative_order), zero)


def cox_de_boor(basis: BSplineBasis, j: int, x: float, degree: int | None = None) -> float:
    """Scalar recursive definition of ``phi_{j,degree}(x)``; slow, used as a reference."""
    k = basis.knots
    d = basis.degree if degree is None else degree
    lo, hi = basis.domain
    if d == 0:
        if k[j] <= x < k[j + 1]:
            return 1.0
        # closed last span
        if x == hi and k[j] < k[j + 1] == hi:
            return 1.0
        return 0.0
    out = 0.0
    den = k[j + d] - k[j]
    if den > 0:
        out += (x - k[j]) / den * cox_de_boor(basis, j, x, d - 1)
    den = k[j + d + 1] - k[j + 1]
    if den > 0:
        out += (k[j + d + 1] - x) / den * cox_de_boor(basis, j + 1, x, d - 1)
    return out
