"""Group law in exponential coordinates and the induced left-invariant metric.

For a nilpotent bracket the exp-coordinate product x . y = x + y + p(x, y) is
a polynomial: the commutator series truncates once nested words exceed the
nilpotency degree.  Differentials of left translations are computed with
forward-mode dual numbers (never finite differences); the Gram matrices of the
translated frame give the metric, whose entries are polynomials of degree at
most 2(k - 1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import Bracket, VTangent, nilpotency_degree
from .exceptions import BracketFormatError, DegreeTooHigh, DimensionMismatch

# ---------------------------------------------------------------------------
# Truncated commutator series for log(exp x exp y), as a word table.


def _compositions(total, parts):
    for cuts in itertools.combinations(range(1, total), parts - 1):
        prev = 0
        out = []
        for c in cuts + (total,):
            out.append(c - prev)
            prev = c
        yield tuple(out)


@lru_cache(maxsize=None)
def _series_words(depth: int):
    """Word-coefficient table of the exp-product series, all words of length
    <= depth.  Words are 0/1 tuples (0 = first argument, 1 = second) evaluated
    as right-nested commutators; deeper words vanish on brackets of nilpotency
    degree <= depth.  Linear words carry coefficient exactly 1.
    """
    table = {}
    for total in range(1, depth + 1):
        for m in range(1, total + 1):
            sign = 1.0 if m % 2 == 1 else -1.0
            for comp in _compositions(total, m):
                splits = [[(p, d - p) for p in range(d + 1)] for d in comp]
                for pq in itertools.product(*splits):
                    word = []
                    denom = m * total
                    for p, q in pq:
                        word.extend([0] * p)
                        word.extend([1] * q)
                        denom *= math.factorial(p) * math.factorial(q)
                    w = tuple(word)
                    table[w] = table.get(w, 0.0) + sign / denom
    out = []
    for w, coeff in sorted(table.items(), key=lambda t: (len(t[0]), t[0])):
        if len(w) >= 2 and w[-1] == w[-2]:
            continue  # innermost commutator vanishes identically
        if abs(coeff) < 1e-300:
            continue
        out.append((w, coeff))
    return tuple(out)


def _eval_series(c, depth, x, y):
    z = x + y
    letters = (x, y)
    for word, coeff in _series_words(depth):
        if len(word) == 1:
            continue  # linear part handled above
        acc = letters[word[-1]]
        for idx in word[-2::-1]:
            acc = np.einsum("ijk,i,j->k", c, letters[idx], acc)
        z = z + coeff * acc
    return z


def _mu_jet(c, a, b):
    val = np.einsum("ijk,i,j->k", c, a[0], b[0])
    jac = np.einsum("ijk,i,jm->km", c, a[0], b[1]) + np.einsum("ijk,im,j->km", c, a[1], b[0])
    return val, jac


def _eval_series_jet(c, depth, x, y):
    """Same series on dual-number vectors (value, jacobian-of-seeds) pairs."""
    val = x[0] + y[0]
    jac = x[1] + y[1]
    letters = (x, y)
    for word, coeff in _series_words(depth):
        if len(word) == 1:
            continue
        acc = letters[word[-1]]
        for idx in word[-2::-1]:
            acc = _mu_jet(c, letters[idx], acc)
        val = val + coeff * acc[0]
        jac = jac + coeff * acc[1]
    return val, jac


def _resolve_degree(b, degree):
    if degree is None:
        degree = nilpotency_degree(b)
    return max(1, int(degree))


def _as_vector(b, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (b.n,):
        raise DimensionMismatch(f"expected a vector of length {b.n}, got shape {x.shape}")
    return x


def bch_product(b: Bracket, x, y, degree: int | None = None) -> np.ndarray:
    """Group product in exponential coordinates; exact for nilpotent brackets.

    0 is the identity and -x the inverse.  `degree` short-circuits the
    nilpotency computation when the caller already knows it.
    """
    x, y = _as_vector(b, x), _as_vector(b, y)
    return _eval_series(b.coeffs, _resolve_degree(b, degree), x, y)


def translation_jacobian(b: Bracket, z, x, degree: int | None = None) -> np.ndarray:
    """Differential at x of the left translation w -> z . w."""
    z, x = _as_vector(b, z), _as_vector(b, x)
    n = b.n
    jz = (z, np.zeros((n, n)))
    jx = (x, np.eye(n))
    _, jac = _eval_series_jet(b.coeffs, _resolve_degree(b, degree), jz, jx)
    return jac


def left_translation_differential(b: Bracket, x, degree: int | None = None) -> np.ndarray:
    """Differential at x of translation by the inverse of x.

    Columns are the coordinate expressions of the left-invariant frame at x
    pulled back to the identity; computed with dual numbers.
    """
    x = _as_vector(b, x)
    return translation_jacobian(b, -x, x, degree)


def metric_at(b: Bracket, x, degree: int | None = None) -> np.ndarray:
    """Left-invariant metric in coordinates: Gram matrix J(x)^T J(x)."""
    j = left_translation_differential(b, x, degree)
    return j.T @ j


# ---------------------------------------------------------------------------
# Polynomial coefficient tables for the metric entries.


def _multiindices(n, degree):
    out = [idx for idx in itertools.product(range(degree + 1), repeat=n) if sum(idx) <= degree]
    out.sort(key=lambda a: (sum(a), a))
    return out


@dataclass(frozen=True, eq=False)
class MetricField:
    """Polynomial metric g_ij(x) = sum_alpha coefficients[alpha][i, j] x^alpha.

    coefficients maps multi-indices (tuples of n nonnegative ints) to
    symmetric (n, n) matrices.
    """

    n: int
    degree: int
    coefficients: dict

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected a vector of length {self.n}")
        out = np.zeros((self.n, self.n))
        for alpha, mat in self.coefficients.items():
            out += mat * np.prod(x**np.asarray(alpha))
        return out

    def derivative(self, beta) -> "MetricField":
        """Partial derivative field d^beta g (coefficient-exact)."""
        beta = tuple(int(v) for v in beta)
        if len(beta) != self.n or any(v < 0 for v in beta):
            raise DimensionMismatch(f"bad derivative multi-index {beta}")
        coeffs = {}
        for alpha, mat in self.coefficients.items():
            if any(a < bta for a, bta in zip(alpha, beta)):
                continue
            factor = 1.0
            for a, bta in zip(alpha, beta):
                factor *= math.factorial(a) / math.factorial(a - bta)
            new_alpha = tuple(a - bta for a, bta in zip(alpha, beta))
            coeffs[new_alpha] = coeffs.get(new_alpha, 0.0) + factor * mat
        return MetricField(self.n, max(0, self.degree - sum(beta)), coeffs)

    def to_dict(self) -> dict:
        entries = []
        for alpha in sorted(self.coefficients, key=lambda a: (sum(a), a)):
            mat = self.coefficients[alpha]
            for i in range(self.n):
                for j in range(i, self.n):
                    v = mat[i, j]
                    if v != 0.0:
                        entries.append(
                            {"i": i + 1, "j": j + 1, "alpha": list(alpha), "value": float(v)}
                        )
        return {"n": self.n, "degree": self.degree, "coefficients": entries}

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricField":
        try:
            n = int(obj["n"])
            degree = int(obj["degree"])
            raw = obj["coefficients"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BracketFormatError(f"malformed metric-field document: {exc}") from None
        coeffs = {}
        for entry in raw:
            i, j = int(entry["i"]) - 1, int(entry["j"]) - 1
            alpha = tuple(int(v) for v in entry["alpha"])
            v = float(entry["value"])
            if not (0 <= i <= j < n) or len(alpha) != n or min(alpha) < 0:
                raise BracketFormatError(f"bad metric-field entry {entry}")
            mat = coeffs.setdefault(alpha, np.zeros((n, n)))
            mat[i, j] = v
            mat[j, i] = v
        return cls(n, degree, coeffs)


def metric_field_2step(b: Bracket) -> MetricField:
    """Closed-form metric coefficients, valid for nilpotency degree <= 2:

        g_ij(x) = delta_ij - 1/2 (mu_kj^i + mu_ki^j) x_k
                  + 1/4 (sum_r mu_ki^r mu_lj^r) x_k x_l
    """
    k = nilpotency_degree(b)
    if k > 2:
        raise DegreeTooHigh(f"closed form requires degree <= 2, bracket has degree {k}")
    n = b.n
    c = b.coeffs
    coeffs = {(0,) * n: np.eye(n)}
    for r in range(n):
        mat = -0.5 * (c[r].T + c[r])
        if np.any(mat != 0.0):
            alpha = tuple(1 if t == r else 0 for t in range(n))
            coeffs[alpha] = mat
    for p in range(n):
        for q in range(p, n):
            if p == q:
                mat = 0.25 * (c[p] @ c[p].T)
            else:
                mat = 0.25 * (c[p] @ c[q].T + c[q] @ c[p].T)
            if np.any(mat != 0.0):
                alpha = tuple((2 if t == p else 0) if p == q else (1 if t in (p, q) else 0) for t in range(n))
                coeffs[alpha] = mat
    return MetricField(n, 2 if k == 2 else 0, coeffs)


def metric_field_fit(b: Bracket, degree: int | None = None) -> MetricField:
    """Recover the exact polynomial coefficients of the metric entries by
    sampling metric_at on an integer lattice (scaled into [-1, 1]^n) and
    solving the generalized Vandermonde system by least squares."""
    k = nilpotency_degree(b)
    d = max(0, 2 * (k - 1))
    n = b.n
    alphas = _multiindices(n, d)
    if d == 0:
        return MetricField(n, 0, {alphas[0]: metric_at(b, np.zeros(n), degree=max(1, k))})

    span = np.arange(-d, d + 1) / d
    if (2 * d + 1) ** n <= 4096:
        pts = np.array(list(itertools.product(span, repeat=n)))
    else:
        rng = np.random.default_rng(2 * d + 3 * n)
        need = 3 * len(alphas)
        seen, rows = set(), []
        while len(rows) < need:
            cand = tuple(rng.integers(-d, d + 1, size=n))
            if cand not in seen:
                seen.add(cand)
                rows.append(cand)
        pts = np.array(rows, dtype=float) / d
    if len(pts) < len(alphas):
        raise DegreeTooHigh(f"not enough sample points ({len(pts)}) for {len(alphas)} monomials")

    exps = np.array(alphas)  # (n_alpha, n)
    vand = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)  # (n_pts, n_alpha)
    values = np.array([metric_at(b, x, degree=max(1, k)) for x in pts])  # (n_pts, n, n)
    sol, *_ = np.linalg.lstsq(vand, values.reshape(len(pts), n * n), rcond=None)
    coeffs = {}
    for row, alpha in zip(sol.reshape(len(alphas), n, n), alphas):
        mat = 0.5 * (row + row.T)
        if np.abs(mat).max() > 0.0:
            coeffs[alpha] = mat
    return MetricField(n, d, coeffs)


def metric_convergence_distance(
    b1: Bracket,
    b2: Bracket,
    radius: float,
    p: int = 2,
    rng: np.random.Generator | None = None,
) -> float:
    """Sup over a ball of |d^beta (g_1 - g_2)_ij| for all |beta| <= p.

    Evaluated exactly from the fitted coefficient tables on 3^n lattice points
    scaled to the ball plus 100 random interior points (seeded by default, so
    the result is deterministic).
    """
    if b1.n != b2.n:
        raise DimensionMismatch(f"dimension mismatch: {b1.n} vs {b2.n}")
    n = b1.n
    f1 = metric_field_fit(b1)
    f2 = metric_field_fit(b2)
    diff_coeffs = {}
    for alpha in set(f1.coefficients) | set(f2.coefficients):
        mat = f1.coefficients.get(alpha, 0.0) - f2.coefficients.get(alpha, 0.0)
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (n, n):
            mat = np.zeros((n, n))
        diff_coeffs[alpha] = mat
    diff = MetricField(n, max(f1.degree, f2.degree), diff_coeffs)

    lattice = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n))) * (radius / math.sqrt(n))
    if rng is None:
        rng = np.random.default_rng(0)
    dirs = rng.standard_normal((100, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(100) ** (1.0 / n)
    points = np.vstack([lattice, dirs * radii[:, None]])

    worst = 0.0
    for beta in _multiindices(n, p):
        field = diff.derivative(beta)
        if not field.coefficients:
            continue
        for x in points:
            worst = max(worst, float(np.abs(field(x)).max()))
    return worst
