"""Curvature of the left-invariant metric attached to a nilpotent bracket.

All quantities are evaluated at the identity in the canonical orthonormal
basis: the Ricci operator, scalar curvature, the full Riemann tensor, the
energy tr(Ric^2) with its gradient on V_n, the flow Laplacian, and the
scale-invariant moment map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import Operator, VTangent, _delta_coeffs, _delta_transpose_coeffs
from .exceptions import DimensionMismatch, ZeroBracket


def _ricci(c: np.ndarray) -> np.ndarray:
    m1 = np.einsum("iak,ibk->ab", c, c)
    m2 = np.einsum("ija,ijb->ab", c, c)
    return -0.5 * m1 + 0.25 * m2


def ricci_operator(b: VTangent) -> Operator:
    """Ricci operator -1/2 sum_i (ad e_i)^t ad e_i + 1/4 sum_i ad e_i (ad e_i)^t.

    Defined for every skew bracket; symmetric by construction.
    """
    return _ricci(b.coeffs)


def ricci_form(b: VTangent) -> Operator:
    """Ricci as a bilinear form on basis pairs; independent contraction path
    used as a cross-check of ricci_operator."""
    c = b.coeffs
    t1 = np.einsum("xij,yij->xy", c, c)
    t2 = np.einsum("ijx,ijy->xy", c, c)
    return -0.5 * t1 + 0.25 * t2


def scalar_curvature(b: VTangent) -> float:
    """scal = -||mu||^2 / 4 (equals tr of the Ricci operator)."""
    return -0.25 * b.norm**2


def ricci_sign_check(b: VTangent, tol: float = 1e-12) -> tuple:
    """(has_negative_direction, has_positive_direction) from the Ricci spectrum.

    Every nonzero nilpotent bracket has both.
    """
    eigs = np.linalg.eigvalsh(ricci_operator(b))
    scale = max(float(np.abs(eigs).max()), 1e-300)
    return bool(eigs.min() < -tol * scale), bool(eigs.max() > tol * scale)


def connection_operators(b: VTangent) -> np.ndarray:
    """Left-invariant connection: gamma[r][i, j] = <nabla_{e_r} e_j, e_i>.

    Each gamma[r] is skew (metric connection in an orthonormal frame).
    """
    c = b.coeffs
    return 0.5 * (c.transpose(0, 2, 1) - c.transpose(2, 1, 0) + c.transpose(1, 0, 2))


@dataclass(frozen=True, eq=False)
class RiemannTensor:
    """Curvature tensor at the identity; entries[i, j, k, l] = R_ijkl with the
    index convention fixed so that sum_k R_ikjk is the Ricci form."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def sectional(self, i: int, j: int) -> float:
        return float(self.entries[i, j, i, j])

    def ricci_contraction(self) -> Operator:
        return np.einsum("ikjk->ij", self.entries)


def riemann_at_origin(b: VTangent) -> RiemannTensor:
    """Riemann tensor R(x,y) = [nabla_x, nabla_y] - nabla_{mu(x,y)}, lowered
    so that the Ricci contraction sum_k R_ikjk reproduces ricci_operator."""
    gam = connection_operators(b)
    c = b.coeffs
    prod = np.einsum("iab,jbc->ijac", gam, gam)
    comm = prod - prod.transpose(1, 0, 2, 3)
    adterm = np.einsum("ija,abc->ijbc", c, gam)
    # entry [i, j, k, l] = <R(e_i, e_j) e_l, e_k>
    return RiemannTensor(comm - adterm)


def ricci_energy(b: VTangent) -> float:
    """tr(Ric^2) — the functional whose negative gradient drives the flow."""
    ric = _ricci(b.coeffs)
    return float(np.sum(ric * ric))


def ricci_energy_gradient(b: VTangent) -> VTangent:
    """Gradient of tr(Ric^2) on V_n: -delta_mu(Ric_mu)."""
    c = b.coeffs
    return VTangent(-_delta_coeffs(c, _ricci(c)))


def laplacian_delta(b: VTangent, alpha: Operator) -> Operator:
    """Flow Laplacian: symmetrized delta^t(delta(alpha)).

    Along the unnormalized flow, d/dt Ric = -1/2 laplacian_delta(b, Ric).
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (b.n, b.n):
        raise DimensionMismatch(f"operator shape {alpha.shape} does not match n={b.n}")
    c = b.coeffs
    out = _delta_transpose_coeffs(c, _delta_coeffs(c, alpha))
    return 0.5 * (out + out.T)


def moment_map(b: VTangent) -> Operator:
    """Scale-invariant moment map 4 Ric_mu / ||mu||^2; trace is identically -1."""
    nrm2 = b.norm**2
    if nrm2 == 0.0:
        raise ZeroBracket("moment map undefined at the zero bracket")
    return 4.0 * _ricci(b.coeffs) / nrm2


@dataclass(frozen=True, eq=False)
class CurvaturePack:
    """Bundle of pointwise curvature data for reports."""

    ricci: Operator
    spectrum: np.ndarray
    scal: float
    ricci_norm: float
    energy: float

    def to_dict(self) -> dict:
        return {
            "ricci": [[float(v) for v in row] for row in self.ricci],
            "ricci_spectrum": [float(v) for v in self.spectrum],
            "scal": float(self.scal),
            "ricci_norm": float(self.ricci_norm),
            "energy": float(self.energy),
        }


def curvature_pack(b: VTangent) -> CurvaturePack:
    ric = ricci_operator(b)
    return CurvaturePack(
        ricci=ric,
        spectrum=np.linalg.eigvalsh(ric),
        scal=scalar_curvature(b),
        ricci_norm=float(np.linalg.norm(ric)),
        energy=float(np.sum(ric * ric)),
    )
