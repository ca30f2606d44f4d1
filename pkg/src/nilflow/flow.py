"""Evolution of nilpotent brackets under the structure-constant flow.

The unnormalized flow mu' = delta_mu(Ric_mu) is the negative gradient flow of
tr(Ric^2) on V_n; adding r(t) mu gives the family of rescaled flows, and
r = tr(Ric^2) keeps ||mu|| = 2 (unit sphere of scalar curvature -1).  The
module also co-integrates the frame h(t) with h' = -(Ric + r I) h, integrates
the equivalent inner-product (metric tensor) flow G' = -2 ric(G), and checks
the structural identities satisfied along every solution.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .algebra import (
    Bracket,
    VTangent,
    _delta_coeffs,
    _delta_transpose_coeffs,
    _gl_action_coeffs,
    bracket_to_dict,
    jacobiator_residual,
)
from .curvature import _ricci, riemann_at_origin
from .exceptions import (
    BadNormalization,
    LossOfPositivity,
    StepSizeUnderflow,
    TooFewSamples,
)

# ---------------------------------------------------------------------------
# Embedded Dormand-Prince 5(4) pair with a PI step-size controller.

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_BHAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B - _DP_BHAT

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_KI = 0.7 / 5  # PI controller exponents for a 5th-order pair
_KP = 0.4 / 5


@dataclass(frozen=True)
class FlowOpts:
    """Integrator options shared by all flows."""

    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = math.inf
    max_samples: int = 8192
    renorm_guard: float = 1e-12
    stops: tuple = ()


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def _thin(samples, keep_head=64):
    """Halve the stored density past the head, preserving the final sample."""
    head = samples[:keep_head]
    tail = samples[keep_head:]
    kept = tail[::2]
    if tail and (len(tail) - 1) % 2 != 0:
        kept.append(tail[-1])
    return head + kept


def _integrate_adaptive(f, t0, y0, t_end, opts, post_accept=None):
    """Generic adaptive integrator.

    Returns (samples, stats): samples is a list of (t, y) at every accepted
    step including t0 (thinned once it exceeds opts.max_samples); stats counts
    accepted/rejected steps and evaluations.  `post_accept(t, y) -> y or None`
    may adjust the state after each accepted step (renormalization guard).
    Raises StepSizeUnderflow when the controller collapses.
    """
    rtol, atol = opts.rtol, opts.atol
    t = float(t0)
    y = np.array(y0, dtype=float)
    stats = {
        "accepted": 0,
        "rejected": 0,
        "nfev": 0,
        "renormalizations": 0,
        "max_norm_drift": 0.0,
        "cone_projections": 0,
        "max_cone_drift": 0.0,
    }

    stops = sorted({float(s) for s in opts.stops if t0 < s < t_end} | {float(t_end)})
    samples = [(t, y.copy())]
    if t_end <= t0:
        return samples, stats

    k1 = f(t, y)
    stats["nfev"] += 1
    h = _initial_step(f, t, y, k1, t_end - t0, rtol, atol)
    stats["nfev"] += 1
    h = min(h, opts.max_step)
    err_prev = 1e-4
    stop_idx = 0

    while t < t_end:
        while stops[stop_idx] <= t:
            stop_idx += 1
        next_stop = stops[stop_idx]
        gap = next_stop - t
        if gap <= 1e-13 * max(1.0, abs(t)):
            # within roundoff of a checkpoint: relabel rather than step
            t = next_stop
            samples[-1] = (t, samples[-1][1])
            continue
        h = min(h, opts.max_step, gap)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g} (h={h:.3e})", trace=samples)
        hitting_stop = h >= gap

        k = [k1]
        for i in range(1, 6):
            yi = y + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
            k.append(f(t + _DP_C[i] * h, yi))
        y_new = y + h * sum(a * kk for a, kk in zip(_DP_A[6], k))
        t_new = next_stop if hitting_stop else t + h
        k.append(f(t_new, y_new))
        stats["nfev"] += 6
        err_vec = h * sum(e * kk for e, kk in zip(_DP_E, k))
        err = _error_norm(err_vec, y, y_new, rtol, atol)

        if err <= 1.0:
            t, y, k1 = t_new, y_new, k[6]
            stats["accepted"] += 1
            if post_accept is not None:
                adjusted = post_accept(t, y, stats)
                if adjusted is not None:
                    y = adjusted
                    k1 = f(t, y)
                    stats["nfev"] += 1
            samples.append((t, y.copy()))
            if len(samples) > opts.max_samples:
                samples = _thin(samples)
            factor = _SAFETY * (err + 1e-300) ** (-_KI) * err_prev**_KP
            err_prev = max(err, 1e-4)
            h = h * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            stats["rejected"] += 1
            h = h * max(_MIN_FACTOR, _SAFETY * err**-0.2)
    return samples, stats


# ---------------------------------------------------------------------------
# Projection onto the cone of nilpotent Lie brackets.
#
# The flow preserves that cone exactly, but it is unstable for the
# discretized dynamics: the energy has lower critical values at non-nilpotent
# brackets (non-Lie points, and Lie points of other types such as so(3)), so
# roundoff transverse to the cone grows exponentially on long normalized
# runs.  By Engel's theorem the cone is cut out by the jacobiator together
# with the vanishing of every power trace x -> tr(ad_x^k); a Gauss-Newton
# projection after accepted steps removes drift while it is at rounding
# level.  The degree-k form is sampled on enough generic probe directions to
# determine it (capped for large n, where long runs are out of scope anyway).

_CONE_TRIGGER = 1e-13  # relative residual that triggers a projection
_CONE_TARGET = 1e-15
_MAX_PROBES = 400


def _probe_directions(n):
    """Deterministic unit probes, one batch per power k = 1..n."""
    sets = []
    rng = np.random.default_rng(1000 + n)
    for k in range(1, n + 1):
        count = min(math.comb(n + k - 1, k), _MAX_PROBES)
        p = rng.standard_normal((count, n))
        sets.append((k, p / np.linalg.norm(p, axis=1, keepdims=True)))
    return sets


def _jacobiator_rows(c, triples):
    t = (
        np.einsum("ija,akm->ijkm", c, c)
        + np.einsum("jka,aim->ijkm", c, c)
        + np.einsum("kia,ajm->ijkm", c, c)
    )
    return np.stack([t[i, j, k] for (i, j, k) in triples]).reshape(-1)


def _jacobi_tangent_rows(c, triples):
    n = c.shape[0]
    rows = []
    for (i, j, k) in triples:
        blk = np.zeros((n, n, n, n))  # output m; input (p, q, r)
        blk[:, i, j, :] += c[:, k, :].T
        blk[:, j, k, :] += c[:, i, :].T
        blk[:, k, i, :] += c[:, j, :].T
        for m in range(n):
            blk[m, :, k, m] += c[i, j, :]
            blk[m, :, i, m] += c[j, k, :]
            blk[m, :, j, m] += c[k, i, :]
        rows.append(blk.reshape(n, -1))
    return np.concatenate(rows, axis=0)


def _cone_system(c, triples, probe_sets, with_tangent):
    """Stacked residuals (and tangent rows) cutting out the nilpotent cone.

    Rows of homogeneity degree k are rescaled by ||c||^(2-k) so every block
    measures drift on the same footing as the jacobiator.
    """
    n = c.shape[0]
    s = max(float(np.linalg.norm(c)), 1e-300)
    res_blocks = []
    tan_blocks = []
    if triples:
        res_blocks.append(_jacobiator_rows(c, triples))
        if with_tangent:
            tan_blocks.append(_jacobi_tangent_rows(c, triples))
    for k, probes in probe_sets:
        w = s ** (2 - k)
        ads = np.einsum("pi,ijk->pkj", probes, c)
        power = np.broadcast_to(np.eye(n), ads.shape).copy()  # ad^(k-1)
        for _ in range(k - 1):
            power = power @ ads
        res_blocks.append(w * np.einsum("pab,pba->p", power, ads))
        if with_tangent:
            rows = (w * k) * np.einsum("pi,pjl->pijl", probes, power)
            tan_blocks.append(rows.reshape(len(probes), -1))
    res = np.concatenate(res_blocks)
    if not with_tangent:
        return res, None
    return res, np.concatenate(tan_blocks, axis=0)


def _cone_drift(c, triples, probe_sets):
    res, _ = _cone_system(c, triples, probe_sets, with_tangent=False)
    return float(np.linalg.norm(res)) / max(float(np.linalg.norm(c)) ** 2, 1e-300)


def _project_to_cone(c, triples, pairs, probe_sets, max_iter=4):
    """Minimum-norm Gauss-Newton correction back onto the nilpotent cone."""
    n = c.shape[0]
    for _ in range(max_iter):
        scale = max(float(np.linalg.norm(c)) ** 2, 1e-300)
        res, tan = _cone_system(c, triples, probe_sets, with_tangent=True)
        if np.linalg.norm(res) <= _CONE_TARGET * scale:
            break
        full = tan.reshape(tan.shape[0], n, n, n)
        a = np.stack([full[:, p, q, :] - full[:, q, p, :] for (p, q) in pairs], axis=1)
        a = a.reshape(tan.shape[0], -1)
        x, *_ = np.linalg.lstsq(a, -res, rcond=None)
        corr = np.zeros((n, n, n))
        for idx, (p, q) in enumerate(pairs):
            corr[p, q, :] = x[idx * n : (idx + 1) * n]
            corr[q, p, :] = -x[idx * n : (idx + 1) * n]
        c = c + corr
    return c


# ---------------------------------------------------------------------------
# Bracket flow traces.

_TRACE_COLUMNS = ("t", "mu_norm", "scal", "tr_ric2", "grad_norm", "r", "jacobi_residual")


@dataclass
class FlowTrace:
    """Sampled solution of a bracket flow with per-sample diagnostics."""

    kind: str  # "unnormalized" | "normalized" | "r"
    times: np.ndarray
    brackets: list
    r_values: np.ndarray
    mu_norm: np.ndarray
    scal: np.ndarray
    tr_ric2: np.ndarray
    grad_norm: np.ndarray
    jacobi_residual: np.ndarray
    stats: dict = field(default_factory=dict)
    r_param: object = None  # None | float | callable, echoes the request
    h: list | None = None

    def __len__(self):
        return len(self.times)

    @property
    def initial_bracket(self) -> Bracket:
        return self.brackets[0]

    @property
    def final_bracket(self) -> Bracket:
        return self.brackets[-1]

    def index_of_time(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a sample of this trace")
        return i

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_TRACE_COLUMNS)
            for i in range(len(self.times)):
                writer.writerow(
                    [
                        repr(float(v))
                        for v in (
                            self.times[i],
                            self.mu_norm[i],
                            self.scal[i],
                            self.tr_ric2[i],
                            self.grad_norm[i],
                            self.r_values[i],
                            self.jacobi_residual[i],
                        )
                    ]
                )

    def snapshots_to_json(self, path) -> None:
        """Sidecar document with the bracket coefficients per sample index."""
        doc = {
            "kind": self.kind,
            "snapshots": [
                {"index": i, "t": float(self.times[i]), "bracket": bracket_to_dict(self.brackets[i])}
                for i in range(len(self.times))
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")


def trace_from_csv(path) -> dict:
    """Parse a trace CSV back into column arrays (no bracket snapshots)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        rows = [[float(v) for v in row] for row in reader]
    cols = np.array(rows).T if rows else np.zeros((len(_TRACE_COLUMNS), 0))
    return dict(zip(_TRACE_COLUMNS, cols))


def _finish_trace(kind, samples, stats, n, r_kind, r_param):
    times = np.array([t for t, _ in samples])
    brackets = [Bracket(y.reshape(n, n, n)) for _, y in samples]
    m = len(brackets)
    mu_norm = np.empty(m)
    scal = np.empty(m)
    tr_ric2 = np.empty(m)
    grad_norm = np.empty(m)
    jac_res = np.empty(m)
    r_values = np.empty(m)
    for i, b in enumerate(brackets):
        c = b.coeffs
        ric = _ricci(c)
        mu_norm[i] = np.linalg.norm(c)
        scal[i] = -0.25 * mu_norm[i] ** 2
        tr_ric2[i] = np.sum(ric * ric)
        grad_norm[i] = np.linalg.norm(_delta_coeffs(c, ric))
        jac_res[i] = jacobiator_residual(b)
        if r_kind == "zero":
            r_values[i] = 0.0
        elif r_kind == "scalar":
            r_values[i] = tr_ric2[i]
        elif r_kind == "const":
            r_values[i] = r_param
        else:
            r_values[i] = r_param(b)
    return FlowTrace(
        kind=kind,
        times=times,
        brackets=brackets,
        r_values=r_values,
        mu_norm=mu_norm,
        scal=scal,
        tr_ric2=tr_ric2,
        grad_norm=grad_norm,
        jacobi_residual=jac_res,
        stats=stats,
        r_param=r_param,
    )


def _make_rhs(n, r_kind, r_param):
    def rhs(t, yflat):
        c = yflat.reshape(n, n, n)
        ric = _ricci(c)
        d = _delta_coeffs(c, ric)
        if r_kind == "scalar":
            d = d + float(np.sum(ric * ric)) * c
        elif r_kind == "const":
            d = d + r_param * c
        elif r_kind == "callable":
            d = d + float(r_param(Bracket(c))) * c
        return d.reshape(-1)

    return rhs


def _run_bracket_flow(b0, t_max, opts, kind, r_kind, r_param, renormalize):
    opts = opts or FlowOpts()
    n = b0.n
    rhs = _make_rhs(n, r_kind, r_param)
    triples = list(itertools.combinations(range(n), 3))
    pairs = list(itertools.combinations(range(n), 2))
    probe_sets = _probe_directions(n)

    def post(t, y, stats):
        adjusted = None
        c = y.reshape(n, n, n)
        rel = _cone_drift(c, triples, probe_sets)
        stats["max_cone_drift"] = max(stats["max_cone_drift"], rel)
        if rel > _CONE_TRIGGER:
            stats["cone_projections"] += 1
            adjusted = _project_to_cone(c, triples, pairs, probe_sets).reshape(-1)
        if renormalize:
            v = y if adjusted is None else adjusted
            nrm = float(np.linalg.norm(v))
            drift = abs(nrm - 2.0)
            stats["max_norm_drift"] = max(stats["max_norm_drift"], drift)
            if drift > opts.renorm_guard and nrm > 0.0:
                stats["renormalizations"] += 1
                adjusted = v * (2.0 / nrm)
        return adjusted

    samples, stats = _integrate_adaptive(rhs, 0.0, b0.coeffs.reshape(-1), t_max, opts, post_accept=post)
    stats["t_final"] = samples[-1][0]
    return _finish_trace(kind, samples, stats, n, r_kind, r_param)


def integrate_bracket_flow(b0: Bracket, t_max: float, opts: FlowOpts | None = None) -> FlowTrace:
    """Unnormalized flow mu' = delta_mu(Ric_mu); ||mu|| is nonincreasing and
    the solution exists for all positive time."""
    return _run_bracket_flow(b0, t_max, opts, "unnormalized", "zero", None, renormalize=False)


def integrate_normalized_flow(b0: Bracket, t_max: float, opts: FlowOpts | None = None) -> FlowTrace:
    """Scalar-curvature normalized flow mu' = delta_mu(Ric_mu) + tr(Ric^2) mu.

    Requires ||mu_0|| = 2 (scal = -1) to 1e-10 and keeps the solution on that
    sphere, renormalizing after accepted steps whenever the drift exceeds the
    guard (counted in stats).
    """
    drift = abs(b0.norm - 2.0)
    if drift > 1e-10:
        raise BadNormalization(
            f"initial bracket is off the sphere ||mu|| = 2 by {drift:.3e}; rescale explicitly"
        )
    return _run_bracket_flow(b0, t_max, opts, "normalized", "scalar", None, renormalize=True)


def integrate_r_normalized(b0: Bracket, r, t_max: float, opts: FlowOpts | None = None) -> FlowTrace:
    """Flow mu' = delta_mu(Ric_mu) + r mu for a constant or per-bracket rate.

    r may be None/0 (reproducing the unnormalized flow exactly), a float, or
    a callable Bracket -> float.
    """
    if r is None or (isinstance(r, (int, float)) and float(r) == 0.0):
        return _run_bracket_flow(b0, t_max, opts, "r", "zero", None, renormalize=False)
    if isinstance(r, (int, float)):
        return _run_bracket_flow(b0, t_max, opts, "r", "const", float(r), renormalize=False)
    if not callable(r):
        raise TypeError("r must be None, a number, or a callable Bracket -> float")
    return _run_bracket_flow(b0, t_max, opts, "r", "callable", r, renormalize=False)


# ---------------------------------------------------------------------------
# Companion frame h(t) and the equivalent inner-product flow.


def _trace_r_kind(trace: FlowTrace, r):
    """Resolve the rate data for co-integration: samples and their slopes."""
    if r is None:
        if trace.kind == "normalized":
            return "scalar", None
        if trace.kind == "unnormalized":
            return "zero", None
        rp = trace.r_param
        if rp is None:
            return "zero", None
        if isinstance(rp, (int, float)):
            return "const", float(rp)
        return "callable", rp
    if isinstance(r, (int, float)):
        return ("zero", None) if float(r) == 0.0 else ("const", float(r))
    if callable(r):
        return "callable", r
    raise TypeError("r must be None, a number, or a callable Bracket -> float")


def cointegrate_h(trace: FlowTrace, r=None) -> list:
    """Integrate h' = -(Ric_{mu(t)} + r(t) I) h, h(0) = I, along a stored trace.

    Ric between samples comes from a cubic Hermite interpolant whose slopes
    use the exact identity d/dt Ric = -1/2 laplacian(Ric) + 2 r Ric.  Returns
    one matrix per trace sample; h(t) pulls the initial bracket onto the
    trace: mu(t) = h(t).mu(0).
    """
    n = trace.brackets[0].n
    m = len(trace)
    if m == 1:
        return [np.eye(n)]
    r_kind, r_param = _trace_r_kind(trace, r)

    rics = np.empty((m, n, n))
    drics = np.empty((m, n, n))
    r_vals = np.empty(m)
    for i, b in enumerate(trace.brackets):
        c = b.coeffs
        ric = _ricci(c)
        rics[i] = ric
        if r_kind == "zero":
            r_vals[i] = 0.0
        elif r_kind == "scalar":
            r_vals[i] = np.sum(ric * ric)
        elif r_kind == "const":
            r_vals[i] = r_param
        else:
            r_vals[i] = float(r_param(b))
        lap = _delta_transpose_coeffs(c, _delta_coeffs(c, ric))
        lap = 0.5 * (lap + lap.T)
        drics[i] = -0.5 * lap + 2.0 * r_vals[i] * ric

    ric_spline = CubicHermiteSpline(trace.times, rics, drics, axis=0)
    if r_kind == "zero":
        r_of_t = lambda t: 0.0
    elif r_kind == "const":
        r_of_t = lambda t: r_param
    elif r_kind == "scalar":
        dr = 2.0 * np.einsum("mij,mij->m", rics, drics)
        r_spline = CubicHermiteSpline(trace.times, r_vals, dr)
        r_of_t = lambda t: float(r_spline(t))
    else:
        dr = np.gradient(r_vals, trace.times)
        r_spline = CubicHermiteSpline(trace.times, r_vals, dr)
        r_of_t = lambda t: float(r_spline(t))

    def rhs(t, hflat):
        hmat = hflat.reshape(n, n)
        a = ric_spline(t) + r_of_t(t) * np.eye(n)
        return (-a @ hmat).reshape(-1)

    hs = [np.eye(n)]
    sub_opts = FlowOpts(rtol=1e-10, atol=1e-12)
    y = np.eye(n).reshape(-1)
    for i in range(m - 1):
        segs, _ = _integrate_adaptive(rhs, trace.times[i], y, trace.times[i + 1], sub_opts)
        y = segs[-1][1]
        hs.append(y.reshape(n, n).copy())
    return hs


@dataclass
class InnerProductTrace:
    """Sampled solution of the metric-tensor flow G' = -2 ric(G) (+ -2 r G)."""

    times: np.ndarray
    metrics: list
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def index_of_time(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a sample of this trace")
        return i


def _ip_ricci_products(c0, g):
    """Cholesky change of basis for a fixed bracket and evolving metric G.

    Returns (L, ric_nu) with G = L L^T and ric_nu the Ricci operator of the
    pushed bracket (L^T).mu_0; the metric-flow right side is -2 L ric_nu L^T
    and the Ricci operator of (G, mu_0) in the original frame is
    L^{-T} ric_nu L^T.
    """
    lmat = np.linalg.cholesky(g)
    h = lmat.T
    hinv = np.linalg.inv(h)
    c_nu = _gl_action_coeffs(h, hinv, c0)
    return lmat, _ricci(c_nu), c_nu


def innerproduct_scal(b0: Bracket, g: np.ndarray) -> float:
    """Scalar curvature of the metric G paired with the fixed bracket b0."""
    _, _, c_nu = _ip_ricci_products(b0.coeffs, np.asarray(g, float))
    return -0.25 * float(np.sum(c_nu * c_nu))


def integrate_innerproduct_flow(
    b0: Bracket, t_max: float, opts: FlowOpts | None = None, r=None
) -> InnerProductTrace:
    """Metric-tensor flow with the bracket held fixed at b0.

    r follows the same convention as the bracket flows: None for the
    unnormalized flow, "scalar" for tr(Ric^2), or a constant.  The states are
    Gram matrices; a failed Cholesky raises LossOfPositivity with the partial
    trace attached.
    """
    opts = opts or FlowOpts()
    n = b0.n
    c0 = b0.coeffs
    if isinstance(r, str) and r != "scalar":
        raise ValueError("string r must be 'scalar'")

    def rhs(t, gflat):
        g = gflat.reshape(n, n)
        g = 0.5 * (g + g.T)
        try:
            lmat, ric_nu, _ = _ip_ricci_products(c0, g)
        except np.linalg.LinAlgError:
            raise LossOfPositivity(f"metric lost positivity at t={t:.6g}", trace=None) from None
        dg = -2.0 * lmat @ ric_nu @ lmat.T
        if r == "scalar":
            dg = dg - 2.0 * float(np.sum(ric_nu * ric_nu)) * g
        elif isinstance(r, (int, float)) and r is not None:
            dg = dg - 2.0 * float(r) * g
        return dg.reshape(-1)

    samples, stats = _integrate_adaptive(rhs, 0.0, np.eye(n).reshape(-1), t_max, opts)
    stats["t_final"] = samples[-1][0]
    times = np.array([t for t, _ in samples])
    metrics = [0.5 * (y.reshape(n, n) + y.reshape(n, n).T) for _, y in samples]
    return InnerProductTrace(times=times, metrics=metrics, stats=stats)


# ---------------------------------------------------------------------------
# Structural checks along traces.


@dataclass(frozen=True)
class IdentityReport:
    """Finite-difference check of d/dt scal = 2 tr Ric^2 and
    d/dt ||mu||^2 = -8 tr Ric^2 at interior samples."""

    max_rel_err_scal: float
    max_rel_err_norm: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return max(self.max_rel_err_scal, self.max_rel_err_norm) < self.tolerance


def _interior_derivative(times, values):
    """Derivative at the interior nodes of a nonuniform grid.

    Fits a quartic through the five nearest nodes (falling back to the
    three-point formula when the grid is too short); windows are rescaled to
    O(1) before the fit to keep the Vandermonde solve well conditioned.
    """
    m = len(times)
    if m < 5:
        t0, t1, t2 = times[:-2], times[1:-1], times[2:]
        f0, f1, f2 = values[:-2], values[1:-1], values[2:]
        d1 = t1 - t0
        d2 = t2 - t1
        return (
            -d2 / (d1 * (d1 + d2)) * f0
            + (d2 - d1) / (d1 * d2) * f1
            + d1 / (d2 * (d1 + d2)) * f2
        )
    out = np.empty(m - 2)
    for j in range(1, m - 1):
        lo = min(max(0, j - 2), m - 5)
        ts = times[lo : lo + 5] - times[j]
        s = ts[-1] - ts[0]
        coef = np.polyfit(ts / s, values[lo : lo + 5], deg=4)
        out[j - 1] = coef[-2] / s
    return out


def verify_flow_identities(trace: FlowTrace, tolerance: float = 1e-4) -> IdentityReport:
    """Check the exact first-order identities of the unnormalized flow by
    differentiating the stored diagnostics; requires a dense enough trace."""
    if trace.kind != "unnormalized" and not (trace.kind == "r" and np.all(trace.r_values == 0.0)):
        raise ValueError("flow identities hold for the unnormalized flow only")
    if len(trace) < 3:
        raise TooFewSamples(f"need at least 3 samples, trace has {len(trace)}")
    t = trace.times
    f_mid = trace.tr_ric2[1:-1]
    dscal = _interior_derivative(t, trace.scal)
    dnorm2 = _interior_derivative(t, trace.mu_norm**2)
    scale = np.maximum(2.0 * f_mid, 1e-12)
    rel_scal = np.abs(dscal - 2.0 * f_mid) / scale
    rel_norm = np.abs(dnorm2 + 8.0 * f_mid) / (4.0 * scale)
    return IdentityReport(
        max_rel_err_scal=float(rel_scal.max()),
        max_rel_err_norm=float(rel_norm.max()),
        tolerance=tolerance,
    )


@dataclass(frozen=True)
class Type3Report:
    """Empirical type-III bounds along an unnormalized trace."""

    sup_t_riemann: float
    sup_t_ricci: float
    sup_norm_ratio: float  # sup of t ||mu||^2 / (2n); <= 1 is the proven bound
    ricci_bound_ratio: float  # sup of t ||Ric|| / (sqrt(3) n / 2)

    @property
    def norm_bound_ok(self) -> bool:
        return self.sup_norm_ratio <= 1.0 + 1e-9

    @property
    def ricci_bound_ok(self) -> bool:
        return self.ricci_bound_ratio <= 1.0 + 1e-9

    def to_dict(self) -> dict:
        return {
            "sup_t_riemann": self.sup_t_riemann,
            "sup_t_ricci": self.sup_t_ricci,
            "sup_norm_ratio": self.sup_norm_ratio,
            "ricci_bound_ratio": self.ricci_bound_ratio,
            "norm_bound_ok": self.norm_bound_ok,
            "ricci_bound_ok": self.ricci_bound_ok,
        }


def type3_certificate(trace: FlowTrace) -> Type3Report:
    """Certificate that curvature decays like C/t along the unnormalized flow.

    sup t ||mu(t)||^2 <= 2n is a theorem; the Riemann constant is estimated
    empirically and reported, never asserted.
    """
    if trace.kind not in ("unnormalized", "r"):
        raise ValueError("type-III bounds apply to the unnormalized flow")
    n = trace.brackets[0].n
    sup_riem = 0.0
    sup_ric = 0.0
    sup_norm = 0.0
    for i in range(len(trace)):
        t = float(trace.times[i])
        if t == 0.0:
            continue
        b = trace.brackets[i]
        sup_riem = max(sup_riem, t * riemann_at_origin(b).norm)
        sup_ric = max(sup_ric, t * math.sqrt(float(trace.tr_ric2[i])))
        sup_norm = max(sup_norm, t * float(trace.mu_norm[i]) ** 2)
    return Type3Report(
        sup_t_riemann=sup_riem,
        sup_t_ricci=sup_ric,
        sup_norm_ratio=sup_norm / (2.0 * n),
        ricci_bound_ratio=sup_ric / (math.sqrt(3.0) * n / 2.0),
    )


# ---------------------------------------------------------------------------
# Equivalence of the three presentations of the same flow.


@dataclass(frozen=True)
class EquivalenceReport:
    """Residuals tying the bracket flow, the frame h(t), and the metric flow.

    max_pullback_residual: sup_t ||mu(t) - h(t).mu_0|| / ||mu(t)||
    max_gram_residual:     sup_t ||G(t) - h(t)^T h(t)|| / ||G(t)||
    max_scal_mismatch:     sup_t |scal(G(t), mu_0) - scal(mu(t))| (relative)
    """

    max_pullback_residual: float
    max_gram_residual: float
    max_scal_mismatch: float
    times: np.ndarray

    def ok(self, tol: float) -> bool:
        return max(self.max_pullback_residual, self.max_gram_residual) < tol

    def to_dict(self) -> dict:
        return {
            "max_pullback_residual": self.max_pullback_residual,
            "max_gram_residual": self.max_gram_residual,
            "max_scal_mismatch": self.max_scal_mismatch,
        }


def equivalence_report(
    b0: Bracket,
    t_max: float,
    opts: FlowOpts | None = None,
    r=None,
    checkpoints: int = 26,
) -> EquivalenceReport:
    """Run the same geometry three ways and compare at shared checkpoints.

    The bracket flow is integrated once; h(t) is co-integrated along it; the
    inner-product flow is integrated independently with the bracket fixed.
    r is None for the unnormalized flow, a constant rate, or the string
    "scalar" for the tr(Ric^2)-normalized flow.
    """
    opts = opts or FlowOpts()
    grid = np.linspace(0.0, t_max, checkpoints)
    opts = replace(opts, stops=tuple(grid[1:-1]))

    if isinstance(r, str):
        if r != "scalar":
            raise ValueError("string r must be 'scalar'")
        trace = integrate_normalized_flow(b0, t_max, opts)
        hs = cointegrate_h(trace)
        ip_r = "scalar"
    else:
        if r is not None and not isinstance(r, (int, float)):
            raise TypeError("equivalence supports r = None, a constant, or 'scalar'")
        trace = integrate_r_normalized(b0, r, t_max, opts)
        hs = cointegrate_h(trace, r)
        ip_r = float(r) if isinstance(r, (int, float)) and float(r) != 0.0 else None
    ip = integrate_innerproduct_flow(b0, t_max, opts, r=ip_r)

    c0 = b0.coeffs
    max_pull = 0.0
    for i in range(len(trace)):
        h = hs[i]
        hinv = np.linalg.inv(h)
        pulled = _gl_action_coeffs(h, hinv, c0)
        num = np.linalg.norm(trace.brackets[i].coeffs - pulled)
        max_pull = max(max_pull, num / max(trace.mu_norm[i], 1e-300))

    max_gram = 0.0
    max_scal = 0.0
    for t in grid:
        i = trace.index_of_time(float(t))
        j = ip.index_of_time(float(t))
        g = ip.metrics[j]
        hth = hs[i].T @ hs[i]
        max_gram = max(max_gram, np.linalg.norm(g - hth) / max(np.linalg.norm(g), 1e-300))
        scal_ip = innerproduct_scal(b0, g)
        max_scal = max(max_scal, abs(scal_ip - trace.scal[i]) / max(abs(trace.scal[i]), 1e-300))
    return EquivalenceReport(
        max_pullback_residual=max_pull,
        max_gram_residual=max_gram,
        max_scal_mismatch=max_scal,
        times=grid,
    )
