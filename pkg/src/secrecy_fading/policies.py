"""Optimal and heuristic power-allocation policies under an average power budget.

Four transmitter-CSI regimes are covered:

* full CSI (both gains known): closed-form water-filling-like map, one dual
  variable fixed by the average-power equation;
* main-channel CSI only: per-state transcendental optimality condition,
  tabulated on a gain grid;
* on/off: constant power above a gain threshold;
* constant rate (single codeword interleaved over fading): non-concave, we
  return a stationary point of the Lagrangian, not a certified optimum.

Powers are linear SNR with unit noise variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .config import SolverConfig
from .fading import RayleighFadingPair, pdf, quantile
from .numerics import (
    BracketError,
    ConvergenceError,
    Tolerance,
    exp_scaled_e1,
    find_root_bracketed,
    find_roots_vectorized,
    graded_gauss_legendre,
)

__all__ = [
    "PowerConstraint",
    "FullCsiPolicy",
    "TabulatedPolicy",
    "MainCsiPolicy",
    "ConstantRatePolicy",
    "OnOffPolicy",
    "ConstantPolicy",
    "SolverError",
    "full_csi_power",
    "solve_full_csi",
    "main_csi_cutoff",
    "main_csi_condition",
    "main_csi_marginal",
    "main_csi_power",
    "solve_main_csi",
    "make_onoff",
    "optimize_onoff_threshold",
    "constant_rate_marginal",
    "solve_constant_rate",
    "eaves_moment",
    "wedge_rule",
]

_GL64 = np.polynomial.legendre.leggauss(64)
_GL8 = np.polynomial.legendre.leggauss(8)
# relative floor of the per-state power search, as a multiple of p_bar
_P_FLOOR = 1e-14


class SolverError(ConvergenceError):
    """A dual-variable search failed; ``diagnostics`` says where."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class PowerConstraint:
    p_bar: float

    def __post_init__(self):
        if not self.p_bar > 0:
            raise ValueError(f"average power must be positive, got {self.p_bar}")


# ---------------------------------------------------------------------------
# Full CSI
# ---------------------------------------------------------------------------

def full_csi_power(h_m, h_e, lam: float):
    """Optimal power when both gains are known, for dual variable ``lam``.

    Positive root of h_M/(1+h_M P) - h_E/(1+h_E P) = lam, clipped at zero.
    Written as 2(d/lam - 1) / (h_M + h_E + sqrt(d^2 + 4 d h_M h_E / lam))
    with d = h_M - h_E: algebraically the textbook closed form, but free of
    cancellation and exact at h_E = 0. Transmits only where d > lam.
    """
    if not lam > 0:
        raise ValueError("dual variable must be positive")
    hm = np.asarray(h_m, dtype=float)
    he = np.asarray(h_e, dtype=float)
    if np.any(hm < 0) or np.any(he < 0):
        raise ValueError("channel gains must be non-negative")
    d = np.maximum(hm - he, 0.0)
    num = 2.0 * (d / lam - 1.0)
    den = hm + he + np.sqrt(d * d + 4.0 * d * hm * he / lam)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        p = np.where(d > lam, num / den, 0.0)
    return float(p) if p.ndim == 0 else p


def wedge_rule(model: RayleighFadingPair, lam: float, cfg: SolverConfig):
    """Tensor quadrature over the transmission region h_M > h_E + lam.

    Coordinates (h_E, u) with h_M = h_E + lam + u; both axes use panels
    graded toward zero on the scale of ``lam``, where the power map bends.
    Returns (h_m, h_e, weights) with the product density folded into the
    weights. Each axis is truncated at the configured tail quantile.
    """
    q = cfg.tail_quantile
    he_hi = quantile(q, model.gamma_e)
    u_hi = quantile(q, model.gamma_m)
    fine = min(lam, model.gamma_m, model.gamma_e) / 8.0
    he, whe = graded_gauss_legendre(0.0, he_hi, fine, 16, max_width=2.0 * model.gamma_e)
    u, wu = graded_gauss_legendre(0.0, u_hi, fine, 16, max_width=2.0 * model.gamma_m)
    HE = he[:, None]
    HM = HE + lam + u[None, :]
    W = (whe * pdf(he, model.gamma_e))[:, None] * (wu[None, :] * pdf(HM, model.gamma_m))
    return HM, np.broadcast_to(HE, HM.shape), W


def _full_csi_average_power(model, lam, cfg) -> float:
    hm, he, w = wedge_rule(model, lam, cfg)
    return float(np.sum(w * full_csi_power(hm, he, lam)))


@dataclass(frozen=True)
class FullCsiPolicy:
    lam: float
    model: RayleighFadingPair
    p_bar: float
    realized_power: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def power(self, h_m, h_e):
        return full_csi_power(h_m, h_e, self.lam)


def _solve_dual(excess, lo: float, hi: float, cfg: SolverConfig, label: str) -> Tuple[float, dict]:
    """Find log(lambda) where the power excess changes sign.

    ``excess(t)`` is E{P}/p_bar - 1 at lambda = exp(t); it must decrease in t.
    The initial bracket is widened by factors of 100 on either side.
    """
    diag = {"evaluations": 0}

    def counted(t):
        diag["evaluations"] += 1
        return excess(t)

    step = math.log(100.0)
    f_lo = counted(lo)
    for _ in range(30):
        if f_lo >= 0:
            break
        lo -= step
        f_lo = counted(lo)
    else:
        raise SolverError(f"{label}: no lambda small enough to spend the power budget", diag)
    f_hi = counted(hi)
    for _ in range(30):
        if f_hi <= 0:
            break
        hi += step
        f_hi = counted(hi)
    else:
        raise SolverError(f"{label}: no lambda large enough to meet the power budget", diag)
    diag["lambda_bracket"] = (math.exp(lo), math.exp(hi))
    try:
        t = find_root_bracketed(counted, lo, hi, Tolerance(rel=1e-15, abs=cfg.lambda_tol, max_iter=200))
    except (ConvergenceError, BracketError) as exc:
        raise SolverError(f"{label}: dual search failed: {exc}", diag) from exc
    return math.exp(t), diag


def solve_full_csi(
    model: RayleighFadingPair, constraint: PowerConstraint, cfg: SolverConfig = SolverConfig()
) -> FullCsiPolicy:
    """Pick lambda so the full-CSI policy spends exactly ``p_bar`` on average.

    Average power is strictly decreasing in lambda, so a bracketed search on
    log(lambda) starting from [1e-8, 1e4] suffices.
    """
    p_bar = constraint.p_bar

    def excess(t):
        return _full_csi_average_power(model, math.exp(t), cfg) / p_bar - 1.0

    lam, diag = _solve_dual(excess, math.log(1e-8), math.log(1e4), cfg, "full CSI")
    realized = _full_csi_average_power(model, lam, cfg)
    return FullCsiPolicy(lam, model, p_bar, realized, diag)


# ---------------------------------------------------------------------------
# Tabulated policies of h_M alone
# ---------------------------------------------------------------------------

def _shape_preserved(values: np.ndarray, probed: np.ndarray) -> bool:
    # a monotone table must stay monotone between knots
    d = np.diff(values)
    scale = 1e-12 * max(float(np.max(np.abs(values))), 1.0)
    if np.all(d >= 0):
        return bool(np.all(np.diff(probed) >= -scale))
    if np.all(d <= 0):
        return bool(np.all(np.diff(probed) <= scale))
    return False


@dataclass(frozen=True)
class TabulatedPolicy:
    """P(h_M): zero up to ``cutoff``, a monotone cubic in log h_M through ``knots`` above it.

    ``knots[0] == cutoff`` and ``values[0]`` is the right limit there (zero
    for the main-CSI policy, possibly positive for the constant-rate one).
    Beyond the last knot the last value is held.
    """

    lam: float
    model: RayleighFadingPair
    p_bar: float
    cutoff: float
    knots: np.ndarray
    values: np.ndarray
    realized_power: float = math.nan
    diagnostics: dict = field(default_factory=dict, compare=False)

    @cached_property
    def _interp(self):
        """Cubic spline in log h_M, or pchip if the spline would lose monotonicity."""
        if len(self.knots) < 2:
            return None
        t = np.log(self.knots)
        if len(self.knots) >= 4:
            spline = CubicSpline(t, self.values)
            probe = np.linspace(t[0], t[-1], 16 * len(t))
            if _shape_preserved(self.values, spline(probe)):
                return lambda h: spline(np.log(h))
        pchip = PchipInterpolator(t, self.values, extrapolate=False)
        return lambda h: pchip(np.log(h))

    def power(self, h_m, h_e=None):
        h = np.asarray(h_m, dtype=float)
        out = np.zeros(h.shape)
        if self._interp is None:
            return float(out) if out.ndim == 0 else out
        on = h > self.cutoff
        out[on] = self._interp(np.minimum(h[on], self.knots[-1]))
        return float(out) if out.ndim == 0 else out

    def quadrature(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and f(h_M)-weighted weights covering the transmission range.

        Eight Gauss points per knot interval, so integrals of smooth
        functionals of the interpolant are exact to rounding.
        """
        return _knot_quadrature(self.knots, self.model.gamma_m)

    def average_power(self) -> float:
        if len(self.knots) < 2:
            return 0.0
        h, w = self.quadrature()
        return float(np.sum(w * self.power(h)))


@dataclass(frozen=True)
class MainCsiPolicy(TabulatedPolicy):
    pass


@dataclass(frozen=True)
class ConstantRatePolicy(TabulatedPolicy):
    converged: bool = True
    kkt_residual: float = 0.0


def _knot_quadrature(knots: np.ndarray, gamma_m: float):
    x, w = _GL8
    lo, hi = knots[:-1, None], knots[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w * pdf(nodes, gamma_m)
    return nodes.ravel(), weights.ravel()


def _gain_grid(model: RayleighFadingPair, cfg: SolverConfig) -> np.ndarray:
    lo = quantile(1e-8, model.gamma_m)
    hi = quantile(cfg.tail_quantile, model.gamma_m)
    return np.geomspace(lo, hi, cfg.grid_points)


def eaves_moment(P, upper, gamma_e: float):
    """int_0^upper h_E f(h_E) / (1 + h_E P) dh_E, elementwise.

    Substituting u = log(1 + h_E P) turns the 1/(1 + h_E P) layer near the
    origin into a smooth integrand, so a fixed 64-point Gauss rule is
    accurate for every P > 0.
    """
    P, upper = np.broadcast_arrays(np.asarray(P, dtype=float), np.asarray(upper, dtype=float))
    x, w = _GL64
    span = np.log1p(upper * P)[..., None]
    u = 0.5 * span * (x + 1.0)
    he = np.expm1(u) / P[..., None]
    vals = he * np.exp(-he / gamma_e) / (gamma_e * P[..., None])
    return np.sum(0.5 * span * w * vals, axis=-1)


# ---------------------------------------------------------------------------
# Main-channel CSI
# ---------------------------------------------------------------------------

def _zero_power_slope(h, gamma_e):
    # h - E{h_E 1(h_E <= h)} / ... = h - gamma_e (1 - exp(-h/gamma_e)); series for small h
    c = np.asarray(h, dtype=float) / gamma_e
    series = c * c / 2.0 - c ** 3 / 6.0 + c ** 4 / 24.0 - c ** 5 / 120.0
    return gamma_e * np.where(c < 1e-2, series, c + np.expm1(-c))


def main_csi_cutoff(lam: float, model: RayleighFadingPair) -> float:
    """Largest h_M at which the main-CSI policy is still silent.

    The marginal secrecy rate at P = 0 is h - gamma_E (1 - exp(-h/gamma_E)),
    increasing in h; power is positive exactly where it exceeds lam.
    """
    hi = max(lam, model.gamma_e)
    while _zero_power_slope(hi, model.gamma_e) <= lam:
        hi *= 2.0
    return find_root_bracketed(
        lambda h: float(_zero_power_slope(h, model.gamma_e)) - lam,
        0.0, hi, Tolerance(rel=1e-15, abs=0.0, max_iter=400),
    )


def main_csi_marginal(P, h_m, lam: float, model: RayleighFadingPair):
    """d/dP of the per-state Lagrangian under main-channel CSI.

    h Pr(h_E <= h) / (1 + h P) - int_0^h h_E f(h_E) / (1 + h_E P) dh_E - lam.
    Decreasing in P (the per-state objective is concave).
    """
    h = np.asarray(h_m, dtype=float)
    frac = -np.expm1(-h / model.gamma_e)
    return h * frac / (1.0 + h * P) - eaves_moment(P, h, model.gamma_e) - lam


def main_csi_condition(P, h_m, lam: float, model: RayleighFadingPair):
    """The Rayleigh optimality condition written with exponential integrals.

    Same function as :func:`main_csi_marginal`, evaluated in the closed
    form. Loses accuracy when 1/(gamma_E P) is large; used for cross-checks.
    """
    P = np.asarray(P, dtype=float)
    h = np.asarray(h_m, dtype=float)
    ge = model.gamma_e
    frac = -np.expm1(-h / ge)
    x = 1.0 / (ge * P)
    # exp(x) [E1(x) - E1(x + h/ge)] without overflow
    diff = exp_scaled_e1(x) - np.exp(-h / ge) * exp_scaled_e1(x + h / ge)
    return frac * h / (1.0 + h * P) - lam - frac / P + diff / (ge * P * P)


def main_csi_power(
    h_m: float, lam: float, model: RayleighFadingPair, p_max: float = 1e6
) -> float:
    """Optimal main-CSI power at a single state h_M (0 when none is positive)."""
    if h_m < 0 or not lam > 0:
        raise ValueError("need h_m >= 0 and lam > 0")
    if h_m <= main_csi_cutoff(lam, model):
        return 0.0
    g = lambda t: float(main_csi_marginal(math.exp(t), h_m, lam, model))
    lo = math.log(p_max * 1e-20)
    hi = math.log(p_max)
    if g(hi) >= 0:
        return p_max
    if g(lo) <= 0:
        return 0.0
    return math.exp(find_root_bracketed(g, lo, hi, Tolerance(rel=1e-15, abs=0.0, max_iter=400)))


def _main_csi_table(lam, model, grid, p_bar, cfg):
    cutoff = main_csi_cutoff(lam, model)
    nodes = grid[grid > cutoff * (1.0 + 1e-9)]
    if nodes.size == 0:
        return cutoff, np.array([cutoff]), np.array([0.0])
    p_lo = p_bar * _P_FLOOR
    p_hi = p_bar * cfg.p_max_factor
    g = lambda P: main_csi_marginal(P, nodes, lam, model)
    g_lo = g(np.full(nodes.shape, p_lo))
    g_hi = g(np.full(nodes.shape, p_hi))
    values = np.zeros(nodes.shape)
    values[g_hi >= 0] = p_hi
    inner = (g_lo > 0) & (g_hi < 0)
    if inner.any():
        sub = nodes[inner]
        roots = find_roots_vectorized(
            lambda t: main_csi_marginal(np.exp(t), sub, lam, model),
            np.full(sub.shape, math.log(p_lo)),
            np.full(sub.shape, math.log(p_hi)),
            xtol=1e-12,
        )
        values[inner] = np.exp(roots)
    tiny = g_lo <= 0
    if tiny.any():
        # root below the search floor: linearize between P = 0 and the floor
        g0 = _zero_power_slope(nodes[tiny], model.gamma_e) - lam
        values[tiny] = p_lo * g0 / np.maximum(g0 - g_lo[tiny], 1e-300)
    return cutoff, np.concatenate(([cutoff], nodes)), np.concatenate(([0.0], values))


def solve_main_csi(
    model: RayleighFadingPair, constraint: PowerConstraint, cfg: SolverConfig = SolverConfig()
) -> MainCsiPolicy:
    """Optimal power policy when only the main-channel gain is known.

    Outer bracketed search on log(lambda); for each lambda the per-state
    condition is solved at every grid node above the cutoff.
    """
    p_bar = constraint.p_bar
    grid = _gain_grid(model, cfg)

    def build(lam):
        cutoff, knots, values = _main_csi_table(lam, model, grid, p_bar, cfg)
        return MainCsiPolicy(lam, model, p_bar, cutoff, knots, values)

    def excess(t):
        return build(math.exp(t)).average_power() / p_bar - 1.0

    lam, diag = _solve_dual(excess, math.log(1e-8), math.log(1e4), cfg, "main CSI")
    pol = build(lam)
    diffs = np.diff(pol.values)
    diag["monotone_in_gain"] = bool(np.all(diffs >= -1e-12 * np.max(np.abs(pol.values), initial=1.0)))
    diag["grid_points"] = int(len(grid))
    return MainCsiPolicy(lam, model, p_bar, pol.cutoff, pol.knots, pol.values, pol.average_power(), diag)


# ---------------------------------------------------------------------------
# On/off and constant power
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OnOffPolicy:
    tau: float
    p_const: float
    p_bar: float
    model: RayleighFadingPair

    def power(self, h_m, h_e=None):
        h = np.asarray(h_m, dtype=float)
        out = np.where(h > self.tau, self.p_const, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def realized_power(self) -> float:
        return self.p_const * math.exp(-self.tau / self.model.gamma_m)


@dataclass(frozen=True)
class ConstantPolicy:
    """Same power in every state (no transmitter CSI)."""

    p: float

    def power(self, h_m, h_e=None):
        h = np.asarray(h_m, dtype=float)
        out = np.full(h.shape, float(self.p))
        return float(out) if out.ndim == 0 else out


def make_onoff(model: RayleighFadingPair, constraint: PowerConstraint, tau: float) -> OnOffPolicy:
    """Constant power p_bar / Pr(h_M > tau) = p_bar exp(tau/gamma_M) above ``tau``."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    p_const = constraint.p_bar * math.exp(tau / model.gamma_m)
    return OnOffPolicy(tau, p_const, constraint.p_bar, model)


def optimize_onoff_threshold(
    model: RayleighFadingPair, constraint: PowerConstraint, cfg: SolverConfig = SolverConfig()
) -> Tuple[float, float]:
    """Threshold maximizing the on/off secrecy rate; returns (tau, rate)."""
    from .numerics import maximize_scalar
    from .rates import onoff_rate_closed_form

    hi = quantile(1.0 - 1e-8, model.gamma_m)
    return maximize_scalar(
        lambda tau: onoff_rate_closed_form(model, constraint, tau),
        0.0, hi, Tolerance(rel=1e-12, abs=1e-14, max_iter=300),
        grid_points=cfg.tau_grid_points,
    )


# ---------------------------------------------------------------------------
# Constant rate
# ---------------------------------------------------------------------------

# eavesdropper expectations over [0, inf) are cut at 40 means (mass e^-40)
_EAVES_SPAN = 40.0


def _constant_rate_lagrangian(P, h, lam, gamma_e):
    # log(1 + hP) - E log(1 + h_E P) - lam P, with E log(1 + h_E P) = e^x E1(x), x = 1/(gamma_E P)
    return np.log1p(h * P) - exp_scaled_e1(1.0 / (gamma_e * P)) - lam * P


def constant_rate_marginal(P, h_m, lam: float, model: RayleighFadingPair):
    """h/(1 + hP) - E{h_E/(1 + h_E P)} - lam: the stationarity residual."""
    h = np.asarray(h_m, dtype=float)
    P = np.asarray(P, dtype=float)
    ge = model.gamma_e
    return h / (1.0 + h * P) - eaves_moment(P, _EAVES_SPAN * ge, ge) - lam


class _ConstantRateStates:
    """Per-state global maximization of the constant-rate Lagrangian.

    The Lagrangian separates over h_M, so for each state we scan a log grid
    of powers, keep the best point (or zero), then polish it to a root of
    the stationarity condition inside the neighbouring grid cells.
    """

    def __init__(self, model, p_bar, cfg):
        self.model = model
        self.p_lo = p_bar * _P_FLOOR
        self.p_hi = p_bar * cfg.p_max_factor
        decades = math.log10(self.p_hi / (p_bar * 1e-6))
        self.p_grid = np.geomspace(p_bar * 1e-6, self.p_hi, int(8 * decades) + 1)

    def solve(self, h: np.ndarray, lam: float):
        """Return (P, ok) arrays; ``ok`` is False where polishing failed."""
        ge = self.model.gamma_e
        Pg = self.p_grid[None, :]
        vals = _constant_rate_lagrangian(Pg, h[:, None], lam, ge)
        k = np.argmax(vals, axis=1)
        best = vals[np.arange(len(h)), k]
        on = best > 0.0
        P = np.zeros(h.shape)
        ok = np.ones(h.shape, dtype=bool)
        if not on.any():
            return P, ok
        hs, ks = h[on], k[on]
        n = len(self.p_grid)
        lo = np.where(ks > 0, self.p_grid[np.maximum(ks - 1, 0)], self.p_lo)
        hi = self.p_grid[np.minimum(ks + 1, n - 1)]
        top = ks == n - 1
        f_lo = constant_rate_marginal(lo, hs, lam, self.model)
        f_hi = constant_rate_marginal(hi, hs, lam, self.model)
        clamp = top & (f_hi >= 0)
        good = (f_lo > 0) & (f_hi < 0) & ~clamp
        sub = self.p_grid[ks].copy()
        sub[clamp] = self.p_hi
        if good.any():
            roots = find_roots_vectorized(
                lambda t: constant_rate_marginal(np.exp(t), hs[good], lam, self.model),
                np.log(lo[good]), np.log(hi[good]), xtol=1e-12,
            )
            sub[good] = np.exp(roots)
        ok_on = good | clamp
        P[on] = sub
        ok[on] = ok_on
        return P, ok

    def transmits(self, h: float, lam: float) -> bool:
        vals = _constant_rate_lagrangian(self.p_grid, h, lam, self.model.gamma_e)
        return bool(np.max(vals) > 0.0)


def _constant_rate_table(lam, model, grid, states: _ConstantRateStates):
    P, ok = states.solve(grid, lam)
    on = P > 0
    if not on.any():
        return grid[-1], np.array([grid[-1]]), np.array([0.0]), ok, True
    j = int(np.argmax(on))
    contiguous = bool(on[j:].all())
    if j == 0:
        cutoff = grid[0]
        knots, values = grid[on], P[on]
        return cutoff, knots, values, ok[on], contiguous
    a, b = grid[j - 1], grid[j]
    for _ in range(60):
        mid = 0.5 * (a + b)
        if states.transmits(mid, lam):
            b = mid
        else:
            a = mid
        if b - a <= 1e-13 * b:
            break
    p_c, ok_c = states.solve(np.array([b]), lam)
    knots = np.concatenate(([b], grid[j:][on[j:]]))
    values = np.concatenate((p_c, P[j:][on[j:]]))
    oks = np.concatenate((ok_c, ok[j:][on[j:]]))
    return b, knots, values, oks, contiguous


def _kkt_residual(pol: TabulatedPolicy, grid: np.ndarray, p_cap: float) -> float:
    model, lam = pol.model, pol.lam
    res = 0.0
    off = grid[grid <= pol.cutoff]
    if off.size:
        # dual feasibility at P = 0: marginal gain h - E h_E must not exceed lam
        res = max(res, float(np.max(np.maximum(off - model.gamma_e - lam, 0.0))))
    pos = pol.values > 0
    if pos.any():
        r = constant_rate_marginal(pol.values[pos], pol.knots[pos], lam, model)
        # states pinned at the search ceiling are exempt from stationarity
        r = np.where(pol.values[pos] >= p_cap, 0.0, r)
        res = max(res, float(np.max(np.abs(r))))
    return res


def solve_constant_rate(
    model: RayleighFadingPair, constraint: PowerConstraint, cfg: SolverConfig = SolverConfig()
) -> ConstantRatePolicy:
    """A stationary power policy for the constant-rate scheme.

    The objective is not concave, so the result satisfies the necessary
    conditions only. For each lambda every state takes the global maximizer
    of its own Lagrangian term; the outer search matches E{P} to p_bar.
    Does not raise on failure: ``converged`` is False and the best iterate
    is returned.
    """
    p_bar = constraint.p_bar
    grid = _gain_grid(model, cfg)
    states = _ConstantRateStates(model, p_bar, cfg)

    def build(lam):
        cutoff, knots, values, ok, contiguous = _constant_rate_table(lam, model, grid, states)
        pol = ConstantRatePolicy(lam, model, p_bar, cutoff, knots, values)
        return pol, bool(ok.all()), contiguous

    def excess(t):
        return build(math.exp(t))[0].average_power() / p_bar - 1.0

    converged = True
    try:
        lam, diag = _solve_dual(excess, math.log(1e-8), math.log(1e4), cfg, "constant rate")
    except SolverError as exc:
        converged = False
        diag = dict(exc.diagnostics, error=str(exc))
        lo, hi = diag.get("lambda_bracket", (1e-8, 1e4))
        lam = math.sqrt(lo * hi)
    pol, polished, contiguous = build(lam)
    kkt = _kkt_residual(pol, grid, p_bar * cfg.p_max_factor)
    diag.update(polished=polished, single_threshold=contiguous,
                power_jump_at_cutoff=float(pol.values[0]))
    converged = converged and polished and kkt <= 1e-6
    return ConstantRatePolicy(
        lam, model, p_bar, pol.cutoff, pol.knots, pol.values,
        pol.average_power(), diag, converged=converged, kkt_residual=kkt,
    )
