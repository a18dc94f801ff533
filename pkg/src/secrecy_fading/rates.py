"""Ergodic secrecy rates of every scheme, in nats per channel use.

Where the positive part sits matters: variable-rate schemes (full CSI,
main CSI, on/off) clip each fading state at zero, constant-power and
constant-rate schemes clip only the average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SolverConfig
from .fading import RayleighFadingPair, pdf, quantile
from .numerics import Tolerance, ein, exp_scaled_e1, integrate_1d, integrate_2d
from .policies import (
    ConstantPolicy,
    ConstantRatePolicy,
    FullCsiPolicy,
    MainCsiPolicy,
    PowerConstraint,
    make_onoff,
    optimize_onoff_threshold,
    solve_constant_rate,
    solve_full_csi,
    solve_main_csi,
    wedge_rule,
)

__all__ = [
    "SCHEMES",
    "SchemeEvaluation",
    "ConsistencyError",
    "full_csi_rate",
    "full_csi_rate_adaptive",
    "main_csi_rate",
    "main_csi_rate_generic",
    "onoff_rate_closed_form",
    "onoff_rate_quadrature",
    "receiver_only_rate",
    "receiver_only_signed",
    "receiver_only_quadrature",
    "constant_rate_signed",
    "constant_rate_objective",
    "high_snr_limit",
    "evaluate_scheme",
]

SCHEMES = ("full_csi", "main_csi", "onoff", "constant_rate", "receiver_only")


class ConsistencyError(RuntimeError):
    """Two evaluations of the same quantity disagree."""


@dataclass
class SchemeEvaluation:
    scheme: str
    p_bar: float
    rate_nats: float
    realized_power: float
    diagnostics: dict = field(default_factory=dict)
    policy: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def rate(self, unit: str = "nats") -> float:
        return self.rate_nats / math.log(2.0) if unit == "bits" else self.rate_nats

    def to_dict(self, unit: str = "nats") -> dict:
        return {
            "scheme": self.scheme,
            "p_bar": self.p_bar,
            "rate": self.rate(unit),
            "unit": unit,
            "realized_power": self.realized_power,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Full CSI
# ---------------------------------------------------------------------------

def _full_csi_gap(hm, he, p):
    return np.log1p(hm * p) - np.log1p(he * p)


def full_csi_rate(policy: FullCsiPolicy, cfg: SolverConfig = SolverConfig()) -> float:
    """Secrecy capacity with full CSI for a solved policy.

    Uses the same graded tensor rule as the dual search, so rate and power
    come from one quadrature; :func:`full_csi_rate_adaptive` is the
    independent iterated-adaptive evaluation.
    """
    hm, he, w = wedge_rule(policy.model, policy.lam, cfg)
    p = policy.power(hm, he)
    return float(np.sum(w * _full_csi_gap(hm, he, p)))


def full_csi_rate_adaptive(policy: FullCsiPolicy, cfg: SolverConfig = SolverConfig()) -> float:
    model, lam = policy.model, policy.lam
    he_hi = quantile(cfg.tail_quantile, model.gamma_e)
    u_hi = quantile(cfg.tail_quantile, model.gamma_m)

    def integrand(he, hm):
        p = policy.power(hm, he)
        return _full_csi_gap(hm, he, p) * pdf(hm, model.gamma_m) * pdf(he, model.gamma_e)

    return integrate_2d(
        integrand, 0.0, he_hi,
        lambda he: he + lam, lambda he: he + lam + u_hi,
        Tolerance(rel=cfg.quad_rel_tol, abs=cfg.quad_abs_tol, max_iter=4000),
    )


# ---------------------------------------------------------------------------
# Main CSI
# ---------------------------------------------------------------------------

def _main_csi_state_rate(h, p, gamma_e):
    # log(1+hP) - exp(x)[E1(x) - E1(x + h/gamma_e)],  x = 1/(gamma_e P)
    out = np.zeros(np.shape(h))
    on = p > 0
    if on.any():
        hp, pp = h[on], p[on]
        x = 1.0 / (gamma_e * pp)
        c = hp / gamma_e
        out[on] = np.log1p(hp * pp) - (exp_scaled_e1(x) - np.exp(-c) * exp_scaled_e1(x + c))
    return out


def main_csi_rate(
    policy: MainCsiPolicy, cfg: SolverConfig = SolverConfig(), check: bool = True
) -> float:
    """Secrecy capacity with main-channel CSI, via the exponential-integral form.

    With ``check`` the generic double integral of the positive-part rate is
    evaluated as well and the two must agree to 1e-4 relative.
    """
    if len(policy.knots) < 2:
        return 0.0
    h, w = policy.quadrature()
    rate = float(np.sum(w * _main_csi_state_rate(h, policy.power(h), policy.model.gamma_e)))
    if check:
        generic = main_csi_rate_generic(policy, cfg)
        if abs(generic - rate) > 1e-4 * max(abs(rate), 1e-300):
            raise ConsistencyError(
                f"main-CSI rate forms disagree: E1 form {rate:.12g}, double integral {generic:.12g}"
            )
    return rate


def main_csi_rate_generic(policy: MainCsiPolicy, cfg: SolverConfig = SolverConfig()) -> float:
    """Double integral of [log(1+h_M P) - log(1+h_E P)]^+ f f, no special functions."""
    if len(policy.knots) < 2:
        return 0.0
    model = policy.model

    def integrand(hm, he):
        p = policy.power(hm)
        return (np.log1p(hm * p) - np.log1p(he * p)) * pdf(he, model.gamma_e) * pdf(hm, model.gamma_m)

    return integrate_2d(
        integrand, policy.cutoff, float(policy.knots[-1]),
        lambda hm: 0.0, lambda hm: hm,
        Tolerance(rel=min(cfg.quad_rel_tol, 1e-8), abs=cfg.quad_abs_tol, max_iter=4000),
    )


# ---------------------------------------------------------------------------
# On/off, constant power, constant rate
# ---------------------------------------------------------------------------

def onoff_rate_closed_form(model: RayleighFadingPair, constraint: PowerConstraint, tau: float) -> float:
    """On/off secrecy rate in closed form (Rayleigh fading).

    Four terms: the boundary term at tau and three exponential integrals,
    each written with exp(x) E1(x) so nothing overflows at low power.
    """
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    gm, ge = model.gamma_m, model.gamma_e
    a = tau / gm
    p = constraint.p_bar * math.exp(a)
    k = 1.0 / gm + 1.0 / ge
    z_m = 1.0 / (gm * p)
    z_e = 1.0 / (ge * p)
    boundary = math.log1p(tau * p)
    main = exp_scaled_e1(a + z_m)
    eaves = math.exp(-tau / ge) * exp_scaled_e1(tau / ge + z_e) - exp_scaled_e1(z_e)
    joint = math.exp(-k * tau) * exp_scaled_e1(k * (tau + 1.0 / p))
    return math.exp(-a) * (boundary + main + eaves) - joint


def onoff_rate_quadrature(
    model: RayleighFadingPair,
    constraint: PowerConstraint,
    tau: float,
    cfg: SolverConfig = SolverConfig(),
    tol: Optional[Tolerance] = None,
) -> float:
    """Direct double integral of the on/off rate over h_M > tau, h_E < h_M."""
    p = make_onoff(model, constraint, tau).p_const
    hi = tau + quantile(cfg.tail_quantile, model.gamma_m)

    def integrand(hm, he):
        return (math.log1p(hm * p) - np.log1p(he * p)) * pdf(he, model.gamma_e) * pdf(hm, model.gamma_m)

    tol = tol or Tolerance(rel=1e-10, abs=1e-15, max_iter=4000)
    scale = 1.0 / p
    return integrate_2d(
        integrand, tau, hi, lambda hm: 0.0, lambda hm: hm, tol,
        inner_points=lambda hm: [scale] if scale < hm else None,
    )


def receiver_only_signed(model: RayleighFadingPair, constraint: PowerConstraint) -> float:
    """E log(1 + h_M P) - E log(1 + h_E P) at constant power, before clipping."""
    p = constraint.p_bar
    return exp_scaled_e1(1.0 / (model.gamma_m * p)) - exp_scaled_e1(1.0 / (model.gamma_e * p))


def receiver_only_rate(model: RayleighFadingPair, constraint: PowerConstraint) -> float:
    """Secrecy rate without transmitter CSI; zero whenever gamma_E >= gamma_M."""
    return max(receiver_only_signed(model, constraint), 0.0)


def receiver_only_quadrature(
    model: RayleighFadingPair, constraint: PowerConstraint, cfg: SolverConfig = SolverConfig()
) -> float:
    """Signed receiver-only rate by plain quadrature of both expectations."""
    p = constraint.p_bar
    tol = Tolerance(rel=1e-12, abs=1e-15, max_iter=2000)

    def mean_log(gamma):
        hi = quantile(1.0 - 1e-16, gamma)
        return integrate_1d(lambda h: np.log1p(h * p) * pdf(h, gamma), 0.0, hi, tol)

    return mean_log(model.gamma_m) - mean_log(model.gamma_e)


def constant_rate_signed(policy, model: Optional[RayleighFadingPair] = None) -> float:
    """Constant-rate objective with no positive part inside or outside.

    For tabulated policies the eavesdropper expectation is done in closed
    form per state, E log(1 + h_E P) = exp(x) E1(x), x = 1/(gamma_E P).
    """
    if isinstance(policy, ConstantPolicy):
        if model is None:
            raise ValueError("a constant policy needs the fading model")
        return receiver_only_signed(model, PowerConstraint(policy.p)) if policy.p > 0 else 0.0
    if len(policy.knots) < 2:
        return 0.0
    ge = policy.model.gamma_e
    h, w = policy.quadrature()
    p = policy.power(h)
    on = p > 0
    vals = np.zeros(h.shape)
    vals[on] = np.log1p(h[on] * p[on]) - exp_scaled_e1(1.0 / (ge * p[on]))
    return float(np.sum(w * vals))


def constant_rate_objective(policy: ConstantRatePolicy) -> float:
    return max(constant_rate_signed(policy), 0.0)


# ---------------------------------------------------------------------------
# High-SNR asymptote
# ---------------------------------------------------------------------------

def high_snr_limit(model: RayleighFadingPair, cfg: SolverConfig = SolverConfig()) -> float:
    """E{log(h_M/h_E) ; h_M > h_E}, the common high-power limit.

    The inner integral over h_E has the closed form
    int_0^h log(h/t) f(t) dt = Ein(h/gamma_E), which absorbs the log
    singularity at t = 0; the outer integral is adaptive.
    """
    hi = quantile(cfg.tail_quantile, model.gamma_m)
    tol = Tolerance(rel=1e-12, abs=1e-15, max_iter=2000)
    return integrate_1d(lambda h: pdf(h, model.gamma_m) * ein(h / model.gamma_e), 0.0, hi, tol)


# ---------------------------------------------------------------------------
# One-stop evaluation
# ---------------------------------------------------------------------------

def evaluate_scheme(
    scheme: str,
    model: RayleighFadingPair,
    constraint: PowerConstraint,
    cfg: SolverConfig = SolverConfig(),
    tau: Optional[float] = None,
    check: bool = True,
) -> SchemeEvaluation:
    """Solve the power-allocation problem of ``scheme`` and evaluate its rate.

    ``tau`` fixes the on/off threshold instead of optimizing it. ``check``
    runs the main-CSI double-integral consistency check.
    """
    p_bar = constraint.p_bar
    if scheme == "full_csi":
        pol = solve_full_csi(model, constraint, cfg)
        diag = dict(pol.diagnostics, lam=pol.lam)
        return SchemeEvaluation(scheme, p_bar, full_csi_rate(pol, cfg), pol.realized_power, diag, pol)
    if scheme == "main_csi":
        pol = solve_main_csi(model, constraint, cfg)
        diag = dict(pol.diagnostics, lam=pol.lam, cutoff=pol.cutoff)
        rate = main_csi_rate(pol, cfg, check=check)
        return SchemeEvaluation(scheme, p_bar, rate, pol.realized_power, diag, pol)
    if scheme == "onoff":
        if tau is None:
            tau, rate = optimize_onoff_threshold(model, constraint, cfg)
        else:
            rate = onoff_rate_closed_form(model, constraint, tau)
        pol = make_onoff(model, constraint, tau)
        diag = {"tau": tau, "p_const": pol.p_const}
        return SchemeEvaluation(scheme, p_bar, max(rate, 0.0), pol.realized_power, diag, pol)
    if scheme == "constant_rate":
        pol = solve_constant_rate(model, constraint, cfg)
        signed = constant_rate_signed(pol)
        diag = dict(pol.diagnostics, lam=pol.lam, cutoff=pol.cutoff, converged=pol.converged,
                    kkt_residual=pol.kkt_residual, signed_rate=signed, clamped=signed < 0)
        return SchemeEvaluation(scheme, p_bar, max(signed, 0.0), pol.realized_power, diag, pol)
    if scheme == "receiver_only":
        signed = receiver_only_signed(model, constraint)
        diag = {"signed_rate": signed, "clamped": signed < 0}
        rate = receiver_only_rate(model, constraint)
        return SchemeEvaluation(scheme, p_bar, rate, p_bar, diag, ConstantPolicy(p_bar))
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
