"""Independent oracles: Monte Carlo rates and the binned achievability construction."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import SolverConfig
from .fading import RayleighFadingPair, cdf, pdf, quantile, sample
from .numerics import Tolerance, integrate_2d, maximize_scalar
from .policies import (
    FullCsiPolicy,
    PowerConstraint,
    full_csi_power,
    solve_constant_rate,
    solve_full_csi,
    solve_main_csi,
)
from .rates import (
    SCHEMES,
    evaluate_scheme,
    full_csi_rate,
    high_snr_limit,
    main_csi_rate,
    main_csi_rate_generic,
    onoff_rate_closed_form,
    onoff_rate_quadrature,
    receiver_only_signed,
)

__all__ = [
    "QuantizationSpec",
    "QuantizationReport",
    "McEstimate",
    "CheckResult",
    "state_rate",
    "mc_rate",
    "quantized_achievable_rate",
    "quantization_report",
    "truncation_mass",
    "brute_force_full_csi_power",
    "run_validation_suite",
]

# draws per independently seeded stream; fixed so results do not depend on --jobs
MC_CHUNK = 1 << 18

# schemes whose positive part is taken per fading state
_CLIPPED_PER_STATE = ("full_csi", "main_csi", "onoff")


@dataclass(frozen=True)
class QuantizationSpec:
    """Uniform bins on [0, m1] x [0, m2] for the (main, eavesdropper) gains."""

    q1: int
    q2: int
    m1: float
    m2: float

    def __post_init__(self):
        if int(self.q1) != self.q1 or int(self.q2) != self.q2 or self.q1 < 1 or self.q2 < 1:
            raise ValueError("bin counts must be integers >= 1")
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError("truncation bounds must be positive")

    @classmethod
    def at_quantile(cls, model: RayleighFadingPair, q1: int, q2: int, level: float) -> "QuantizationSpec":
        return cls(q1, q2, quantile(level, model.gamma_m), quantile(level, model.gamma_e))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    n: int
    seed: int
    mean_power: float = math.nan

    def __post_init__(self):
        if self.n < 1 or not self.std_err >= 0:
            raise ValueError("invalid Monte Carlo estimate")

    def agrees_with(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.std_err


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def state_rate(scheme: str, policy, h_m: np.ndarray, h_e: np.ndarray) -> np.ndarray:
    """Per-state secrecy rate of ``scheme`` under ``policy``.

    Variable-rate schemes are clipped at zero state by state. For the
    constant-rate and receiver-only schemes the signed difference is
    returned: their positive part applies to the average, not the state.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    p = np.broadcast_to(policy.power(h_m, h_e), np.shape(h_m))
    gap = np.log1p(h_m * p) - np.log1p(h_e * p)
    return np.maximum(gap, 0.0) if scheme in _CLIPPED_PER_STATE else gap


def _chunk_moments(scheme, policy, model, seed_seq, n):
    draws = sample(model, seed_seq, n)
    r = state_rate(scheme, policy, draws.h_m, draws.h_e)
    p = np.broadcast_to(policy.power(draws.h_m, draws.h_e), (n,))
    mean = float(np.mean(r))
    return n, mean, float(np.sum((r - mean) ** 2)), float(np.sum(p))


def mc_rate(
    scheme: str,
    policy,
    model: RayleighFadingPair,
    n: int,
    seed: int,
    jobs: int = 1,
) -> McEstimate:
    """Sample-mean secrecy rate over ``n`` i.i.d. fading states.

    Draws come in fixed-size chunks, each with its own child of
    ``SeedSequence(seed)``, so the estimate depends only on (n, seed).
    Chunk moments are merged in order with the pairwise variance update.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if n < 1000:
        raise ValueError("Monte Carlo needs at least 1000 samples")
    sizes = [MC_CHUNK] * (n // MC_CHUNK)
    if n % MC_CHUNK:
        sizes.append(n % MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = list(zip(children, sizes))

    def run(task):
        return _chunk_moments(scheme, policy, model, *task)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, tasks))
    else:
        parts = [run(t) for t in tasks]

    count, mean, m2, power = 0, 0.0, 0.0, 0.0
    for nb, mb, m2b, pb in parts:
        total = count + nb
        delta = mb - mean
        mean += delta * nb / total
        m2 += m2b + delta * delta * count * nb / total
        count = total
        power += pb
    std_err = math.sqrt(m2 / (count - 1) / count)
    return McEstimate(mean, std_err, count, seed, power / count)


# ---------------------------------------------------------------------------
# Binned achievability construction
# ---------------------------------------------------------------------------

def _bin_edges(spec: QuantizationSpec):
    return np.linspace(0.0, spec.m1, spec.q1 + 1), np.linspace(0.0, spec.m2, spec.q2 + 1)


def _bin_probabilities(model, em, ee):
    pm = np.diff(cdf(em, model.gamma_m))
    pe = np.diff(cdf(ee, model.gamma_e))
    return pm[:, None] * pe[None, :]


def _corner_power(policy: FullCsiPolicy, hm, he, pick):
    # evaluate the power map at the four bin corners and keep min or max
    corners = [policy.power(a, b) for a in hm for b in he]
    return pick(np.stack(corners), axis=0)


def _worst_case_sum(policy, model, em, ee, prob, lower: bool) -> float:
    lo_m, hi_m = em[:-1][:, None], em[1:][:, None]
    lo_e, hi_e = ee[:-1][None, :], ee[1:][None, :]
    lo_m, hi_m, lo_e, hi_e = np.broadcast_arrays(lo_m, hi_m, lo_e, hi_e)
    if lower:
        p = _corner_power(policy, (lo_m, hi_m), (lo_e, hi_e), np.min)
        gm, ge = lo_m, hi_e
    else:
        p = _corner_power(policy, (lo_m, hi_m), (lo_e, hi_e), np.max)
        gm, ge = hi_m, lo_e
    rate = np.maximum(np.log1p(gm * p) - np.log1p(ge * p), 0.0)
    return float(np.sum(rate * prob))


def quantized_achievable_rate(policy: FullCsiPolicy, spec: QuantizationSpec) -> float:
    """Rate of the binned scheme: worst-case gains and least power per bin.

    In each bin the main gain is taken at its lower edge, the eavesdropper
    gain at its upper edge, and the power at the smallest corner value of
    the full-CSI map (which is increasing in h_M and decreasing in h_E, so
    the four-corner minimum is the bin infimum). Bins are weighted by their
    exact probability; states beyond the bounds contribute nothing.
    """
    em, ee = _bin_edges(spec)
    prob = _bin_probabilities(policy.model, em, ee)
    return _worst_case_sum(policy, policy.model, em, ee, prob, lower=True)


def truncation_mass(policy: FullCsiPolicy, spec: QuantizationSpec, cfg: SolverConfig = SolverConfig()) -> float:
    """Full-CSI rate carried by states outside [0, m1] x [0, m2].

    Split as {h_M > m1} (any h_E) plus {h_M <= m1, h_E > m2}; on both
    pieces the integrand vanishes unless h_E < h_M - lambda.
    """
    model, lam = policy.model, policy.lam
    tol = Tolerance(rel=1e-9, abs=1e-15, max_iter=4000)

    def integrand(hm, he):
        p = policy.power(hm, he)
        return (np.log1p(hm * p) - np.log1p(he * p)) * pdf(he, model.gamma_e) * pdf(hm, model.gamma_m)

    hi = spec.m1 + quantile(1.0 - 1e-16, model.gamma_m)
    upper = integrate_2d(
        integrand, spec.m1, hi, lambda hm: 0.0, lambda hm: hm - lam, tol,
        outer_points=[max(spec.m1, lam)] if lam > spec.m1 else None,
    )
    side = 0.0
    if spec.m1 > spec.m2 + lam:
        side = integrate_2d(integrand, spec.m2 + lam, spec.m1, lambda hm: spec.m2, lambda hm: hm - lam, tol)
    return upper + side


@dataclass(frozen=True)
class QuantizationReport:
    spec: QuantizationSpec
    achievable: float
    upper_sum: float
    truncation: float
    full_rate: float

    @property
    def discretization_gap(self) -> float:
        """Upper minus lower bin sum: bounds the binning loss inside the box."""
        return self.upper_sum - self.achievable

    @property
    def relative_gap(self) -> float:
        return (self.full_rate - self.achievable) / self.full_rate

    @property
    def sandwich_holds(self) -> bool:
        return self.full_rate - self.achievable <= self.discretization_gap + self.truncation + 1e-9

    def to_dict(self) -> dict:
        return {
            "q1": self.spec.q1, "q2": self.spec.q2, "m1": self.spec.m1, "m2": self.spec.m2,
            "achievable": self.achievable, "upper_sum": self.upper_sum,
            "truncation": self.truncation, "full_rate": self.full_rate,
            "relative_gap": self.relative_gap, "sandwich_holds": self.sandwich_holds,
        }


def quantization_report(
    policy: FullCsiPolicy, spec: QuantizationSpec, cfg: SolverConfig = SolverConfig(),
    full_rate: Optional[float] = None,
) -> QuantizationReport:
    """Lower and upper bin sums, tail mass and the full-CSI rate they bracket.

    The upper sum uses the best-case corner gains and the largest corner
    power, so it dominates the integral over the box.
    """
    em, ee = _bin_edges(spec)
    prob = _bin_probabilities(policy.model, em, ee)
    lower = _worst_case_sum(policy, policy.model, em, ee, prob, lower=True)
    upper = _worst_case_sum(policy, policy.model, em, ee, prob, lower=False)
    rate = full_csi_rate(policy, cfg) if full_rate is None else full_rate
    return QuantizationReport(spec, lower, upper, truncation_mass(policy, spec, cfg), rate)


# ---------------------------------------------------------------------------
# Per-state brute force
# ---------------------------------------------------------------------------

def brute_force_full_csi_power(h_m: float, h_e: float, lam: float, p_max: float = 1e8) -> float:
    """Maximize log(1+h_M P) - log(1+h_E P) - lam P numerically over P >= 0.

    Works in s = log(1 + P) so the scan covers many decades evenly.
    """
    def objective(s):
        p = math.expm1(s)
        return math.log1p(h_m * p) - math.log1p(h_e * p) - lam * p

    s, _ = maximize_scalar(objective, 0.0, math.log1p(p_max),
                           Tolerance(rel=1e-14, abs=1e-15, max_iter=500), grid_points=4096)
    return math.expm1(s)


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)


def _timed(name: str, fn: Callable[[], tuple]) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, detail, data = fn()
    except Exception as exc:  # a crashing check is a failing check
        passed, detail, data = False, f"{type(exc).__name__}: {exc}", {}
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start, data)


SCENARIOS = ((1.0, 1.0), (1.0, 2.0))


def _check_onoff_forms(cfg):
    rng = np.random.default_rng(cfg.mc_seed)
    worst = 0.0
    for _ in range(8):
        gm, ge = rng.uniform(0.2, 5.0, 2)
        p_bar = 10 ** rng.uniform(-1, 3)
        tau = rng.uniform(0.0, 3.0) * gm
        model, c = RayleighFadingPair(gm, ge), PowerConstraint(p_bar)
        closed = onoff_rate_closed_form(model, c, tau)
        quad = onoff_rate_quadrature(model, c, tau, cfg)
        worst = max(worst, abs(closed - quad) / abs(quad))
    return worst <= 1e-6, f"max relative difference {worst:.2e} (limit 1e-6)", {"worst": worst}


def _check_main_forms(cfg):
    worst = 0.0
    for (gm, ge), p_bar in zip(SCENARIOS, (1.0, 10.0)):
        pol = solve_main_csi(RayleighFadingPair(gm, ge), PowerConstraint(p_bar), cfg)
        a = main_csi_rate(pol, cfg, check=False)
        b = main_csi_rate_generic(pol, cfg)
        worst = max(worst, abs(a - b) / abs(b))
    return worst <= 1e-5, f"max relative difference {worst:.2e} (limit 1e-5)", {"worst": worst}


def _check_pointwise(cfg):
    rng = np.random.default_rng(cfg.mc_seed)
    worst = 0.0
    for _ in range(40):
        he = rng.exponential(1.0)
        hm = he + rng.exponential(2.0)
        lam = rng.uniform(0.05, 0.9) * (hm - he)
        closed = full_csi_power(hm, he, lam)
        brute = brute_force_full_csi_power(hm, he, lam)
        worst = max(worst, abs(closed - brute) / max(brute, 1e-12))
    return worst <= 1e-5, f"max relative difference {worst:.2e} (limit 1e-5)", {"worst": worst}


def _check_high_snr(cfg):
    model = RayleighFadingPair(1.0, 1.0)
    limit = high_snr_limit(model, cfg)
    full = evaluate_scheme("full_csi", model, PowerConstraint(1e4), cfg).rate_nats
    onoff0 = onoff_rate_closed_form(model, PowerConstraint(1e4), 0.0)
    ln2 = math.log(2.0)
    ok = abs(limit - ln2) <= 1e-6 and 0.9 * ln2 <= full <= ln2 and abs(onoff0 - full) <= 0.05 * full
    return ok, f"limit {limit:.10f}, full CSI at 40 dB {full:.6f}, on/off {onoff0:.6f}", {
        "limit": limit, "full": full, "onoff0": onoff0}


def _check_headline(cfg):
    model = RayleighFadingPair(1.0, 2.0)
    recv = [evaluate_scheme("receiver_only", model, PowerConstraint(p), cfg).rate_nats
            for p in (0.1, 1.0, 10.0, 100.0, 1e4)]
    main = evaluate_scheme("main_csi", model, PowerConstraint(10.0), cfg).rate_nats
    ok = all(r == 0.0 for r in recv) and main > 0.01
    return ok, f"receiver-only max {max(recv):.3g}, main CSI at 10 dB {main:.6f}", {"main": main}


MC_CASES = ((1.0, 1.0, 1.0), (1.0, 2.0, 10.0))


def _mc_checks(cfg, jobs, cases, schemes) -> List[CheckResult]:
    out = []
    for gm, ge, p_bar in cases:
        model, c = RayleighFadingPair(gm, ge), PowerConstraint(p_bar)
        for scheme in schemes:
            def check(scheme=scheme, model=model, c=c):
                ev = evaluate_scheme(scheme, model, c, cfg)
                if scheme == "constant_rate":
                    target = ev.diagnostics["signed_rate"]
                elif scheme == "receiver_only":
                    target = receiver_only_signed(model, c)
                else:
                    target = ev.rate_nats
                est = mc_rate(scheme, ev.policy, model, cfg.mc_samples, cfg.mc_seed, jobs)
                z = abs(est.mean - target) / est.std_err if est.std_err > 0 else 0.0
                return z <= 3.0, f"quadrature {target:.6f}, MC {est.mean:.6f} +- {est.std_err:.1e} ({z:.2f} sigma)", {
                    "target": target, "mean": est.mean, "std_err": est.std_err}
            out.append(_timed(f"monte_carlo/{scheme}/({gm:g},{ge:g},{p_bar:g})", check))
    return out


def _quantized_reports(cfg):
    """Bin-count refinement at 1 - 1e-6 truncation, p_bar = 1, both scenarios."""
    out = {}
    for gm, ge in SCENARIOS:
        model = RayleighFadingPair(gm, ge)
        pol = solve_full_csi(model, PowerConstraint(1.0), cfg)
        full = full_csi_rate(pol, cfg)
        out[(gm, ge)] = [
            quantization_report(pol, QuantizationSpec.at_quantile(model, q, q, 1.0 - 1e-6), cfg, full)
            for q in (25, 50, 100, 200)
        ]
    return out


def _check_quantized_bounds(reports):
    ok = all(
        r.achievable <= r.full_rate + 1e-9 and r.sandwich_holds and r.truncation <= 1e-3
        for reps in reports.values() for r in reps
    )
    shrinking = all(
        all(a.relative_gap > b.relative_gap for a, b in zip(reps, reps[1:])) for reps in reports.values()
    )
    tails = max(r.truncation for reps in reports.values() for r in reps)
    return ok and shrinking, f"lower bound, sandwich and shrinking gap hold; max tail mass {tails:.1e}", {}


def _check_quantized_gap(reports):
    gaps = {k: reps[-1].relative_gap for k, reps in reports.items()}
    text = ", ".join(f"({gm:g},{ge:g}) {g:.2%}" for (gm, ge), g in gaps.items())
    return max(gaps.values()) <= 0.05, f"gap at 200x200 bins: {text} (limit 5%)", {}


def _check_attainment(cfg):
    worst = 0.0
    for gm, ge in SCENARIOS:
        model = RayleighFadingPair(gm, ge)
        for p_bar in (0.1, 1.0, 10.0, 100.0, 1e4):
            c = PowerConstraint(p_bar)
            for solve in (solve_full_csi, solve_main_csi, solve_constant_rate):
                pol = solve(model, c, cfg)
                worst = max(worst, abs(pol.realized_power / p_bar - 1.0))
    return worst <= 1e-4, f"max relative power error {worst:.2e} (limit 1e-4)", {"worst": worst}


def run_validation_suite(
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 1,
    mc_cases: Sequence[Tuple[float, float, float]] = MC_CASES,
    schemes: Sequence[str] = SCHEMES,
) -> List[CheckResult]:
    """Run every oracle comparison and return one result per check.

    ``mc_cases`` lists (gamma_m, gamma_e, p_bar) points for the Monte Carlo
    comparisons of ``schemes``; the other checks use fixed scenarios.
    """
    results = [
        _timed("onoff_closed_form_vs_quadrature", lambda: _check_onoff_forms(cfg)),
        _timed("main_csi_e1_form_vs_double_integral", lambda: _check_main_forms(cfg)),
        _timed("full_csi_power_vs_brute_force", lambda: _check_pointwise(cfg)),
        _timed("high_snr_limit_and_asymptotics", lambda: _check_high_snr(cfg)),
        _timed("receiver_only_zero_and_main_csi_positive", lambda: _check_headline(cfg)),
        _timed("power_constraint_attainment", lambda: _check_attainment(cfg)),
    ]
    reports = {}

    def quantized():
        reports.update(_quantized_reports(cfg))
        return _check_quantized_bounds(reports)

    results.append(_timed("quantized_achievability_bounds", quantized))
    results.append(_timed("quantized_achievability_gap_200_bins", lambda: _check_quantized_gap(reports)))
    results.extend(_mc_checks(cfg, jobs, mc_cases, schemes))
    return results
