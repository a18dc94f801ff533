"""Special functions and numerical primitives shared by the solvers.

The exponential integral here is E1(x) = int_x^inf exp(-t)/t dt, not the
principal-value Ei. All quadrature routines expect integrands that accept
numpy arrays and return arrays of the same shape.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_EPS = np.finfo(float).eps
_TINY = 1e-300
# series/continued-fraction switchover for E1; both sides stay below 1e-13 relative
_SERIES_MAX = 2.0

__all__ = [
    "EULER_GAMMA",
    "Tolerance",
    "DomainError",
    "BracketError",
    "ConvergenceError",
    "IntegrationError",
    "exp_integral_e1",
    "exp_scaled_e1",
    "ein",
    "integrate_1d",
    "integrate_2d",
    "graded_gauss_legendre",
    "find_root_bracketed",
    "find_roots_vectorized",
    "maximize_scalar",
]


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class BracketError(ValueError):
    """Root finder was given an interval without a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message: str, best: float = math.nan, error: float = math.nan):
        super().__init__(message)
        self.best = best
        self.error = error


class IntegrationError(ConvergenceError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-10
    abs: float = 0.0
    max_iter: int = 200

    def __post_init__(self):
        if not self.rel > 0:
            raise ValueError(f"rel tolerance must be > 0, got {self.rel}")
        if not self.abs >= 0:
            raise ValueError(f"abs tolerance must be >= 0, got {self.abs}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


# ---------------------------------------------------------------------------
# Exponential integral
# ---------------------------------------------------------------------------

def _ein_series(x: np.ndarray) -> np.ndarray:
    # Ein(x) = sum_{k>=1} (-1)^(k+1) x^k / (k k!), used for 0 <= x <= 2
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 30):
        term = term * (-x) / k
        total = total - term / k
    return total


def _cf_scaled(x: np.ndarray) -> np.ndarray:
    """exp(x) E1(x) by the even continued fraction (modified Lentz), x > 2."""
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, 1000):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 1e-16
        if not active.any():
            break
    return h


def _as_positive_array(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("exponential integral requires x > 0")
    return arr, arr.ndim == 0


def exp_integral_e1(x):
    """E1(x) for x > 0, scalar or array.

    Power series up to x = 2, continued fraction above. Once exp(-x)
    underflows (x > ~745) the result saturates to 0.
    """
    arr, scalar = _as_positive_array(x)
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr <= _SERIES_MAX
    if small.any():
        xs = arr[small]
        out[small] = -EULER_GAMMA - np.log(xs) + _ein_series(xs)
    if (~small).any():
        xl = arr[~small]
        with np.errstate(under="ignore"):
            out[~small] = np.exp(-xl) * _cf_scaled(xl)
    return float(out[0]) if scalar else out


def exp_scaled_e1(x):
    """exp(x) * E1(x), finite for all x > 0 (no overflow for large x)."""
    arr, scalar = _as_positive_array(x)
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr <= _SERIES_MAX
    if small.any():
        xs = arr[small]
        out[small] = np.exp(xs) * (-EULER_GAMMA - np.log(xs) + _ein_series(xs))
    if (~small).any():
        out[~small] = _cf_scaled(arr[~small])
    return float(out[0]) if scalar else out


def ein(x):
    """Entire function Ein(x) = int_0^x (1 - exp(-t))/t dt for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("ein requires x >= 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.zeros_like(arr)
    small = arr <= _SERIES_MAX
    out[small] = _ein_series(arr[small])
    big = ~small
    if big.any():
        xb = arr[big]
        out[big] = exp_integral_e1(xb) + np.log(xb) + EULER_GAMMA
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

# Gauss-Kronrod 10/21 abscissae on [-1, 1]; Gauss nodes are the odd indices.
_GK21_X = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
    -0.148874338981631210884826001129720, -0.294392862701460198131126603103866,
    -0.433395394129247190799265943165784, -0.562757134668604683339000099272694,
    -0.679409568299024406234327365114874, -0.780817726586416897063717578345042,
    -0.865063366688984510732096688423493, -0.930157491355708226001207180059508,
    -0.973906528517171720077964012084452, -0.995657163025808080735527280689003,
])
_G10_W = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338, 0.295524224714752870173892994651338,
    0.269266719309996355091226921569469, 0.219086362515982043995534934228163,
    0.149451349150580593145776339657697, 0.066671344308688137593568809893332,
])
_K21_W = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
    0.147739104901338491374841515972068, 0.142775938577060080797094273138717,
    0.134709217311473325928054001771707, 0.123491976262065851077958109831074,
    0.109387158802297641899210590325805, 0.093125454583697605535065465083366,
    0.075039674810919952767043140916190, 0.054755896574351996031381300244580,
    0.032558162307964727478818972459390, 0.011694638867371874278064396062192,
])


def _gk21(f, a: float, b: float) -> Tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.broadcast_to(np.asarray(f(mid + half * _GK21_X), dtype=float), _GK21_X.shape)
    if not np.all(np.isfinite(vals)):
        raise IntegrationError(f"non-finite integrand on [{a}, {b}]")
    kronrod = half * float(np.dot(_K21_W, vals))
    gauss = half * float(np.dot(_G10_W, vals[1::2]))
    return kronrod, abs(kronrod - gauss)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: Tolerance = Tolerance(rel=1e-10, abs=1e-14, max_iter=2000),
    points: Optional[Sequence[float]] = None,
    full_output: bool = False,
):
    """Globally adaptive Gauss-Kronrod (10/21) quadrature of ``f`` on [a, b].

    ``f`` is called with arrays of 21 abscissae. Endpoint singularities of
    logarithmic type are handled by repeated bisection. ``points`` adds
    known breakpoints. ``tol.max_iter`` caps the number of subdivisions.

    Returns the integral, or ``(integral, error_estimate)`` when
    ``full_output`` is set.
    """
    if not a < b:
        raise ValueError(f"integrate_1d requires a < b, got [{a}, {b}]")
    edges = [a]
    if points is not None:
        edges += sorted(p for p in points if a < p < b)
    edges.append(b)

    heap = []
    total = 0.0
    err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _gk21(f, lo, hi)
        total += val
        err_total += err
        heapq.heappush(heap, (-err, lo, hi, val))

    n_split = 0
    while err_total > max(tol.abs, tol.rel * abs(total)):
        if n_split >= tol.max_iter:
            raise IntegrationError(
                f"no convergence after {n_split} subdivisions "
                f"(estimate {total:.6g}, error {err_total:.3g})",
                best=total, error=err_total,
            )
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # interval exhausted at machine resolution; accept what we have
            heapq.heappush(heap, (0.0, lo, hi, val))
            err_total += neg_err
            continue
        v1, e1 = _gk21(f, lo, mid)
        v2, e2 = _gk21(f, mid, hi)
        total += v1 + v2 - val
        err_total += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_split += 1

    # re-sum to avoid drift from the running updates
    total = math.fsum(item[3] for item in heap)
    err_total = math.fsum(-item[0] for item in heap)
    if full_output:
        return total, err_total
    return total


def integrate_2d(
    f: Callable[[float, np.ndarray], np.ndarray],
    a: float,
    b: float,
    inner_lo: Callable[[float], float],
    inner_hi: Callable[[float], float],
    tol: Tolerance = Tolerance(rel=1e-9, abs=1e-13, max_iter=2000),
    outer_points: Optional[Sequence[float]] = None,
    inner_points: Optional[Callable[[float], Sequence[float]]] = None,
) -> float:
    """Iterated adaptive quadrature of f(x, y) over a <= x <= b, lo(x) <= y <= hi(x)."""
    inner_tol = Tolerance(rel=tol.rel * 0.1, abs=tol.abs * 0.1, max_iter=tol.max_iter)

    def outer(xs):
        out = np.empty(len(xs))
        for k, x in enumerate(xs):
            lo, hi = inner_lo(x), inner_hi(x)
            if not lo < hi:
                out[k] = 0.0
                continue
            pts = inner_points(x) if inner_points is not None else None
            out[k] = integrate_1d(lambda y: f(x, y), lo, hi, inner_tol, points=pts)
        return out

    return integrate_1d(outer, a, b, tol, points=outer_points)


def graded_gauss_legendre(
    a: float, b: float, fine: float, order: int = 16, max_width: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on panels refined geometrically toward ``a``.

    Panels are [a, a+fine], then widths doubling until ``max_width``, then
    uniform. Resolves integrands whose features near ``a`` live on the scale
    ``fine`` without adaptive bookkeeping.
    """
    if not a < b:
        raise ValueError("graded_gauss_legendre requires a < b")
    span = b - a
    fine = min(fine, span)
    max_width = span if max_width is None else max(max_width, fine)
    edges = [a]
    width = fine
    while edges[-1] < b:
        edges.append(min(edges[-1] + width, b))
        width = min(2.0 * width, max_width)
    edges = np.asarray(edges)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# Root finding and maximization
# ---------------------------------------------------------------------------

def find_root_bracketed(
    f: Callable[[float], float], lo: float, hi: float, tol: Tolerance = Tolerance()
) -> float:
    """Brent's method: inverse interpolation guarded by bisection.

    Stops when |f(x)| <= tol.abs or the bracket is narrower than
    tol.rel * |x|, with an absolute floor of machine epsilon times the
    initial bracket scale so roots at zero terminate. Raises BracketError
    without a sign change.
    """
    a, b = float(lo), float(hi)
    floor = _EPS * max(abs(a), abs(b)) + _TINY
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise BracketError(f"f({a})={fa:.3g} and f({b})={fb:.3g} have the same sign")
    c, fc = a, fa
    d = e = b - a
    for _ in range(tol.max_iter):
        if fb * fc > 0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * tol.rel * abs(b) + floor
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or abs(fb) <= tol.abs or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = float(f(b))
    raise ConvergenceError(f"root not found in {tol.max_iter} iterations", best=b)


def find_roots_vectorized(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    xtol: float = 1e-13,
    ftol: float = 0.0,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve many independent bracketed scalar equations at once.

    Illinois regula falsi with a bisection step every third iteration, so
    the bracket width at least halves every three steps. ``f`` must map an
    array of abscissae to residuals elementwise. Caller guarantees a sign
    change on every [lo, hi].
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    ra = np.asarray(f(a), dtype=float)
    rb = np.asarray(f(b), dtype=float)
    if np.any(ra * rb > 0):
        raise BracketError("no sign change on some brackets")
    # fa, fb are the Illinois-weighted values; ra, rb the true residuals
    fa, fb = ra.copy(), rb.copy()
    side = np.zeros(a.shape, dtype=int)
    for it in range(max_iter):
        done = (np.abs(b - a) <= xtol) | (np.minimum(np.abs(ra), np.abs(rb)) <= ftol)
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = b - fb * (b - a) / (fb - fa)
        bisect = (it % 3 == 2) | ~np.isfinite(xs) | (xs <= np.minimum(a, b)) | (xs >= np.maximum(a, b))
        x = np.where(bisect, 0.5 * (a + b), xs)
        fx = np.asarray(f(x), dtype=float)
        left = np.sign(fx) == np.sign(ra)
        keep = ~done
        upd_a = keep & left
        upd_b = keep & ~left
        fb = np.where(upd_a & (side == 1), 0.5 * fb, fb)
        fa = np.where(upd_b & (side == -1), 0.5 * fa, fa)
        a = np.where(upd_a, x, a)
        ra = np.where(upd_a, fx, ra)
        fa = np.where(upd_a, fx, fa)
        b = np.where(upd_b, x, b)
        rb = np.where(upd_b, fx, rb)
        fb = np.where(upd_b, fx, fb)
        side = np.where(upd_a, 1, np.where(upd_b, -1, side))
    else:
        raise ConvergenceError("vectorized root search did not converge")
    return np.where(np.abs(ra) <= np.abs(rb), a, b)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def maximize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance = Tolerance(rel=1e-10, abs=1e-12),
    grid_points: int = 64,
) -> Tuple[float, float]:
    """Grid scan then golden-section refinement around the best grid point.

    Global for unimodal ``f``; otherwise the best local maximum the grid
    sees. Ties go to the smallest abscissa.
    """
    if not lo < hi:
        raise ValueError("maximize_scalar requires lo < hi")
    grid = np.linspace(lo, hi, max(grid_points, 64))
    vals = np.array([float(f(x)) for x in grid])
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective returned non-finite values")
    k = int(np.argmax(vals))
    best_x, best_v = float(grid[k]), float(vals[k])

    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, len(grid) - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = float(f(c)), float(f(d))
    for _ in range(tol.max_iter):
        if abs(b - a) <= tol.rel * max(abs(a), abs(b)) + tol.abs:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = float(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = float(f(d))
        if not (math.isfinite(fc) and math.isfinite(fd)):
            raise ValueError("objective returned non-finite values")
    x_ref, v_ref = (c, fc) if fc >= fd else (d, fd)
    if v_ref > best_v:
        return x_ref, v_ref
    return best_x, best_v
