"""Exponential tail bounds for the quadratic statistic.

Both bounds come from the Chebyshev/Chernoff device applied to the
uncentered quadratic form T' = sum_j kappa^2_j y_j^2 with independent
y_j ~ N(theta_j, eps^2).

Lower tail (the miss event of the test under an alternative): for the
signal energy tau^2 = sum_j kappa^2_j theta_j^2 and an event threshold
z^2 < tau^2,

    log P(T' < z^2) <= G(t)  for every t >= 0,

    G(t) = t (z^2 - tau^2) + sum_j 2 t^2 kappa^4_j theta_j^2 eps^2
                                   / (1 + 2 t kappa^2_j eps^2).

G is convex with G(0) = 0 and an interior minimum whenever tau > z; the
returned exponent is min_t G(t).  The per-coordinate log factors
-1/2 log(1 + 2 t kappa^2 eps^2) of the exact moment computation are
nonpositive, so dropping them keeps a valid upper bound and makes the
single-coordinate case exactly solvable: for theta concentrated on the
largest weight kappa^2_1 the minimum is

    -(tau - z)^2 / (2 eps^2 kappa^2_1)    at    2 t* = eps^-2 kappa^-2 (tau/z - 1),

which serves as the closed-form oracle.  Among all signals with the same
tau the single-coordinate one maximizes G (weights are nonincreasing),
so its exponent bounds the miss probability of every such signal.

Upper tail under the null (the false-alarm event): the null law of the
centered, eps^-2-scaled statistic T is noise-level free, and

    log P_0(T > x) <= min_t [ -t (x + rho^2) - 1/2 sum_j log(1 - 2 t kappa^2_j) ]

over 0 <= t < 1/(2 max_j kappa^2_j).  For x large at fixed weights the
exponent behaves like -x / (2 kappa^2_1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DegenerateSchemeError, NoGapError, NumericError, ParameterError
from .model import REAL, CoefficientVector
from .quadratic import WeightScheme, _real_components


@dataclass(frozen=True)
class ChernoffBound:
    """Minimized exponent (<= 0) and the minimizing tilt parameter t*."""

    exponent: float
    t_star: float


def _exponent_terms(weights: np.ndarray, means: np.ndarray, epsilon: float):
    mask = weights > 0
    w = weights[mask]
    m2 = means[mask] ** 2
    a = 2.0 * w**2 * m2 * epsilon**2  # numerators of the tilt-correction terms
    c = 2.0 * w * epsilon**2  # per-coordinate tilt scales
    return a, c


def lower_tail_bound_at(
    weights: np.ndarray, means: np.ndarray, epsilon: float, z_sq: float
) -> ChernoffBound:
    """min_t G(t) for the event {sum kappa^2 y^2 < z_sq} in real coordinates."""
    tau_sq = float(np.sum(weights * means**2))
    if tau_sq <= z_sq:
        if tau_sq == z_sq:
            return ChernoffBound(0.0, 0.0)
        raise NoGapError(
            f"signal energy tau^2={tau_sq:.6g} does not exceed the threshold z^2={z_sq:.6g}"
        )
    a, c = _exponent_terms(weights, means, epsilon)
    gap = z_sq - tau_sq  # < 0

    def g(t: float) -> float:
        return t * gap + float(np.sum(a * t * t / (1.0 + c * t)))

    def dg(t: float) -> float:
        u = 1.0 + c * t
        return gap + float(np.sum(a * t * (2.0 + c * t) / (u * u)))

    # dg(0) = gap < 0; bracket the root by doubling
    hi = 1.0 / max(float(np.max(c)), 1e-300)
    for _ in range(200):
        if dg(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NumericError("failed to bracket the minimizing tilt parameter")
    t_star = float(optimize.brentq(dg, 0.0, hi, xtol=1e-30, rtol=8.9e-16, maxiter=300))
    return ChernoffBound(min(g(t_star), 0.0), t_star)


def lower_tail_exponent(
    theta: CoefficientVector,
    scheme: WeightScheme,
    epsilon: float,
    x_threshold: float,
) -> ChernoffBound:
    """Exponential bound on the miss probability P_theta(T' < z^2).

    The event threshold follows the convention z^2 = kappa^2_1 * x_threshold
    (leading weight times the nominal test level); callers that need a
    different normalization can use :func:`lower_tail_bound_at` with an
    explicit z^2.
    """
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    w, m = _real_components(theta, scheme, epsilon)
    if w[0] <= 0:
        raise DegenerateSchemeError("leading weight must be positive")
    z_sq = float(w[0]) * x_threshold
    return lower_tail_bound_at(w, m, epsilon, z_sq)


def extremal_exponent_closed_form(
    tau: float, kappa1_sq: float, epsilon: float, z: float
) -> float:
    """-(tau - z)^2 / (2 eps^2 kappa^2_1): exact minimum for the one-coordinate signal."""
    return -((tau - z) ** 2) / (2.0 * epsilon**2 * kappa1_sq)


def extremal_signal(tau: float, scheme: WeightScheme, epsilon: float) -> CoefficientVector:
    """The single-coordinate signal theta_1 = tau / kappa_1 attaining the bound."""
    if not tau > 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    if scheme.symmetric:
        raise ParameterError("extremal signal is defined for plain (real-basis) schemes")
    w = scheme.weights(epsilon)
    if w[0] <= 0:
        raise DegenerateSchemeError("leading weight must be positive")
    return CoefficientVector(REAL, {1: tau / math.sqrt(float(w[0]))}, max(int(w.size), 1))


def null_upper_tail_exponent(
    scheme: WeightScheme, epsilon: float, x_threshold: float
) -> ChernoffBound:
    """Exponential bound on the false-alarm probability P_0(T > x_threshold).

    T is the centered statistic; its null law does not depend on the
    noise level (epsilon enters only through the weight generator).
    """
    if not x_threshold > 0:
        raise ParameterError(f"x_threshold must be > 0, got {x_threshold}")
    w = scheme.real_weights(epsilon)
    w = w[w > 0]
    if w.size == 0:
        raise DegenerateSchemeError("all weights vanish")
    rho_sq = float(np.sum(w))
    shift = x_threshold + rho_sq
    t_max = 1.0 / (2.0 * float(np.max(w)))

    def dh(t: float) -> float:
        return -shift + float(np.sum(w / (1.0 - 2.0 * t * w)))

    # dh(0) = -x < 0 and dh -> +inf at the domain boundary
    lo, hi = 0.0, t_max * (1.0 - 1e-12)
    if dh(hi) <= 0:
        raise NumericError("upper-tail tilt did not bracket inside its domain")
    t_star = float(optimize.brentq(dh, lo, hi, xtol=1e-30, rtol=8.9e-16, maxiter=300))
    value = -t_star * shift - 0.5 * float(np.sum(np.log1p(-2.0 * t_star * w)))
    return ChernoffBound(min(value, 0.0), t_star)


def upper_tail_t_star_at(
    weights: np.ndarray, means: np.ndarray, epsilon: float, u_sq: float
) -> float:
    """Saddlepoint tilt for the upper-tail event {sum kappa^2 y^2 > u_sq}.

    Solves K'(t) = u_sq for the exact cumulant generating function of the
    quadratic form under means ``means``; returns 0 when the event is not
    in the upper tail (u_sq <= E[T']).
    """
    mask = weights > 0
    w = weights[mask]
    m2 = means[mask] ** 2
    mean_tp = float(np.sum(w * (m2 + epsilon**2)))
    if u_sq <= mean_tp:
        return 0.0
    t_max = 1.0 / (2.0 * float(np.max(w)) * epsilon**2)

    def dk(t: float) -> float:
        mu = 1.0 - 2.0 * t * w * epsilon**2
        return float(np.sum(w * epsilon**2 / mu) + np.sum(w * m2 / mu**2)) - u_sq

    hi = t_max * (1.0 - 1e-12)
    if dk(hi) <= 0:
        raise NumericError("upper-tail saddlepoint did not bracket inside its domain")
    return float(optimize.brentq(dk, 0.0, hi, xtol=1e-30, rtol=8.9e-16, maxiter=300))
