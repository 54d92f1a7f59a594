"""Monte Carlo error-probability estimation, plain and importance-sampled.

Every quadratic statistic in the package reduces to a weighted sum of
squares of independent Gaussians, T' = sum_j w_j y_j^2 with
y_j ~ N(m_j, eps^2).  Grouping coordinates by weight value turns T' into
sum_g w_g * S_g with group sums S_g that are exact scaled noncentral
chi-square draws (chi^2_{df-1} plus one squared shifted normal), which
is what the sampler draws: the law of the statistic is preserved
coordinate for coordinate while the cost per replication is the number
of distinct weights, not the number of coordinates.

Importance sampling tilts the observation law by exp(s * T'): every
coordinate stays Gaussian with variance eps^2 / (1 + 2 s w_j eps^2) and
mean m_j / (1 + 2 s w_j eps^2) (s < 0 with |s| < 1/(2 w eps^2) inflates
toward the upper tail).  The likelihood ratio depends on the sample only
through T',

    log W = s T' - sum_j [ log(1 + 2 s w_j eps^2) / 2
                           + s w_j m_j^2 / (1 + 2 s w_j eps^2) ],

so the group reduction stays exact, the estimator is unbiased by
construction, and s = 0 reproduces the plain estimator draw for draw.
The default tilt is the minimizer of the corresponding exponential bound
(the optimizer of :mod:`ldsignal.chernoff`).

Replications are partitioned into fixed-size blocks, one derived
substream per block, and block partials are merged with exact (fsum)
summation, so results are identical no matter how blocks are scheduled
across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import chernoff
from .consistency import AlternativeFamily, RateParams
from .errors import ParameterError
from .model import CoefficientVector, Seed, derive_rng
from .quadratic import WeightScheme, _real_components, threshold_x

PLAIN = "plain"
TILTED = "tilted"

_BLOCK = 1 << 15


@dataclass(frozen=True)
class MCConfig:
    """Replication count, master seed, and estimator mode.

    ``tilt_t`` overrides the automatic tilt of ``tilted`` mode; 0 makes
    the tilted estimator coincide with the plain one exactly.
    """

    n_reps: int
    seed: Seed
    mode: str = PLAIN
    tilt_t: float | None = None

    def __post_init__(self):
        if self.n_reps < 100:
            raise ParameterError(f"n_reps must be >= 100, got {self.n_reps}")
        if self.mode not in (PLAIN, TILTED):
            raise ParameterError(f"mode must be 'plain' or 'tilted', got {self.mode!r}")


@dataclass(frozen=True)
class MCEstimate:
    """A probability estimate with its sampling uncertainty.

    ``log_p`` is log(p_hat) (-inf for an empty estimate), ``se_log`` its
    delta-method standard error, ``n_effective`` the Kish effective
    sample size of the weighted average (equal to n_reps in plain mode).
    """

    p_hat: float
    std_err: float
    log_p: float
    se_log: float
    n_effective: float
    ci95: tuple[float, float]
    n_reps: int
    mode: str
    tilt_t: float


def _group(weights: np.ndarray, means: np.ndarray):
    """Distinct positive weights with coordinate counts and mass sums."""
    mask = weights > 0
    w = weights[mask]
    q = means[mask] ** 2
    values, inverse = np.unique(-w, return_inverse=True)  # descending order
    values = -values
    df = np.bincount(inverse)
    mass = np.bincount(inverse, weights=q)
    return values, df.astype(int), mass


def _sample_group_sums(rng: np.random.Generator, df: int, nonc: float, size: int) -> np.ndarray:
    """Noncentral chi-square via chi^2_(df-1) + (Z + sqrt(nonc))^2 (exact in law)."""
    shifted = (rng.standard_normal(size) + math.sqrt(nonc)) ** 2
    if df > 1:
        shifted += rng.chisquare(df - 1, size)
    return shifted


def _estimate_tp(
    weights: np.ndarray,
    means: np.ndarray,
    epsilon: float,
    threshold: float,
    side: str,
    mc: MCConfig,
    tilt_signed: float,
    stream: int = 0,
    threads: int = 1,
) -> MCEstimate:
    """Estimate P(T' <= threshold) or P(T' > threshold) under the given means."""
    w_vals, df, mass = _group(weights, means)
    if w_vals.size == 0:
        raise ParameterError("all weights vanish; the statistic is degenerate")
    eps_sq = epsilon * epsilon
    factor = 1.0 + 2.0 * tilt_signed * w_vals * eps_sq
    if np.any(factor <= 0.0):
        raise ParameterError("tilt parameter outside its admissible range")
    scale = eps_sq / factor
    nonc = mass / (factor * eps_sq)
    log_const = float(
        np.sum(0.5 * df * np.log(factor) + tilt_signed * w_vals * mass / factor)
    )

    n = mc.n_reps
    blocks = [(b, min(_BLOCK, n - b * _BLOCK)) for b in range((n + _BLOCK - 1) // _BLOCK)]

    def run_block(args):
        b, size = args
        rng = derive_rng(mc.seed, stream, b)
        tp = np.zeros(size)
        for g in range(w_vals.size):
            tp += w_vals[g] * scale[g] * _sample_group_sums(rng, int(df[g]), float(nonc[g]), size)
        hit = tp <= threshold if side == "le" else tp > threshold
        if tilt_signed == 0.0:
            v = hit.astype(float)
        else:
            v = np.where(hit, np.exp(tilt_signed * tp - log_const), 0.0)
        return float(np.sum(v)), float(np.sum(v * v))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run_block, blocks))
    else:
        partials = [run_block(args) for args in blocks]

    sum_v = math.fsum(p[0] for p in partials)
    sum_v2 = math.fsum(p[1] for p in partials)
    p_hat = sum_v / n
    var = max(sum_v2 / n - p_hat * p_hat, 0.0)
    se = math.sqrt(var / n)
    log_p = math.log(p_hat) if p_hat > 0 else -math.inf
    se_log = se / p_hat if p_hat > 0 else math.inf
    n_eff = float(n) if tilt_signed == 0.0 else (sum_v * sum_v / sum_v2 if sum_v2 > 0 else 0.0)
    return MCEstimate(
        p_hat=p_hat,
        std_err=se,
        log_p=log_p,
        se_log=se_log,
        n_effective=n_eff,
        ci95=(p_hat - 1.96 * se, p_hat + 1.96 * se),
        n_reps=n,
        mode=mc.mode,
        tilt_t=abs(tilt_signed),
    )


def _tp_threshold(scheme: WeightScheme, epsilon: float, x_threshold: float) -> float:
    """Convert a threshold on the normalized statistic to the T' scale."""
    w = scheme.real_weights(epsilon)
    rho_sq = float(np.sum(w))
    sd = math.sqrt(2.0 * float(np.sum(w * w)))
    return epsilon * epsilon * (rho_sq + x_threshold * sd)


def estimate_alpha(
    scheme: WeightScheme,
    epsilon: float,
    x_threshold: float,
    mc: MCConfig,
    stream: int = 0,
    threads: int = 1,
) -> MCEstimate:
    """False-alarm probability P_0(normalized statistic > x_threshold).

    Tilted mode inflates every coordinate variance to
    eps^2 / (1 - 2 t w_j eps^2) and weights by the likelihood ratio; the
    default t is the saddlepoint of the null quadratic form at the event
    threshold.
    """
    w = scheme.real_weights(epsilon)
    m = np.zeros(w.size)
    thr = _tp_threshold(scheme, epsilon, x_threshold)
    tilt = 0.0
    if mc.mode == TILTED:
        t = mc.tilt_t if mc.tilt_t is not None else chernoff.upper_tail_t_star_at(w, m, epsilon, thr)
        tilt = -float(t)
    return _estimate_tp(w, m, epsilon, thr, "gt", mc, tilt, stream, threads)


def estimate_beta(
    theta: CoefficientVector,
    scheme: WeightScheme,
    epsilon: float,
    x_threshold: float,
    mc: MCConfig,
    stream: int = 0,
    threads: int = 1,
) -> MCEstimate:
    """Miss probability P_theta(normalized statistic <= x_threshold).

    Tilted mode shrinks coordinates toward zero (variance
    eps^2 / (1 + 2 t w_j eps^2), mean theta_j / (1 + 2 t w_j eps^2)) with
    t defaulting to the minimizer of the lower-tail exponential bound at
    the event threshold; t = 0 when the event is not in the lower tail.
    """
    w, m = _real_components(theta, scheme, epsilon)
    thr = _tp_threshold(scheme, epsilon, x_threshold)
    tilt = 0.0
    if mc.mode == TILTED:
        if mc.tilt_t is not None:
            tilt = float(mc.tilt_t)
        else:
            tau_sq = float(np.sum(w * m * m))
            tilt = (
                chernoff.lower_tail_bound_at(w, m, epsilon, thr).t_star if tau_sq > thr else 0.0
            )
    return _estimate_tp(w, m, epsilon, thr, "le", mc, tilt, stream, threads)


def estimate_rejection(
    theta: CoefficientVector,
    scheme: WeightScheme,
    epsilon: float,
    x_threshold: float,
    mc: MCConfig,
    stream: int = 0,
    threads: int = 1,
) -> MCEstimate:
    """Rejection probability P_theta(normalized statistic > x_threshold) (the power)."""
    w, m = _real_components(theta, scheme, epsilon)
    thr = _tp_threshold(scheme, epsilon, x_threshold)
    tilt = 0.0
    if mc.mode == TILTED:
        t = (
            mc.tilt_t
            if mc.tilt_t is not None
            else chernoff.upper_tail_t_star_at(w, m, epsilon, thr)
        )
        tilt = -float(t)
    return _estimate_tp(w, m, epsilon, thr, "gt", mc, tilt, stream, threads)


# ---------------------------------------------------------------------------
# slope diagnostics
# ---------------------------------------------------------------------------


@dataclass
class SlopeEntry:
    epsilon: float
    x_alpha: float
    alpha_eps: float
    log_beta: float
    r_sq: float  # eps^(-2*omega)
    ratio: float  # |log beta| / r_sq
    beta: MCEstimate


@dataclass
class SlopeDiagnostic:
    """Empirical |log beta| against the target exponential scale eps^(-2*omega).

    Detectable families keep the ratio bounded away from zero along the
    grid; families invisible to the statistic have beta -> 1 - alpha_eps
    and the ratio collapses with alpha_eps.
    """

    entries: list[SlopeEntry]
    min_ratio: float
    final_over_initial: float


def slope_diagnostic(
    family: AlternativeFamily,
    params: RateParams,
    scheme: WeightScheme,
    eps_grid: Sequence[float],
    alpha: float | Callable[[float], float],
    mc: MCConfig,
    threads: int = 1,
) -> SlopeDiagnostic:
    """Measure the exponential decay of the miss probability along a grid.

    ``alpha`` is the size policy: a constant, or a map eps -> alpha_eps
    (shrinking sizes sharpen the contrast between detectable and
    undetectable families at desk scale).  When the miss probability is
    close to one it is refined through the complement: the rejection
    probability is estimated by upper-tail importance sampling and
    log(beta) = log1p(-rejection), which resolves |log beta| far below
    the plain-Monte-Carlo floor.
    """
    entries = []
    for i, eps in enumerate(sorted(eps_grid, reverse=True)):
        a_eps = alpha(eps) if callable(alpha) else float(alpha)
        x = threshold_x(a_eps)
        theta = family.generate(eps)
        beta = estimate_beta(theta, scheme, eps, x, mc, stream=2 * i, threads=threads)
        if beta.p_hat >= 0.5:
            rej = estimate_rejection(
                theta,
                scheme,
                eps,
                x,
                MCConfig(mc.n_reps, mc.seed, TILTED, None),
                stream=2 * i + 1,
                threads=threads,
            )
            log_beta = math.log1p(-min(rej.p_hat, 1.0 - 1e-300))
        else:
            log_beta = beta.log_p
        r_sq = eps ** (-2.0 * params.omega)
        entries.append(SlopeEntry(eps, x, a_eps, log_beta, r_sq, abs(log_beta) / r_sq, beta))
    ratios = [e.ratio for e in entries]
    final_over_initial = ratios[-1] / ratios[0] if ratios[0] > 0 else math.inf
    return SlopeDiagnostic(entries, min(ratios), final_over_initial)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

CSV_HEADER = "experiment_id,epsilon,test,x_alpha,p_hat,std_err,log_p,n_effective,mode,seed"


def format_float(x: float) -> str:
    """Shortest decimal that round-trips the double."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def csv_row(
    experiment_id: str,
    epsilon: float,
    test: str,
    x_alpha: float,
    est: MCEstimate,
    seed: Seed,
) -> str:
    fields = [
        experiment_id,
        format_float(epsilon),
        test,
        format_float(x_alpha),
        format_float(est.p_hat),
        format_float(est.std_err),
        format_float(est.log_p),
        format_float(est.n_effective),
        est.mode,
        str(int(seed)),
    ]
    return ",".join(fields)
