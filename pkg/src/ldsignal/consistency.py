"""Besov-ball seminorms, rate algebra, and consistency diagnostics.

A family of alternatives S_eps with L2 norm of order eps^(2r) is detected
with exponentially small miss probability (at the scale eps^(-2*omega))
exactly when enough of its energy sits at frequencies below a constant
multiple of the effective dimension k_eps = eps^(-4+8r+4*omega); it
survives removal of orthogonal undetectable components ("purely"
consistent) exactly when the energy beyond every large multiple of k_eps
is negligible.  The border between the two behaviours is measured by the
Besov-type tail functional

    seminorm(theta, s) = sup_k k^(2s) * sum_{|j| >= k} |theta_j|^2,

with the smoothness s = r / (2 - 4r - 2*omega) determined by the rates.
Coefficient vectors with an unbounded tail functional generate concrete
undetectable high-frequency subsequences; ``build_inconsistent_family``
constructs them level by level.

Order-of-magnitude statements become two-sided ratio bounds with
recorded constants over a finite grid of noise levels plus a log-log
trend fit: the checkers report evidence, not asymptotic truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BasisError, NotACounterexampleError, ParameterError
from .model import COMPLEX, REAL, CoefficientVector, l2_norm_sq
from .quadratic import WeightScheme, mean_shift, polynomial_scheme

# ---------------------------------------------------------------------------
# rate algebra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateParams:
    """The rate pair (r, omega) and its derived exponents.

    r in (0, 1/2) is the L2-norm decay rate of the alternatives,
    omega (0 < 2*omega < 1 - 2r) the exponential scale of the target miss
    probabilities.  Derived: the Besov smoothness s = r/(2 - 4r - 2*omega)
    with the inverse identity r = (2 - 2*omega) s / (1 + 4 s), the
    effective-dimension exponent k_eps ~ eps^(-4+8r+4*omega), and the
    bandwidth exponent h_eps ~ eps^(4-8r-4*omega).
    """

    r: float
    omega: float
    s: float = field(init=False)
    k_eps_exponent: float = field(init=False)
    h_eps_exponent: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.r < 0.5:
            raise ParameterError(f"r must lie in (0, 1/2), got {self.r}")
        if not 0.0 < 2.0 * self.omega < 1.0 - 2.0 * self.r:
            raise ParameterError(
                f"omega must satisfy 0 < 2*omega < 1 - 2r, got omega={self.omega}, r={self.r}"
            )
        object.__setattr__(self, "s", self.r / (2.0 - 4.0 * self.r - 2.0 * self.omega))
        object.__setattr__(self, "k_eps_exponent", -4.0 + 8.0 * self.r + 4.0 * self.omega)
        object.__setattr__(self, "h_eps_exponent", 4.0 - 8.0 * self.r - 4.0 * self.omega)

    def r_round_trip(self) -> float:
        """(2 - 2*omega) s / (1 + 4 s); equals r up to rounding."""
        return (2.0 - 2.0 * self.omega) * self.s / (1.0 + 4.0 * self.s)


def rate_params(r: float, omega: float) -> RateParams:
    return RateParams(r, omega)


def k_eps(params: RateParams, epsilon: float) -> int:
    """Effective dimension ceil(eps^(-4+8r+4*omega)) (proportionality constant 1)."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    return max(int(math.ceil(epsilon**params.k_eps_exponent)), 1)


# ---------------------------------------------------------------------------
# Besov seminorm
# ---------------------------------------------------------------------------


def _tail_indices(theta: CoefficientVector) -> tuple[np.ndarray, np.ndarray]:
    """Sorted distinct |j| >= 1 with the coefficient mass at each."""
    mass: dict[int, float] = {}
    for j, v in theta.coeffs.items():
        a = abs(j)
        if a == 0:
            continue
        mass[a] = mass.get(a, 0.0) + abs(v) ** 2
    if not mass:
        return np.array([], dtype=int), np.array([])
    idx = np.array(sorted(mass), dtype=int)
    return idx, np.array([mass[int(i)] for i in idx])


def besov_seminorm(theta: CoefficientVector, s: float) -> float:
    """sup over k >= 1 of k^(2s) * sum_{|j| >= k} |theta_j|^2.

    The supremum over real thresholds of the piecewise-constant tail is
    attained at integer k equal to a support point (the tail is constant
    between support points while k^(2s) grows), so scanning stored
    indices is exact.  theta_0 never enters the tail.
    """
    if not s > 0:
        raise ParameterError(f"s must be > 0, got {s}")
    idx, mass = _tail_indices(theta)
    if idx.size == 0:
        return 0.0
    tails = np.cumsum(mass[::-1])[::-1]  # tails[i] = mass at indices >= idx[i]
    return float(np.max(idx.astype(float) ** (2.0 * s) * tails))


# ---------------------------------------------------------------------------
# alternative families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlternativeFamily:
    """A deterministic map eps -> signal, with its nominal norm-decay rate."""

    generate: Callable[[float], CoefficientVector]
    r_target: float
    label: str

    def norm_rate_bounds(self, eps_grid: Sequence[float]) -> tuple[float, float]:
        """Recorded (c, C) with c <= ||S_eps|| / eps^(2r) <= C over the grid."""
        ratios = [
            math.sqrt(l2_norm_sq(self.generate(e))) / e ** (2.0 * self.r_target)
            for e in eps_grid
        ]
        return min(ratios), max(ratios)


def _resolve_location(loc: dict, params: RateParams, epsilon: float) -> int:
    if "j0" in loc:
        return int(loc["j0"])
    mult = float(loc.get("k_multiple", 1.0))
    power = float(loc.get("eps_power", 0.0))
    return max(int(math.ceil(mult * epsilon**power * k_eps(params, epsilon))), 1)


def single_mode_family(
    params: RateParams,
    j0: int | None = 1,
    k_multiple: float | None = None,
    eps_power: float = 0.0,
    amplitude: float = 1.0,
    label: str | None = None,
) -> AlternativeFamily:
    """All mass on one index: fixed j0, or ceil(k_multiple * eps^eps_power * k_eps)."""
    loc = {"j0": j0} if k_multiple is None else {"k_multiple": k_multiple, "eps_power": eps_power}
    r = params.r

    def gen(eps: float) -> CoefficientVector:
        j = _resolve_location(loc, params, eps)
        return CoefficientVector(REAL, {j: amplitude * eps ** (2.0 * r)}, j)

    if label is None:
        label = f"single-mode({loc}, amp={amplitude})"
    return AlternativeFamily(gen, r, label)


def split_mass_family(
    params: RateParams,
    locations: Sequence[tuple[dict, float]],
    amplitude: float = 1.0,
    label: str | None = None,
) -> AlternativeFamily:
    """Mass split over several locations; fractions must sum to 1."""
    fractions = [f for _, f in locations]
    if abs(sum(fractions) - 1.0) > 1e-12 or any(f <= 0 for f in fractions):
        raise ParameterError("split-mass fractions must be positive and sum to 1")
    r = params.r

    def gen(eps: float) -> CoefficientVector:
        total_sq = (amplitude * eps ** (2.0 * r)) ** 2
        coeffs: dict[int, float] = {}
        for loc, frac in locations:
            j = _resolve_location(loc, params, eps)
            coeffs[j] = math.sqrt(coeffs.get(j, 0.0) ** 2 + frac * total_sq)
        return CoefficientVector(REAL, coeffs, max(coeffs))

    if label is None:
        label = f"split-mass({locations}, amp={amplitude})"
    return AlternativeFamily(gen, r, label)


def power_law_family(
    params: RateParams,
    exponent: float,
    span_multiple: float = 1.0,
    amplitude: float = 1.0,
    label: str | None = None,
) -> AlternativeFamily:
    """theta_j proportional to j^-exponent over 1..ceil(span_multiple * k_eps), norm eps^(2r)."""
    if exponent <= 0.5:
        raise ParameterError("power-law exponent must exceed 1/2 for a summable profile")
    r = params.r

    def gen(eps: float) -> CoefficientVector:
        top = max(int(math.ceil(span_multiple * k_eps(params, eps))), 1)
        j = np.arange(1, top + 1, dtype=float)
        profile = j**-exponent
        profile *= amplitude * eps ** (2.0 * r) / math.sqrt(float(np.sum(profile**2)))
        return CoefficientVector(REAL, {int(i): float(v) for i, v in zip(j, profile)}, top)

    if label is None:
        label = f"power-law(p={exponent}, span={span_multiple})"
    return AlternativeFamily(gen, r, label)


def table_family(
    table: Callable[[float], CoefficientVector], r_target: float, label: str = "custom-table"
) -> AlternativeFamily:
    return AlternativeFamily(table, r_target, label)


# ---------------------------------------------------------------------------
# consistency checks
# ---------------------------------------------------------------------------


def _log_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log(1/eps); -inf when y hits 0."""
    if any(y <= 0 for y in ys):
        return -math.inf
    lx = [math.log(1.0 / x) for x in xs]
    ly = [math.log(y) for y in ys]
    if len(set(lx)) < 2:
        return 0.0
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class LdConsistencyReport:
    """Low-frequency mass of a family against the detection window."""

    epsilons: list[float]
    mass_ratios: list[float]  # sum_{|j| < c2 k_eps} |theta_j|^2 / eps^(4r)
    consistent_per_eps: list[bool]
    trend: float  # slope of log ratio vs log(1/eps); ~0 and ratios >= c1 means consistent
    consistent: bool


def ld_consistency_check(
    family: AlternativeFamily,
    params: RateParams,
    eps_grid: Sequence[float],
    c2: float = 1.0,
    c1: float = 0.05,
    slope_tol: float = 0.5,
) -> LdConsistencyReport:
    """Detectability of a family: does mass below c2 * k_eps stay of full order?

    A family is flagged consistent when every mass ratio is at least c1
    and the fitted trend does not decay (slope > -slope_tol on the
    log(1/eps) scale); it is flagged inconsistent when the ratio is
    heading to zero.  The constants are existential in the theory; they
    are explicit parameters here and the profile itself is the evidence.
    """
    if c2 <= 0:
        raise ParameterError("c2 must be positive")
    eps_grid = list(eps_grid)
    ratios = []
    for eps in eps_grid:
        theta = family.generate(eps)
        window = c2 * k_eps(params, eps)
        mass = sum(abs(v) ** 2 for j, v in theta.coeffs.items() if abs(j) < window)
        ratios.append(mass / eps ** (4.0 * params.r))
    flags = [ratio >= c1 for ratio in ratios]
    trend = _log_slope(eps_grid, ratios)
    consistent = all(flags) and trend > -slope_tol
    return LdConsistencyReport(eps_grid, ratios, flags, trend, consistent)


@dataclass
class PurityReport:
    """Tail mass beyond C1 * k_eps for each tested C1."""

    c1_grid: list[float]
    delta_profile: list[float]  # sup over the eps grid of the tail-mass ratio
    deltas: list[float]
    pure: bool


def pure_consistency_check(
    family: AlternativeFamily,
    params: RateParams,
    eps_grid: Sequence[float],
    c1_grid: Sequence[float] = (1.0, 2.0, 4.0),
    deltas: Sequence[float] = (0.5, 0.2, 0.1, 0.05, 0.01),
) -> PurityReport:
    """Does the high-frequency tail vanish for some window multiple?

    ``delta_profile[i]`` is the worst (over the grid) relative tail mass
    beyond c1_grid[i] * k_eps.  The family is flagged pure when some
    tested multiple drives the profile below the smallest delta.
    """
    eps_grid = list(eps_grid)
    profile = []
    for c1v in c1_grid:
        worst = 0.0
        for eps in eps_grid:
            theta = family.generate(eps)
            window = c1v * k_eps(params, eps)
            tail = sum(abs(v) ** 2 for j, v in theta.coeffs.items() if abs(j) > window)
            worst = max(worst, tail / eps ** (4.0 * params.r))
        profile.append(worst)
    pure = min(profile) <= min(deltas)
    return PurityReport(list(c1_grid), profile, list(deltas), pure)


# ---------------------------------------------------------------------------
# orthogonal decomposition and interaction
# ---------------------------------------------------------------------------


@dataclass
class DecompositionResult:
    s1: CoefficientVector
    s2: CoefficientVector
    cutoff_index: int
    besov_seminorm_s1: float
    pythagoras_residual: float


def orthogonal_decompose(theta: CoefficientVector, cutoff: int, s: float) -> DecompositionResult:
    """Split theta into the part with |j| <= cutoff and its complement.

    The split is orthogonal by construction, so the squared norms add
    exactly; the reported seminorm of the low-frequency part is the
    smallest ball radius containing it.
    """
    if cutoff < 1:
        raise ParameterError("cutoff must be >= 1")
    low = {j: v for j, v in theta.coeffs.items() if abs(j) <= cutoff}
    high = {j: v for j, v in theta.coeffs.items() if abs(j) > cutoff}
    s1 = CoefficientVector(theta.basis, low, theta.jmax)
    s2 = CoefficientVector(theta.basis, high, theta.jmax)
    residual = abs(l2_norm_sq(theta) - l2_norm_sq(s1) - l2_norm_sq(s2))
    return DecompositionResult(s1, s2, cutoff, besov_seminorm(s1, s), residual)


@dataclass
class InteractionReport:
    epsilons: list[float]
    defects: list[float]  # |  ||S+S'||^2 - ||S||^2 - ||S'||^2 | / eps^(4r)
    trend: float


def interaction_check(
    fam_a: AlternativeFamily, fam_b: AlternativeFamily, eps_grid: Sequence[float]
) -> InteractionReport:
    """Normalized cross term of two families along the grid.

    The defect is 2 <S, S'> / eps^(4r); it vanishes identically for
    orthogonal constructions and stays of order one when the families
    share energy at common indices.
    """
    eps_grid = list(eps_grid)
    r = fam_a.r_target
    defects = []
    for eps in eps_grid:
        a = fam_a.generate(eps)
        b = fam_b.generate(eps)
        if a.basis != b.basis:
            raise BasisError("families use different bases")
        cross = 0.0
        for j, v in a.coeffs.items():
            w = b.coeffs.get(j)
            if w is not None:
                cross += (complex(v) * complex(w).conjugate()).real
        defects.append(abs(2.0 * cross) / eps ** (4.0 * r))
    return InteractionReport(eps_grid, defects, _log_slope(eps_grid, defects))


# ---------------------------------------------------------------------------
# constructive inconsistent families
# ---------------------------------------------------------------------------


@dataclass
class CounterexampleLevel:
    """One undetectable high-frequency block extracted from a rough vector."""

    m: int  # level cutoff: the block lives at |j| >= m (or m <= |j| <= 2m)
    c_value: float  # tail functional m^(2s) * tail mass: grows along levels
    n: float  # sample-size surrogate: eps = n^(-1/2)
    epsilon: float
    eta: CoefficientVector  # the high-pass (or band) signal at this level
    norm_sq: float


def build_inconsistent_family(
    tau: CoefficientVector,
    s: float,
    r: float,
    omega: float,
    mode: str = "highpass",
    min_levels: int = 4,
    growth_required: float = 1.5,
    max_levels: int | None = None,
) -> list[CounterexampleLevel]:
    """Extract undetectable high-frequency blocks from a rough vector.

    Scans dyadic cutoffs m and keeps those where the tail functional
    C(m) = m^(2s) * sum_{|j| >= m} |tau_j|^2 sets a new record; a vector
    inside a Besov ball has a bounded (eventually decreasing) functional
    and is rejected.  Each kept level carries the restriction eta of tau
    to |j| >= m (``highpass``) or m <= |j| <= 2m (``band``), and the
    noise-level bookkeeping n = C^(-1/(2r)) m^(s/r), eps = n^(-1/2), under
    which ||eta||^2 = eps^(4r) exactly in highpass mode (proportionality
    constants fixed to 1).
    """
    if mode not in ("highpass", "band"):
        raise ParameterError(f"mode must be 'highpass' or 'band', got {mode}")
    if not (s > 0 and 0 < r < 0.5 and 0 < 2 * omega < 1 - 2 * r):
        raise ParameterError("invalid (s, r, omega)")
    idx, mass = _tail_indices(tau)
    if idx.size == 0:
        raise NotACounterexampleError("vector has no support away from zero frequency")
    top = int(idx[-1])
    tails = {int(i): t for i, t in zip(idx, np.cumsum(mass[::-1])[::-1])}

    def tail_at(m: int) -> float:
        pos = np.searchsorted(idx, m)
        if pos >= idx.size:
            return 0.0
        return float(tails[int(idx[pos])])

    levels: list[CounterexampleLevel] = []
    best = -math.inf
    m = 1
    while m <= top:
        c_val = float(m ** (2.0 * s) * tail_at(m))
        if c_val > best and c_val > 0:
            best = c_val
            if mode == "highpass":
                kept = {j: v for j, v in tau.coeffs.items() if abs(j) >= m}
            else:
                kept = {j: v for j, v in tau.coeffs.items() if m <= abs(j) <= 2 * m}
            eta = CoefficientVector(tau.basis, kept, tau.jmax)
            n = c_val ** (-1.0 / (2.0 * r)) * float(m) ** (s / r)
            levels.append(
                CounterexampleLevel(m, c_val, n, n**-0.5, eta, l2_norm_sq(eta))
            )
            if max_levels is not None and len(levels) >= max_levels:
                break
        m *= 2
    if len(levels) < min_levels or levels[-1].c_value < growth_required * levels[0].c_value:
        raise NotACounterexampleError(
            f"tail functional is bounded on the stored support "
            f"({len(levels)} growing levels, growth "
            f"{levels[-1].c_value / levels[0].c_value if levels else 0.0:.3g})"
        )
    return levels


def snr_profile(
    levels: Sequence[CounterexampleLevel],
    params: RateParams,
    scheme_factory: Callable[[float], WeightScheme] | None = None,
) -> list[float]:
    """Weighted signal-to-noise of each level against its own noise level.

    Returns eps^(-4) sum_j kappa^2_{eps,j} |eta_j|^2 * eps^(4*omega) per
    level; a decreasing profile certifies that the blocks outrun the
    detection band of the scheme.  The default scheme is a full-support
    polynomial-decay scheme long enough to cover every block; a
    hard-cutoff scheme zeroes the profile as soon as the block passes the
    cutoff, which verifies the same conclusion degenerately.
    """
    levels = list(levels)
    if scheme_factory is None:
        top = max(lvl.eta.jmax for lvl in levels)

        def scheme_factory(eps: float) -> WeightScheme:
            k = eps**params.k_eps_exponent
            return polynomial_scheme(
                2.0, params.r, params.omega, tail_multiple=max(2.0 * top / k, 2.0)
            )

    out = []
    for lvl in levels:
        scheme = scheme_factory(lvl.epsilon)
        d = mean_shift(lvl.eta, scheme, lvl.epsilon)
        out.append(d * lvl.epsilon ** (4.0 * params.omega))
    return out
