"""Gaussian white-noise sequence model.

A signal on [0, 1] is represented by finitely many basis coefficients
theta_j.  Observing the signal at noise level eps > 0 means observing

    y_j = theta_j + eps * xi_j

with independent standard Gaussian noise xi_j per coordinate.  Two bases
are supported:

* ``real``    -- a real orthonormal system, indices j >= 1, real theta_j;
* ``complex`` -- the exponential system exp(2*pi*i*j*t), indices
  -jmax <= j <= jmax, complex theta_j with Hermitian symmetry
  theta_{-j} = conj(theta_j) and real theta_0.

In the complex basis the noise convention is E|xi_j|^2 = 1: xi_0 is real
standard normal, and for j > 0 the real and imaginary parts of xi_j are
independent N(0, 1/2) with xi_{-j} = conj(xi_j).  With this pairing the
quadratic statistics of the complex model coincide with their real-basis
counterparts coordinate for coordinate.

Indices not stored in a vector are implicitly zero.  All values are
immutable after construction; simulation is deterministic given a 64-bit
seed, which expands to independent substreams through a counter-based
split (``derive_rng``) so that parallel replication only needs disjoint
counters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BasisError, ParameterError, ResolutionError

REAL = "real"
COMPLEX = "complex"

# A seed is a plain unsigned 64-bit integer.
Seed = int

_MAX_SEED = 2**64 - 1


def _check_seed(seed: Seed) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) <= _MAX_SEED:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def derive_rng(seed: Seed, *path: int) -> np.random.Generator:
    """Deterministic substream of a master seed.

    Distinct ``path`` tuples give independent generators; the same tuple
    always reproduces the same stream.  Callers that parallelise work
    assign one path element per task (e.g. a block counter).
    """
    _check_seed(seed)
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path)))


def _validate_coeffs(basis: str, coeffs: Mapping[int, complex], jmax: int) -> dict:
    if basis not in (REAL, COMPLEX):
        raise BasisError(f"unknown basis {basis!r}")
    if jmax < 1:
        raise ParameterError("jmax must be a positive integer")
    out: dict = {}
    for j, v in coeffs.items():
        j = int(j)
        if basis == REAL:
            if j < 1 or j > jmax:
                raise ParameterError(f"real-basis index {j} outside 1..{jmax}")
            v = float(v)
            if not np.isfinite(v):
                raise ParameterError(f"coefficient at j={j} is not finite")
            out[j] = v
        else:
            if abs(j) > jmax:
                raise ParameterError(f"complex-basis index {j} outside -{jmax}..{jmax}")
            v = complex(v)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ParameterError(f"coefficient at j={j} is not finite")
            out[j] = v
    if basis == COMPLEX:
        # Hermitian closure: fill missing partners, then verify exactly.
        for j in list(out):
            if j != 0 and -j not in out:
                out[-j] = out[j].conjugate()
        if 0 in out:
            if out[0].imag != 0.0:
                raise ParameterError("theta_0 must be real in the complex basis")
            out[0] = complex(out[0].real, 0.0)
        for j in out:
            if j > 0 and out[-j] != out[j].conjugate():
                raise ParameterError(f"Hermitian symmetry violated at j={j}")
    return out


@dataclass(frozen=True)
class CoefficientVector:
    """A signal as finitely many basis coefficients.

    ``coeffs`` maps index j to the coefficient value; indices outside the
    stored support are zero.  In the complex basis the stored map is
    Hermitian-closed at construction.
    """

    basis: str
    coeffs: Mapping[int, complex]
    jmax: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validate_coeffs(self.basis, self.coeffs, self.jmax))

    @staticmethod
    def zero(jmax: int = 1, basis: str = REAL) -> "CoefficientVector":
        return CoefficientVector(basis, {}, jmax)

    @staticmethod
    def real(coeffs: Mapping[int, float], jmax: int | None = None) -> "CoefficientVector":
        jm = max(coeffs) if coeffs else 1
        return CoefficientVector(REAL, coeffs, jmax if jmax is not None else jm)

    @staticmethod
    def complex_exp(coeffs: Mapping[int, complex], jmax: int | None = None) -> "CoefficientVector":
        jm = max((abs(j) for j in coeffs), default=1)
        jm = max(jm, 1)
        return CoefficientVector(COMPLEX, coeffs, jmax if jmax is not None else jm)

    def value(self, j: int) -> complex:
        return self.coeffs.get(j, 0.0)

    def dense(self) -> np.ndarray:
        """Dense array over the full index range.

        Real basis: entries for j = 1..jmax.  Complex basis: entries for
        j = -jmax..jmax (index 0 of the array is j = -jmax).
        """
        if self.basis == REAL:
            out = np.zeros(self.jmax)
            for j, v in self.coeffs.items():
                out[j - 1] = v
            return out
        out = np.zeros(2 * self.jmax + 1, dtype=complex)
        for j, v in self.coeffs.items():
            out[j + self.jmax] = v
        return out

    def to_json(self) -> str:
        rows = []
        for j in sorted(self.coeffs):
            v = self.coeffs[j]
            if self.basis == REAL:
                rows.append([j, float(v)])
            else:
                rows.append([j, v.real, v.imag])
        return json.dumps({"basis": self.basis, "jmax": self.jmax, "coeffs": rows})

    @staticmethod
    def from_json(text: str) -> "CoefficientVector":
        doc = json.loads(text)
        basis = doc["basis"]
        coeffs = {}
        for row in doc["coeffs"]:
            if basis == REAL:
                coeffs[int(row[0])] = float(row[1])
            else:
                im = row[2] if len(row) > 2 else 0.0
                coeffs[int(row[0])] = complex(row[1], im)
        return CoefficientVector(basis, coeffs, int(doc["jmax"]))


@dataclass(frozen=True)
class Observation:
    """Observed coefficients y_j = theta_j + eps * xi_j at noise level eps."""

    basis: str
    y: Mapping[int, complex]
    epsilon: float
    jmax: int = field(default=0)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        jm = self.jmax
        if jm == 0:
            jm = max((abs(j) for j in self.y), default=1) or 1
            object.__setattr__(self, "jmax", jm)
        object.__setattr__(self, "y", _validate_coeffs(self.basis, self.y, jm))

    def value(self, j: int) -> complex:
        return self.y.get(j, 0.0)

    def dense(self) -> np.ndarray:
        if self.basis == REAL:
            out = np.zeros(self.jmax)
            for j, v in self.y.items():
                out[j - 1] = v
            return out
        out = np.zeros(2 * self.jmax + 1, dtype=complex)
        for j, v in self.y.items():
            out[j + self.jmax] = v
        return out


def simulate_observation(theta: CoefficientVector, epsilon: float, seed: Seed) -> Observation:
    """Draw one observation of the sequence model at noise level ``epsilon``.

    Every index of the full range (1..jmax, or -jmax..jmax) receives
    noise, whether or not the signal stores it.  Deterministic given
    ``seed``; two calls with equal arguments return identical values.
    """
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    rng = derive_rng(seed)
    if theta.basis == REAL:
        xi = rng.standard_normal(theta.jmax)
        y = {j: theta.value(j) + epsilon * xi[j - 1] for j in range(1, theta.jmax + 1)}
        return Observation(REAL, y, epsilon, theta.jmax)
    jm = theta.jmax
    xi0 = rng.standard_normal()
    re = rng.standard_normal(jm) * np.sqrt(0.5)
    im = rng.standard_normal(jm) * np.sqrt(0.5)
    y: dict = {0: complex(theta.value(0).real + epsilon * xi0, 0.0)}
    for j in range(1, jm + 1):
        yj = theta.value(j) + epsilon * complex(re[j - 1], im[j - 1])
        y[j] = yj
        y[-j] = yj.conjugate()
    return Observation(COMPLEX, y, epsilon, jm)


def l2_norm_sq(theta: CoefficientVector) -> float:
    """Sum of |theta_j|^2 over the stored support (Parseval value of the L2 norm)."""
    return float(sum(abs(v) ** 2 for v in theta.coeffs.values()))


def fourier_coefficients(samples: np.ndarray, jmax: int) -> CoefficientVector:
    """Exponential-basis coefficients of a 1-periodic function from a uniform grid.

    ``samples`` holds f(n/N) for n = 0..N-1.  Returns theta_j for
    |j| <= jmax with theta_j = (1/N) sum_n exp(2*pi*i*j*n/N) f(n/N), the
    rectangle rule on the periodic grid (spectrally accurate for smooth
    periodic f).  Requires N >= 4*jmax so the requested band is well
    inside the Nyquist range.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if jmax < 1:
        raise ParameterError("jmax must be positive")
    if n < 4 * jmax:
        raise ResolutionError(f"grid of {n} points is too coarse for jmax={jmax} (need N >= 4*jmax)")
    spec = np.fft.ifft(samples)  # ifft[j] = (1/N) sum_n f_n exp(+2*pi*i*j*n/N)
    coeffs = {}
    for j in range(-jmax, jmax + 1):
        coeffs[j] = complex(spec[j % n])
    # enforce exact Hermitian pairing against roundoff in the fft
    out = {0: complex(coeffs[0].real, 0.0)}
    for j in range(1, jmax + 1):
        avg = 0.5 * (coeffs[j] + coeffs[-j].conjugate())
        out[j] = avg
        out[-j] = avg.conjugate()
    return CoefficientVector(COMPLEX, out, jmax)
