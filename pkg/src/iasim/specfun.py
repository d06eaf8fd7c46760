"""Exponential integrals and the closed-form ergodic MIMO rate.

The ergodic rate of a Rayleigh channel with ``d`` streams over a ``d x m``
Gaussian matrix is written as a finite sum of terms ``e^z E_{n+1}(z)``
with ``z = d / snr``.  Those products are evaluated through the scaled
integral ``e^z E_n(z)`` so that neither factor over- or underflows at
extreme SNR values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "RateFormulaInput",
    "expint",
    "expint_scaled",
    "expint_scaled_orders",
    "ergodic_rate",
    "rate_coefficients",
    "mc_rate_oracle",
    "OracleEstimate",
]

EULER_GAMMA = 0.5772156649015329
LOG2E = math.log2(math.e)

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 10_000


@dataclass(frozen=True)
class RateFormulaInput:
    """Arguments of the closed-form rate.

    ``snr`` is a linear power ratio, ``d`` the smaller and ``m`` the larger
    dimension of the Gaussian matrix.
    """

    snr: float
    d: int
    m: int

    def __post_init__(self):
        if not self.snr > 0:
            raise ValueError(f"snr must be > 0, got {self.snr}")
        if not (1 <= self.d <= self.m):
            raise ValueError(f"need 1 <= d <= m, got d={self.d}, m={self.m}")


def _check_args(n: int, z: float) -> None:
    if n < 0:
        raise ValueError(f"order n must be non-negative, got {n}")
    if not z > 0:
        raise ValueError(f"expint requires z > 0, got {z}")


def _e1_series(z: float) -> float:
    # E1(z) = -gamma - ln z - sum_{k>=1} (-z)^k / (k k!), used for z < 1
    total = 0.0
    term = 1.0
    for k in range(1, _MAXIT):
        term *= -z / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(z) - total


def _scaled_cf(n: int, z: float) -> float:
    """``e^z E_n(z)`` by the modified Lentz continued fraction (z >= 1)."""
    b = z + n
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        a = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction for E_{n}({z}) did not converge")


def expint_scaled_orders(nmax: int, z: float) -> np.ndarray:
    """Return ``e^z E_n(z)`` for ``n = 0, 1, ..., nmax``.

    For ``z < 1`` the series for ``E_1`` is pushed upward with
    ``E_{n+1} = (e^{-z} - z E_n) / n``, which is stable because ``z/n < 1``.
    For ``z >= 1`` every order comes from its own continued fraction, since
    the upward recurrence amplifies errors by ``z/n`` per step there.
    """
    _check_args(nmax, z)
    out = np.empty(nmax + 1)
    out[0] = 1.0 / z
    if nmax == 0:
        return out
    if z < 1.0:
        ez = math.exp(z)
        en = _e1_series(z)
        out[1] = ez * en
        emz = math.exp(-z)
        for n in range(1, nmax):
            en = (emz - z * en) / n
            out[n + 1] = ez * en
    else:
        for n in range(1, nmax + 1):
            out[n] = _scaled_cf(n, z)
    return out


def expint_scaled(n: int, z: float) -> float:
    """``e^z E_n(z)``, finite for every ``z > 0``."""
    return float(expint_scaled_orders(n, z)[n])


def expint(n: int, z: float) -> float:
    """Exponential integral ``E_n(z) = int_1^inf e^{-zt} t^{-n} dt``.

    Parameters
    ----------
    n : int
        Non-negative order. ``E_0(z) = e^{-z}/z``.
    z : float
        Argument, strictly positive.

    Returns
    -------
    float
        ``E_n(z)``; exactly 0.0 once ``e^{-z}`` underflows.

    Raises
    ------
    ValueError
        If ``n < 0`` or ``z <= 0``.
    """
    _check_args(n, z)
    if z > 745.0:
        return 0.0
    return expint_scaled(n, z) * math.exp(-z)


@lru_cache(maxsize=None)
def rate_coefficients(d: int, m: int) -> tuple[float, ...]:
    """Weights ``c_n`` such that the rate is ``log2(e) sum_n c_n e^z E_{n+1}(z)``.

    Collects the triple sum over ``(i, j, l)`` of the closed form for each
    inner index ``n = 0 .. m - 1 + d - 1``.  Accumulated in exact rationals.
    """
    if not (1 <= d <= m):
        raise ValueError(f"need 1 <= d <= m, got d={d}, m={m}")
    f = math.factorial
    q = m - d
    acc = [Fraction(0)] * (q + 2 * (d - 1) + 1)
    for i in range(d):
        for j in range(i + 1):
            for l in range(2 * j + 1):
                num = (-1) ** l * f(2 * j) * f(q + l)
                den = 2 ** (2 * i - l) * f(j) * f(l) * f(q + j)
                coef = Fraction(num, den) * math.comb(2 * i - 2 * j, i - j) * math.comb(
                    2 * j + 2 * q, 2 * j - l
                )
                for n in range(q + l + 1):
                    acc[n] += coef
    return tuple(float(c) for c in acc)


def ergodic_rate(snr: float | RateFormulaInput, d: int | None = None, m: int | None = None) -> float:
    """Closed-form ``E[log2 det(I_d + (snr/d) H H^*)]`` for ``d x m`` Rayleigh ``H``.

    Accepts either a :class:`RateFormulaInput` or the triple ``(snr, d, m)``.
    ``snr == 0`` returns 0.0 (the zero-power limit); negative SNR raises.
    """
    if isinstance(snr, RateFormulaInput):
        inp = snr
    else:
        if d is None or m is None:
            raise TypeError("ergodic_rate needs d and m when snr is a number")
        if snr == 0:
            if not (1 <= d <= m):
                raise ValueError(f"need 1 <= d <= m, got d={d}, m={m}")
            return 0.0
        inp = RateFormulaInput(float(snr), int(d), int(m))
    coefs = rate_coefficients(inp.d, inp.m)
    z = inp.d / inp.snr
    scaled = expint_scaled_orders(len(coefs), z)
    total = math.fsum(c * s for c, s in zip(coefs, scaled[1:]))
    return max(LOG2E * total, 0.0)


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    std_err: float
    samples: int


def mc_rate_oracle(
    snr: float,
    d: int,
    m: int,
    samples: int = 10**6,
    seed: int = 0,
    batch: int = 100_000,
) -> OracleEstimate:
    """Monte Carlo estimate of ``E[log2 det(I_d + (snr/d) H H^*)]``.

    Draws i.i.d. ``d x m`` standard complex Gaussian matrices; the log-det
    is computed from the eigenvalues of the Hermitian ``d x d`` product.
    """
    if samples < 10**4:
        raise ValueError("mc_rate_oracle needs at least 1e4 samples")
    if snr == 0:
        return OracleEstimate(0.0, 0.0, samples)
    rng = np.random.default_rng(seed)
    s1 = 0.0
    s2 = 0.0
    left = samples
    while left > 0:
        b = min(batch, left)
        h = (rng.standard_normal((b, d, m)) + 1j * rng.standard_normal((b, d, m))) / math.sqrt(2)
        gram = h @ np.conj(np.swapaxes(h, -1, -2))
        lam = np.linalg.eigvalsh(gram)
        r = np.sum(np.log2(1.0 + (snr / d) * np.clip(lam, 0, None)), axis=-1)
        s1 += r.sum()
        s2 += np.dot(r, r)
        left -= b
    mean = s1 / samples
    var = max(s2 / samples - mean**2, 0.0) * samples / (samples - 1)
    return OracleEstimate(mean, math.sqrt(var / samples), samples)
