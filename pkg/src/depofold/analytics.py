"""Closed-form shot-noise, error and overhead formulas for the estimators.

Symbols: ``p`` is the global depolarization probability, ``s`` the shot
count, ``gamma = 1/(1-p*)`` the per-layer error strength over ``L`` layers,
and ``u = gamma**(-2L)`` the decay ratio seen by exponential ZNE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import as_generator


def shot_variance(o_eps: float, s: int, points: int = 1) -> float:
    """Binomial variance of a sampled <Z>; ``points=3`` spreads ``s`` over three circuits."""
    if points not in (1, 3):
        raise ValueError("points must be 1 or 3")
    if s < 1:
        raise ValueError("shots must be >= 1")
    return points * (1.0 - o_eps * o_eps) / s


def mse_avg(method: str, p: float, s: float) -> float:
    """Mean squared error averaged over true values uniform on [-1, 1]."""
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    base = 2 + 2 * p - p * p
    if method == "raw":
        return (base + s * (2 - p) ** 2) / (3 * s)
    if method == "rida":
        return base / (3 * s * (1 - p) ** 2)
    raise ValueError(f"unknown method {method!r}")


def rida_threshold_shots(p: float) -> float:
    """Shot count above which rescaling beats the unmitigated average error."""
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    return p * (2 + 2 * p - p * p) / ((2 - p) * (1 - p) ** 2)


@dataclass(frozen=True)
class OverheadQuery:
    gamma: float
    layers: float
    sigma2: float
    weights: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def norm2(self) -> float:
        return float(sum(w * w for w in self.weights))

    def gamma_l(self, power: float) -> float:
        return self.gamma ** (power * self.layers)


# coefficients of the parabola's zero-noise value at factors 1, 3, 5
QZNE_COEFFS = (15 / 8, -10 / 8, 3 / 8)


def overhead(method: str, q: OverheadQuery, exact: bool = False) -> float:
    """Shots needed to reach variance ``sigma2``.

    ``exact`` only changes cnot_qzne, where it keeps all three noise-factor
    terms instead of the leading one.
    """
    scale = q.norm2 / q.sigma2
    if method == "rida":
        return scale * q.gamma_l(2)
    if method == "ezne":
        return 1.5 * scale * q.gamma_l(6)
    if method == "cnot_qzne":
        if exact:
            c1, c3, c5 = QZNE_COEFFS
            return 3 * scale * (c5 ** 2 * q.gamma_l(10) + c3 ** 2 * q.gamma_l(6) + c1 ** 2 * q.gamma_l(2))
        return 27 / 64 * scale * q.gamma_l(10)
    raise ValueError(f"unknown method {method!r}")


def zero_error_qzne_ratio() -> float:
    """Shot ratio of split-shot quadratic ZNE to a single raw estimate at zero error."""
    return 3 * sum(c * c for c in QZNE_COEFFS)


def ezne_gradient(u: float) -> tuple[float, float, float]:
    """Partial derivatives of the monotone exponential-ZNE value w.r.t. (x1, x3, x5).

    They depend on the data only through u and always sum to 1.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    r = math.sqrt(u)
    g = u + r
    dg = 1 + 0.5 / r
    d1 = 1 + 1 / g + u * dg / g ** 2
    d3 = -1 / g - (1 + u) * dg / g ** 2
    d5 = dg / g ** 2
    return d1, d3, d5


def ezne_variance_exact(u: float, s: float) -> float:
    """Variance of exponential ZNE near zero signal with s/3 shots per point."""
    if s < 1:
        raise ValueError("shots must be >= 1")
    return 3 / s * sum(d * d for d in ezne_gradient(u))


def ezne_variance_leading(u: float, s: float) -> float:
    return 1.5 / (s * u ** 3)


@dataclass(frozen=True)
class SelectionStats:
    g1: int
    g2: int
    mean_a: float
    var_a: float
    mean_b: float
    var_b: float

    def __post_init__(self):
        if self.var_a < 0 or self.var_b < 0:
            raise ValueError("variances must be nonnegative")


def selection_variance(st: SelectionStats) -> tuple[float, float]:
    """Var(p') when exactly G1/G2 gates are drawn, and when the G gates' types are random."""
    fixed = 4 * (st.g1 * st.var_a + st.g2 * st.var_b)
    g = st.g1 + st.g2
    extra = 4 * (st.mean_a - st.mean_b) ** 2 * st.g1 * st.g2 / g if g else 0.0
    return fixed, fixed + extra


def simulate_selection(st: SelectionStats, draw_a, draw_b, trials: int,
                       seed: int | np.random.Generator = 0) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo p' = 2 * (sum of selected error rates) for both selection schemes.

    ``draw_a(rng, size)`` and ``draw_b(rng, size)`` sample one- and two-qubit
    error rates. In the random scheme each of the G gates is one-qubit with
    probability G1/G.
    """
    rng = as_generator(seed, "selection")
    g = st.g1 + st.g2
    fixed = 2 * (draw_a(rng, (trials, st.g1)).sum(axis=1) + draw_b(rng, (trials, st.g2)).sum(axis=1))
    is_a = rng.random((trials, g)) < st.g1 / g
    rates = np.where(is_a, draw_a(rng, (trials, g)), draw_b(rng, (trials, g)))
    return fixed, 2 * rates.sum(axis=1)


def variance_stderr(samples: np.ndarray) -> float:
    """Standard error of the unbiased sample variance, from the fourth central moment."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    m4 = np.mean(d ** 4)
    return float(math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 ** 2, 0.0) / n))


def geometric_u(p: float) -> float:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return (1 - p) ** 2


def layered_u(gamma: float, layers: float) -> float:
    return gamma ** (-2 * layers)


def predicted_rida_variance(o_eps: float, s: int, p: float) -> float:
    return (1 - o_eps * o_eps) / (s * (1 - p) ** 2)


def predictions(gamma: float, layers: float, sigma2: float, p: float, s: float,
                weights: Sequence[float] = (1.0,)) -> dict:
    """Table of predicted shots and errors, as printed by the CLI."""
    q = OverheadQuery(gamma, layers, sigma2, tuple(weights))
    u = layered_u(gamma, layers)
    return {
        "overhead_shots": {
            "rida": overhead("rida", q),
            "ezne": overhead("ezne", q),
            "cnot_qzne": overhead("cnot_qzne", q),
            "cnot_qzne_exact": overhead("cnot_qzne", q, exact=True),
        },
        "mse_avg": {"raw": mse_avg("raw", p, s), "rida": mse_avg("rida", p, s)},
        "rida_threshold_shots": rida_threshold_shots(p),
        "ezne_variance": {"exact": ezne_variance_exact(u, s), "leading": ezne_variance_leading(u, s)},
        "u": u,
    }
