"""Large-time asymptotics of the tree heat kernel.

Away from the origin ``h_t(n)`` behaves like

    2/gamma0 (C + 1) e^{-(1-gamma0) t} / t (1 + n) q^{-n/2} hZ_{t gamma0}(n + 1),

where ``C`` is the limit of ``sum_{k>=1} q^{-k} hZ(n+2k+1)/hZ(n+1)`` and only
depends on the limit of ``n/t``.  Near the origin (``n = o(sqrt t)``) the
kernel is a multiple of ``phi0(n) t^{-3/2} e^{-(1-gamma0) t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special_fn import LogVal, heat_z, log_heat_z_table
from .spectral import log_phi0
from .tree_geom import TreeParams

__all__ = [
    "Regime",
    "Prediction",
    "ballistic",
    "diffusive",
    "super_ballistic",
    "classify",
    "constant_c",
    "ballistic_base",
    "predict_ballistic",
    "predict_near_origin",
    "gauss_integral",
    "gauss_integral_check",
    "gauss_integral_exact",
    "near_origin_constant",
    "ratio_prediction",
]


@dataclass(frozen=True)
class Regime:
    """``kind`` is ``"ballistic"`` (with speed ``c0 = lim n/t > 0``),
    ``"diffusive"`` (``n/t -> 0``) or ``"super_ballistic"`` (``n/t -> inf``)."""

    kind: str
    c0: float | None = None

    def __post_init__(self):
        if self.kind not in ("ballistic", "diffusive", "super_ballistic"):
            raise ValueError(f"unknown regime {self.kind!r}")
        if self.kind == "ballistic" and not (self.c0 is not None and self.c0 > 0):
            raise ValueError("the ballistic regime needs a speed c0 > 0")

    def s0(self, q: int) -> float:
        if self.kind != "ballistic":
            raise ValueError("s0 is only defined for the ballistic regime")
        return TreeParams(q).gamma0 / self.c0


def ballistic(c0: float) -> Regime:
    return Regime("ballistic", float(c0))


def diffusive() -> Regime:
    return Regime("diffusive")


def super_ballistic() -> Regime:
    return Regime("super_ballistic")


def classify(n: float, t: float, tol: float = 1e-2) -> Regime:
    """Regime suggested by a single point: speed ``n/t`` below ``tol`` is
    diffusive, above ``1/tol`` super-ballistic."""
    v = n / t
    if v < tol:
        return diffusive()
    if v > 1 / tol:
        return super_ballistic()
    return ballistic(v)


def _contraction(s0: float) -> float:
    # s0 / (1 + sqrt(1 + s0^2)) = exp(-asinh(1/s0))
    return math.exp(-math.asinh(1.0 / s0))


def constant_c(regime: Regime, q: int) -> float:
    """The constant ``C`` for a regime: ``r/(1-r)``, ``1/(q-1)`` or ``0``.

    In the ballistic case ``r = q^{-1} (s0/(1 + sqrt(1 + s0^2)))^2``.
    """
    if regime.kind == "diffusive":
        return 1.0 / (q - 1)
    if regime.kind == "super_ballistic":
        return 0.0
    r = _contraction(regime.s0(q)) ** 2 / q
    return r / (1.0 - r)


def ballistic_base(regime: Regime, q: int) -> float:
    """``sqrt(q) (1 + sqrt(1 + s0^2)) / s0``, the per-step ratio in the ballistic window."""
    return math.sqrt(q) / _contraction(regime.s0(q))


@dataclass(frozen=True)
class Prediction:
    value: LogVal
    constant: float
    regime: Regime

    @property
    def log(self) -> float:
        return self.value.log


def predict_ballistic(n: int, t: float, regime: Regime, q: int) -> Prediction:
    """The far-field formula at ``(n, t)`` with the regime's constant ``C``."""
    if n < 1 or not t > 0:
        raise ValueError("need n >= 1 and t > 0")
    tp = TreeParams(q)
    C = constant_c(regime, q)
    lz = heat_z(n + 1, t * tp.gamma0).log
    lv = (
        math.log(2.0 / tp.gamma0)
        + math.log1p(C)
        - (1.0 - tp.gamma0) * t
        - math.log(t)
        + math.log1p(n)
        - 0.5 * n * tp.log_q
        + lz
    )
    return Prediction(LogVal.from_log(lv), C, regime)


def near_origin_constant(q: int) -> float:
    tp = TreeParams(q)
    return math.sqrt(2.0 / math.pi) * q * (q + 1) / (q - 1) ** 2 * tp.gamma0**-1.5


def predict_near_origin(n: int, t: float, q: int) -> Prediction:
    """``sqrt(2/pi) q(q+1)/(q-1)^2 gamma0^{-3/2} e^{-(1-gamma0)t} t^{-3/2} phi0(n)``."""
    if n < 0 or not t > 0:
        raise ValueError("need n >= 0 and t > 0")
    tp = TreeParams(q)
    lv = math.log(near_origin_constant(q)) - (1.0 - tp.gamma0) * t - 1.5 * math.log(t) + float(log_phi0(n, q))
    return Prediction(LogVal.from_log(lv), math.nan, diffusive())


def gauss_integral(delta: float, t: float, q: int, nodes: int = 4096) -> float:
    """``int_0^{tau/2} exp(-delta t sin^2(lambda log q / 2)) sin^2(lambda log q) dlambda``.

    Periodic trapezoid in ``theta = lambda log q``: the integrand is even and
    ``2 pi``-periodic, so the rule converges geometrically.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    th = 2.0 * math.pi * np.arange(nodes) / nodes
    vals = np.exp(-delta * t * np.sin(th / 2) ** 2) * np.sin(th) ** 2
    return float(np.mean(vals)) * math.pi / math.log(q)


def gauss_integral_check(delta: float, t: float, q: int) -> float:
    """Ratio of ``gauss_integral`` to its leading term ``(2 sqrt(pi)/log q) (delta t)^{-3/2}``."""
    lead = 2.0 * math.sqrt(math.pi) / math.log(q) * (delta * t) ** -1.5
    nodes = 4096
    # resolve the peak of width ~ (delta t)^{-1/2}
    while nodes < 40 * math.sqrt(delta * t):
        nodes *= 2
    return gauss_integral(delta, t, q, nodes) / lead


def gauss_integral_exact(delta: float, t: float, q: int) -> float:
    """Closed form ``(pi/log q) e^{-b} I_1(b)/b`` with ``b = delta t / 2``."""
    b = 0.5 * delta * t
    if b == 0:
        return math.pi / (2 * math.log(q))
    return math.pi / math.log(q) * math.exp(float(log_heat_z_table(1, b)[1])) / b


def ratio_prediction(offset: int, regime: Regime, q: int) -> float:
    """Predicted ``h_t(d(x,y)) / h_t(|x|)`` with ``offset = |x| - d(x,y)``.

    Ballistic windows give ``ballistic_base**offset``; the l^2 window
    (``n -> inf``, ``n = o(t)``, tagged diffusive) gives ``q^{offset/2}``.
    """
    if regime.kind == "ballistic":
        return ballistic_base(regime, q) ** offset
    if regime.kind == "diffusive":
        return q ** (offset / 2.0)
    raise ValueError("no ratio law beyond the ballistic range")
