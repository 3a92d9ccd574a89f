"""Scalar foundations: model parameters, Gaussian tails, gains, thresholds.

The model: Ns sensors each observe z_n = +-m + v_n with v_n ~ N(0, sigma_v2),
scale their observation by a common gain g, and transmit simultaneously over
N chips.  The fusion center receives the superposition in noise of per-chip
variance sigma_w2.  The total radiated power is capped at P, shared equally,
which pins the gain at g = sqrt(P / (Ns (m^2 + sigma_v2))).

Everything in this module is a pure function of its arguments.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

from scipy.special import ndtri

from .errors import DomainError, InvalidParam

_SQRT2 = math.sqrt(2.0)

BAYES = "bayes"
NEYMAN_PEARSON = "np"
FIXED = "fixed"

CRITERIA = (BAYES, NEYMAN_PEARSON, FIXED)


def _is_int(x: object) -> bool:
    return isinstance(x, numbers.Integral) and not isinstance(x, bool)


def _is_real(x: object) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool) and math.isfinite(float(x))


@dataclass(frozen=True)
class SystemParams:
    """Scalar parameters of the sensor network and its channel.

    N is the spreading length (chips per symbol), Ns the number of sensors,
    P the total power budget, m the signal amplitude under either hypothesis,
    sigma_v2 the per-sensor observation noise variance, sigma_w2 the per-chip
    receiver noise variance, and (p0, p1) the hypothesis priors.
    """

    N: int
    Ns: int
    P: float
    m: float
    sigma_v2: float
    sigma_w2: float
    p0: float = 0.5
    p1: float = 0.5

    def __post_init__(self):
        validate(self)

    @property
    def alpha(self) -> float:
        """Load ratio: sensors per chip."""
        return self.Ns / self.N


def validate(params: SystemParams) -> SystemParams:
    """Check every SystemParams constraint and return params unchanged.

    Raises InvalidParam naming the first violated constraint, checked in
    declaration order.
    """
    p = params
    if not _is_int(p.N) or p.N < 1:
        raise InvalidParam("N", p.N, "spreading length must be an integer >= 1")
    if not _is_int(p.Ns) or p.Ns < 1:
        raise InvalidParam("Ns", p.Ns, "sensor count must be an integer >= 1")
    if not _is_real(p.P) or p.P <= 0:
        raise InvalidParam("P", p.P, "total power must be finite and > 0")
    if not _is_real(p.m) or p.m <= 0:
        raise InvalidParam("m", p.m, "signal amplitude must be finite and > 0")
    if not _is_real(p.sigma_v2) or p.sigma_v2 < 0:
        raise InvalidParam("sigma_v2", p.sigma_v2, "observation noise variance must be finite and >= 0")
    if not _is_real(p.sigma_w2) or p.sigma_w2 <= 0:
        raise InvalidParam("sigma_w2", p.sigma_w2, "receiver noise variance must be finite and > 0")
    if not _is_real(p.p0) or not 0.0 < p.p0 < 1.0:
        raise InvalidParam("p0", p.p0, "prior must lie strictly inside (0, 1)")
    if not _is_real(p.p1) or not 0.0 < p.p1 < 1.0:
        raise InvalidParam("p1", p.p1, "prior must lie strictly inside (0, 1)")
    if abs(p.p0 + p.p1 - 1.0) > 1e-12:
        raise InvalidParam("p1", p.p1, f"priors must sum to 1, got p0 + p1 = {p.p0 + p.p1!r}")
    return params


def sensors_for_load(alpha: float, N: int) -> int:
    """Sensor count at load alpha and spreading length N.

    Rounds alpha * N half away from zero; the result must be >= 1.
    """
    if not _is_int(N) or N < 1:
        raise InvalidParam("N", N, "spreading length must be an integer >= 1")
    if not _is_real(alpha) or alpha <= 0:
        raise InvalidParam("alpha", alpha, "load ratio must be finite and > 0")
    Ns = int(math.floor(alpha * N + 0.5))
    if Ns < 1:
        raise InvalidParam("alpha", alpha, f"load {alpha} at N={N} rounds to zero sensors")
    return Ns


def q_function(x: float) -> float:
    """Upper tail P(Z >= x) of a standard normal variable.

    Computed through the complementary error function; absolute error is at
    the level of double-precision rounding.  Non-increasing in x, with
    q_function(0) == 0.5 exactly.
    """
    return 0.5 * math.erfc(x / _SQRT2)


def inv_q(p: float) -> float:
    """The x with q_function(x) == p, for p strictly inside (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"inv_q requires p in (0, 1), got {p!r}")
    return float(-ndtri(p))


def amplifier_gain(params: SystemParams) -> float:
    """Per-sensor relay gain that spends the power budget exactly.

    Each sensor transmits g * z_n with E z_n^2 = m^2 + sigma_v2, so the
    network radiates Ns g^2 (m^2 + sigma_v2) = P in total.
    """
    return math.sqrt(params.P / (params.Ns * (params.m**2 + params.sigma_v2)))


def bayes_threshold(p0: float, p1: float) -> float:
    """Threshold on the fusion statistic minimizing p0 Pf + p1 Pm.

    The statistic is Gaussian with conditional means -+ 2 g^2 m^2 qf and
    common variance 4 g^2 m^2 qf, so the minimizer is log(p0 / p1),
    independent of the channel realization.
    """
    for name, val in (("p0", p0), ("p1", p1)):
        if not (_is_real(val) and 0.0 < val < 1.0):
            raise DomainError(f"bayes_threshold requires {name} in (0, 1), got {val!r}")
    if abs(p0 + p1 - 1.0) > 1e-12:
        raise DomainError(f"priors must sum to 1, got p0 + p1 = {p0 + p1!r}")
    return math.log(p0 / p1)


def np_threshold(qf: float, g: float, m: float, alpha_fa: float) -> float:
    """Threshold pinning the false-alarm probability at alpha_fa.

    qf is the detector quadratic form of the channel in use; the statistic
    under the null is N(-2 g^2 m^2 qf, 4 g^2 m^2 qf), so the threshold is
    2 g m sqrt(qf) inv_q(alpha_fa) - 2 g^2 m^2 qf.
    """
    if not (_is_real(qf) and qf > 0):
        raise DomainError(f"np_threshold requires qf > 0, got {qf!r}")
    if not (_is_real(g) and g > 0):
        raise DomainError(f"np_threshold requires g > 0, got {g!r}")
    if not (_is_real(m) and m > 0):
        raise DomainError(f"np_threshold requires m > 0, got {m!r}")
    if not (_is_real(alpha_fa) and 0.0 < alpha_fa < 1.0):
        raise DomainError(f"np_threshold requires alpha_fa in (0, 1), got {alpha_fa!r}")
    return 2.0 * g * m * math.sqrt(qf) * inv_q(alpha_fa) - 2.0 * g * g * m * m * qf


@dataclass(frozen=True)
class DetectorSpec:
    """How the fusion threshold is chosen.

    criterion "bayes" minimizes the prior-weighted error probability,
    "np" pins the false-alarm probability at alpha_fa, and "fixed" uses
    the supplied tau_prime verbatim.
    """

    criterion: str = BAYES
    alpha_fa: float | None = None
    tau_prime: float | None = None

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise InvalidParam("criterion", self.criterion, f"one of {CRITERIA}")
        if self.criterion == NEYMAN_PEARSON:
            if self.alpha_fa is None or not (_is_real(self.alpha_fa) and 0.0 < self.alpha_fa < 1.0):
                raise InvalidParam("alpha_fa", self.alpha_fa, "criterion 'np' needs alpha_fa in (0, 1)")
        if self.criterion == FIXED:
            if self.tau_prime is None or not _is_real(self.tau_prime):
                raise InvalidParam("tau_prime", self.tau_prime, "criterion 'fixed' needs a finite tau_prime")


def threshold_for(spec: DetectorSpec, params: SystemParams, qf: float) -> float:
    """Resolve the effective threshold for a channel with quadratic form qf."""
    if spec.criterion == BAYES:
        return bayes_threshold(params.p0, params.p1)
    if spec.criterion == NEYMAN_PEARSON:
        return np_threshold(qf, amplifier_gain(params), params.m, spec.alpha_fa)
    return float(spec.tau_prime)
