"""Photon-number statistics of the channel-noise sources.

The channel couples the signal to two independent noise sources (one per
polarization mode) through a beamsplitter of transmittance T, so the noise
photons reaching the receiver follow the source distribution thinned with keep
probability 1 - T.  Both supported families are closed under thinning, which
keeps every quantity here in closed form; the defining series is exercised by
the test suite as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

THERMAL = "thermal"
POISSON = "poisson"
_FAMILIES = (THERMAL, POISSON)


@dataclass(frozen=True)
class NoiseSource:
    """A photon-number distribution family with mean photon number mu per pulse."""

    family: str
    mu: float

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; use one of {_FAMILIES}")
        if not self.mu >= 0.0:
            raise ValueError(f"mean photon number must be >= 0: {self.mu}")


def pmf(src: NoiseSource, n: int) -> float:
    """Probability that the source emits exactly n photons in one pulse.

    Computed in log space so large photon numbers cannot overflow; mu = 0 is an
    exact point mass at zero.
    """
    if n < 0:
        raise ValueError(f"photon count must be >= 0: {n}")
    mu = src.mu
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    if src.family == THERMAL:
        # mu^n / (mu + 1)^(n + 1)
        return math.exp(n * math.log(mu) - (n + 1) * math.log1p(mu))
    # exp(-mu) mu^n / n!
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def thin(src: NoiseSource, keep: float) -> NoiseSource:
    """Distribution of the photons surviving independent Bernoulli(keep) selection.

    Both families are closed under thinning: only the mean is rescaled.
    """
    if not 0.0 <= keep <= 1.0:
        raise ValueError(f"keep probability out of [0, 1]: {keep}")
    return NoiseSource(src.family, keep * src.mu)


def truncation_cutoff(src: NoiseSource, tail: float = 1e-15) -> int:
    """Smallest N with P(n > N) < tail, from the family's analytic tail bound.

    Thermal tails are geometric, (mu/(mu+1))^(N+1); Poisson tails use the
    Chernoff bound exp(-mu) (e mu / N)^N, valid for N > mu.
    """
    if not 0.0 < tail < 1.0:
        raise ValueError(f"tail target out of (0, 1): {tail}")
    mu = src.mu
    if mu == 0.0:
        return 0
    if src.family == THERMAL:
        n = math.log(tail) / (math.log(mu) - math.log1p(mu))
        return max(0, math.ceil(n - 1.0))
    log_tail = math.log(tail)
    n = math.ceil(mu) + 1
    while n * (math.log(mu) + 1.0 - math.log(n)) - mu >= log_tail:
        n += 1
    return n


@dataclass(frozen=True)
class ChannelModel:
    """Lossy channel of transmittance T with a thermal reservoir in each polarization."""

    transmittance: float
    noise: NoiseSource

    def __post_init__(self) -> None:
        if not 0.0 < self.transmittance <= 1.0:
            raise ValueError(f"transmittance out of (0, 1]: {self.transmittance}")

    @property
    def noise_variance(self) -> float:
        """Quadrature variance W = 2*mu + 1 of the noise state, in shot-noise units."""
        return 2.0 * self.noise.mu + 1.0


def reflected_noise(ch: ChannelModel) -> NoiseSource:
    """Distribution of the noise photons coupled into the channel output (keep 1 - T)."""
    return thin(ch.noise, 1.0 - ch.transmittance)


def arrived_noise_pmf(ch: ChannelModel, k: int) -> float:
    """Probability that k noise photons reach the receiver in one polarization mode."""
    return pmf(reflected_noise(ch), k)


@dataclass(frozen=True)
class ArrivalProbabilities:
    """Joint probabilities of signal arrival and per-detector noise photon counts.

    p_plus(k, l) is the probability that the signal photon arrives at the right
    detector together with k noise photons while l noise photons hit the wrong
    detector; p_minus(k, l) is the same event with the signal lost in the
    channel.  Both factorize over the two independent polarization modes.
    """

    channel: ChannelModel

    def p_plus(self, k: int, l: int) -> float:
        ch = self.channel
        # grouping the noise factors first keeps the (k, l) symmetry bit-exact
        return ch.transmittance * (arrived_noise_pmf(ch, k) * arrived_noise_pmf(ch, l))

    def p_minus(self, k: int, l: int) -> float:
        ch = self.channel
        return (1.0 - ch.transmittance) * (arrived_noise_pmf(ch, k) * arrived_noise_pmf(ch, l))

    @property
    def quiet_mode_probability(self) -> float:
        """Probability that one polarization mode delivers no noise photon."""
        return arrived_noise_pmf(self.channel, 0)

    def signal_with_quiet_wrong(self) -> float:
        """Sum over k of p_plus(k, 0): signal arrives, wrong detector stays dark."""
        return self.channel.transmittance * self.quiet_mode_probability

    def lost_with_right_noise(self) -> float:
        """Sum over k >= 1 of p_minus(k, 0): lost signal masked by right-mode noise."""
        t = self.channel.transmittance
        p0 = self.quiet_mode_probability
        return (1.0 - t) * (1.0 - p0) * p0

    def lost_with_wrong_noise(self) -> float:
        """Sum over l >= 1 of p_minus(0, l): the error events of the binary model."""
        t = self.channel.transmittance
        p0 = self.quiet_mode_probability
        return (1.0 - t) * p0 * (1.0 - p0)


def arrival_probabilities(ch: ChannelModel) -> ArrivalProbabilities:
    """Accessor for the joint arrival probabilities of the given channel."""
    return ArrivalProbabilities(ch)
