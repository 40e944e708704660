"""DV QKD observables and key rates under the shared thermal-reservoir noise model.

Covers BB84 and six-state with binary (on/off) or photon-number-resolving
detectors, realistic source quality, dark counts and detection efficiency, and
the optional bit-flip preprocessing of the raw key.  A photon-level Monte Carlo
oracle mirrors the closed-form observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import (
    BracketedFunction,
    ConvergenceError,
    SolverConfig,
    binary_entropy,
    find_root,
    maximize_scalar,
    six_state_error_entropy,
)
from .photon_stats import POISSON, THERMAL, ChannelModel, NoiseSource, pmf, thin

BB84 = "bb84"
SIX_STATE = "six_state"
_PROTOCOLS = (BB84, SIX_STATE)

BINARY = "binary"
PNR = "pnr"
_DETECTORS = (BINARY, PNR)


@dataclass(frozen=True)
class DvSetup:
    """Parameters of a DV QKD run: protocol, source, detectors and channel.

    source_p is the probability of a non-empty single-photon pulse (multiphoton
    emission excluded), dark_count_d the dark-count probability per detector
    and detection window, efficiency_eta the per-photon detection probability.
    The ideal case p = 1, d = 0, eta = 1 reproduces the perfect-device model.
    """

    protocol: str
    channel: ChannelModel
    preprocessing: bool = False
    source_p: float = 1.0
    detector: str = BINARY
    dark_count_d: float = 0.0
    efficiency_eta: float = 1.0

    def __post_init__(self) -> None:
        if self.protocol not in _PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; use one of {_PROTOCOLS}")
        if self.detector not in _DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}; use one of {_DETECTORS}")
        if not 0.0 <= self.source_p <= 1.0:
            raise ValueError(f"source quality out of [0, 1]: {self.source_p}")
        if not 0.0 <= self.dark_count_d < 1.0:
            raise ValueError(f"dark-count probability out of [0, 1): {self.dark_count_d}")
        if not 0.0 < self.efficiency_eta <= 1.0:
            raise ValueError(f"detection efficiency out of (0, 1]: {self.efficiency_eta}")


@dataclass(frozen=True)
class DvObservables:
    """Accepted-event probability per source pulse and the QBER among accepted events."""

    p_exp: float
    qber: float


def _detected_noise(setup: DvSetup) -> NoiseSource:
    """Noise photons per polarization that both reach the receiver and get detected."""
    ch = setup.channel
    return thin(ch.noise, (1.0 - ch.transmittance) * setup.efficiency_eta)


def _signal_detection_probability(setup: DvSetup) -> float:
    return setup.source_p * setup.channel.transmittance * setup.efficiency_eta


def _to_observables(right_only: float, wrong_only: float) -> DvObservables:
    p_exp = right_only + wrong_only
    qber = wrong_only / p_exp if p_exp > 0.0 else 0.0
    # double-click discarding keeps the error fraction at or below one half
    # (equality only for an empty source)
    assert qber <= 0.5 + 1e-12
    return DvObservables(p_exp=p_exp, qber=qber)


def observables_binary(setup: DvSetup) -> DvObservables:
    """Accepted-event probability and QBER for on/off detectors.

    A detector clicks on any detected photon or a dark count; events where
    exactly one detector clicks are kept, double clicks are discarded.  Only a
    lone wrong-detector click produces a key error.
    """
    if setup.detector != BINARY:
        raise ValueError(f"binary-detector observables requested for {setup.detector!r}")
    s = _signal_detection_probability(setup)
    quiet = pmf(_detected_noise(setup), 0) * (1.0 - setup.dark_count_d)
    right_silent = (1.0 - s) * quiet
    wrong_silent = quiet
    right_only = (1.0 - right_silent) * wrong_silent
    wrong_only = right_silent * (1.0 - wrong_silent)
    return _to_observables(right_only, wrong_only)


def observables_pnr(setup: DvSetup) -> DvObservables:
    """Accepted-event probability and QBER for photon-number-resolving detectors.

    Kept events are exactly those where one detector registers a single count
    (a detected photon or a dark event, which adds one count) and the other
    registers none.
    """
    if setup.detector != PNR:
        raise ValueError(f"PNR observables requested for {setup.detector!r}")
    s1 = _signal_detection_probability(setup)
    noise = _detected_noise(setup)
    n0 = pmf(noise, 0)
    n1 = pmf(noise, 1)
    d = setup.dark_count_d
    right_zero = (1.0 - s1) * n0 * (1.0 - d)
    right_one = (s1 * n0 + (1.0 - s1) * n1) * (1.0 - d) + (1.0 - s1) * n0 * d
    wrong_zero = n0 * (1.0 - d)
    wrong_one = n1 * (1.0 - d) + n0 * d
    return _to_observables(right_one * wrong_zero, right_zero * wrong_one)


def observables(setup: DvSetup) -> DvObservables:
    """Dispatch on the configured detector model."""
    if setup.detector == BINARY:
        return observables_binary(setup)
    return observables_pnr(setup)


def double_click_probability(setup: DvSetup) -> float:
    """Probability of the discarded both-detectors-click events (binary model)."""
    if setup.detector != BINARY:
        raise ValueError("double clicks are a binary-detector notion")
    s = _signal_detection_probability(setup)
    quiet = pmf(_detected_noise(setup), 0) * (1.0 - setup.dark_count_d)
    return (1.0 - (1.0 - s) * quiet) * (1.0 - quiet)


def _plog2(p: float) -> float:
    """p*log2(p) for probability-like values, absorbing tiny negative rounding residue."""
    if p <= 0.0:
        if p < -1e-12:
            raise ValueError(f"probability-like value below the rounding guard: {p}")
        return 0.0
    return p * math.log2(p)


def _sqrt_clamped(value: float) -> float:
    """sqrt(value) with values in [-1e-14, 0) clamped to zero."""
    if value < 0.0:
        if value < -1e-14:
            raise ValueError(f"square-root argument below the rounding guard: {value}")
        return 0.0
    return math.sqrt(value)


def eve_info_bb84(
    q: float,
    x: float,
    config: SolverConfig | None = None,
    lambda_rule: str = "max",
) -> float:
    """Eve's information in bits on BB84 key bits at QBER q with bit-flip rate x.

    The attack parameter lambda in [0, q] is extremized by a grid-seeded
    golden-section MAXIMIZATION: at x = 0 that recovers the no-preprocessing
    bound H(q) at the stationary point lambda = q**2, whereas minimizing
    collapses to zero information.  lambda_rule="min" keeps the minimizing
    reading available for comparison; the key rates never use it.
    """
    if not 0.0 <= q < 0.5:
        raise ValueError(f"QBER out of [0, 0.5): {q}")
    if not 0.0 <= x <= 0.5:
        raise ValueError(f"flip probability out of [0, 0.5]: {x}")
    if lambda_rule not in ("max", "min"):
        raise ValueError(f"lambda_rule must be 'max' or 'min', got {lambda_rule!r}")
    if q == 0.0:
        return 0.0
    xf = 16.0 * x * (1.0 - x)

    def attack_value(lam: float) -> float:
        head = _sqrt_clamped((1.0 - q) ** 2 + xf * (lam - 2.0 * q + 1.0) * (lam - q))
        tail = _sqrt_clamped(q * q + xf * lam * (lam - q))
        return (
            _plog2(0.5 * (1.0 - q + head))
            + _plog2(0.5 * (1.0 - q - head))
            + _plog2(0.5 * (q + tail))
            + _plog2(0.5 * (q - tail))
            - _plog2(1.0 + lam - 2.0 * q)
            - 2.0 * _plog2(q - lam)
            - _plog2(lam)
        )

    if lambda_rule == "max":
        _, value = maximize_scalar(BracketedFunction(attack_value, 0.0, q), config)
        return value
    _, negated = maximize_scalar(
        BracketedFunction(lambda lam: -attack_value(lam), 0.0, q), config
    )
    return -negated


def eve_info_sixstate(q: float, x: float) -> float:
    """Eve's information in bits on six-state key bits at QBER q with bit-flip rate x.

    At x = 0 this reduces to six_state_error_entropy(q) - binary_entropy(q).
    """
    if not 0.0 <= q <= 2.0 / 3.0:
        raise ValueError(f"QBER out of [0, 2/3]: {q}")
    if not 0.0 <= x <= 0.5:
        raise ValueError(f"flip probability out of [0, 0.5]: {x}")
    if q == 0.0:
        return 0.0
    root = _sqrt_clamped((1.0 - q) ** 2 - 4.0 * x * (1.0 - x) * q * (2.0 - 3.0 * q))
    return (
        _plog2(0.5 * (1.0 - q + root))
        + _plog2(0.5 * (1.0 - q - root))
        + _plog2(q * (1.0 - x))
        + _plog2(q * x)
        + six_state_error_entropy(q)
    )


def _mutual_info_preprocessed(q: float, x: float) -> float:
    """Alice-Bob mutual information in bits after flipping each raw bit with rate x."""
    return 1.0 - binary_entropy((1.0 - x) * q + x * (1.0 - q))


def secret_fraction(
    protocol: str,
    q: float,
    preprocessing: bool = False,
    config: SolverConfig | None = None,
) -> float:
    """Secure bits per accepted event at QBER q, floored at zero.

    Without preprocessing this is 1 - 2H(q) for BB84 and 1 - F(q) for
    six-state, where F is the six-state error-pattern entropy.  With
    preprocessing the flip rate x is optimized over [0, 1/2] by a grid-seeded
    golden-section search (the x = 0 point keeps the optimum at least as good
    as no preprocessing).
    """
    if protocol not in _PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if q >= 0.5:
        # the detection model never exceeds QBER 1/2; both protocols are dead there
        return 0.0
    if not preprocessing:
        if protocol == BB84:
            return max(0.0, 1.0 - 2.0 * binary_entropy(q))
        return max(0.0, 1.0 - six_state_error_entropy(q))

    if protocol == BB84:
        def eve(x: float) -> float:
            return eve_info_bb84(q, x, config)
    else:
        def eve(x: float) -> float:
            return eve_info_sixstate(q, x)

    def gain(x: float) -> float:
        return _mutual_info_preprocessed(q, x) - eve(x)

    _, best = maximize_scalar(BracketedFunction(gain, 0.0, 0.5), config)
    # the optimized bracket touches zero exactly at x = 1/2 for every q, so
    # sub-1e-12 positives are rounding noise, not a positive rate
    return best if best > 1e-12 else 0.0


def key_rate_dv(setup: DvSetup, config: SolverConfig | None = None) -> float:
    """Lower bound on the secure key rate, in bits per source pulse."""
    obs = observables(setup)
    if obs.p_exp == 0.0:
        return 0.0
    return obs.p_exp * secret_fraction(setup.protocol, obs.qber, setup.preprocessing, config)


@lru_cache(maxsize=None)
def qber_threshold(
    protocol: str,
    preprocessing: bool = False,
    config: SolverConfig | None = None,
) -> float:
    """Largest QBER with a positive secret fraction for the given protocol.

    Without preprocessing this is the root of 1 - 2H(q) or 1 - F(q).  With
    preprocessing the x-optimized secret fraction touches zero from above at
    x = 1/2 for every q, so the threshold is located by bisecting on strict
    positivity of the optimized fraction (accurate to about 1e-6 in q).
    """
    cfg = config or SolverConfig()
    if protocol not in _PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if not preprocessing:
        if protocol == BB84:
            bracket = BracketedFunction(lambda q: 1.0 - 2.0 * binary_entropy(q), 1e-6, 0.5 - 1e-9)
        else:
            bracket = BracketedFunction(lambda q: 1.0 - six_state_error_entropy(q), 1e-6, 0.5)
        return find_root(bracket, cfg)
    lo = qber_threshold(protocol, False, config)
    hi = 0.4999
    def positive(q: float) -> bool:
        return secret_fraction(protocol, q, True, config) > 1e-12
    if not positive(lo):
        raise ConvergenceError(
            f"preprocessed fraction not positive at the plain threshold {lo}"
        )
    for _ in range(cfg.max_iter):
        if hi - lo <= 1e-9:
            break
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def asymptotic_mu_max_dv(transmittance: float, qber_threshold_value: float) -> float:
    """Small-T linear law for the maximum tolerable noise: T*Q_th/(1 - 2*Q_th)."""
    if not 0.0 <= qber_threshold_value < 0.5:
        raise ValueError(f"QBER threshold out of [0, 0.5): {qber_threshold_value}")
    return transmittance * qber_threshold_value / (1.0 - 2.0 * qber_threshold_value)


@dataclass(frozen=True)
class SimulationResult:
    """Monte Carlo estimates of the DV observables with binomial standard errors."""

    p_exp: float
    p_exp_se: float
    qber: float
    qber_se: float
    trials: int
    accepted: int
    errors: int


_BLOCK_TRIALS = 1 << 15


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # counter-based substreams: each fixed-size block owns a disjoint Philox
    # counter range, so results cannot depend on how blocks are scheduled
    return np.random.Generator(np.random.Philox(key=seed, counter=block << 128))


def _simulate_block(setup: DvSetup, n: int, seed: int, block: int) -> tuple[int, int]:
    rng = _block_rng(seed, block)
    ch = setup.channel
    t = ch.transmittance
    mu = ch.noise.mu
    if mu == 0.0:
        noise_right = np.zeros(n, dtype=np.int64)
        noise_wrong = np.zeros(n, dtype=np.int64)
    elif ch.noise.family == THERMAL:
        # thermal counts are geometric on {0, 1, ...} with success prob 1/(1+mu)
        p0 = 1.0 / (1.0 + mu)
        noise_right = rng.geometric(p0, size=n) - 1
        noise_wrong = rng.geometric(p0, size=n) - 1
    else:
        noise_right = rng.poisson(mu, size=n)
        noise_wrong = rng.poisson(mu, size=n)
    arrived_right = rng.binomial(noise_right, 1.0 - t)
    arrived_wrong = rng.binomial(noise_wrong, 1.0 - t)
    signal = (rng.random(n) < setup.source_p) & (rng.random(n) < t)
    detected_right = rng.binomial(arrived_right + signal, setup.efficiency_eta)
    detected_wrong = rng.binomial(arrived_wrong, setup.efficiency_eta)
    dark_right = rng.random(n) < setup.dark_count_d
    dark_wrong = rng.random(n) < setup.dark_count_d
    if setup.detector == BINARY:
        click_right = (detected_right > 0) | dark_right
        click_wrong = (detected_wrong > 0) | dark_wrong
        accept = click_right != click_wrong
        error = accept & click_wrong
    else:
        count_right = detected_right + dark_right
        count_wrong = detected_wrong + dark_wrong
        accept = (count_right + count_wrong) == 1
        error = accept & (count_wrong == 1)
    return int(accept.sum()), int(error.sum())


def simulate_dv(setup: DvSetup, trials: int, seed: int) -> SimulationResult:
    """Photon-level Monte Carlo of the detection model; deterministic for a fixed seed.

    Per trial: sample noise photon numbers in both polarizations, thin them
    through the beamsplitter, transmit the signal with probability source_p*T,
    detect every arriving photon with probability eta, add dark counts and
    apply the accept/discard rule of the configured detector.  Trials are
    processed in fixed-size blocks drawing from counter-based substreams, so a
    sharded evaluation reproduces the sequential stream exactly.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    accepted = 0
    errors = 0
    block = 0
    remaining = trials
    while remaining > 0:
        n = min(_BLOCK_TRIALS, remaining)
        block_accepted, block_errors = _simulate_block(setup, n, seed, block)
        accepted += block_accepted
        errors += block_errors
        remaining -= n
        block += 1
    p_exp = accepted / trials
    p_exp_se = math.sqrt(p_exp * (1.0 - p_exp) / trials)
    qber = errors / accepted if accepted else 0.0
    qber_se = math.sqrt(qber * (1.0 - qber) / accepted) if accepted else 0.0
    return SimulationResult(p_exp, p_exp_se, qber, qber_se, trials, accepted, errors)
