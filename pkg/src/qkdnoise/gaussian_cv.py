"""Gaussian two-mode machinery and CV QKD key rates.

Covariance matrices in shot-noise units (vacuum variance 1), symplectic
spectra, x-quadrature homodyne conditioning with trusted receiver noise, the
Holevo bound for a purifying eavesdropper, and reverse-reconciliation key
rates for the squeezed-state, coherent-state (GG02) and generalized
(independently squeezed and modulated) preparations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import (
    BracketedFunction,
    SolverConfig,
    bosonic_entropy,
    lambert_w_minus1,
    maximize_scalar,
)
from .photon_stats import ChannelModel


class UnphysicalStateError(ValueError):
    """A covariance matrix violates the symplectic uncertainty bound."""


class DegenerateMeasurementError(ValueError):
    """Homodyne conditioning on a quadrature with non-positive variance."""


SQUEEZED = "squeezed"
GG02 = "gg02"
GENERALIZED = "generalized"
_VARIANTS = (SQUEEZED, GG02, GENERALIZED)

_PHYSICALITY_SLACK = 1e-9

_SIGMA_Z = np.diag([1.0, -1.0])
_I2 = np.eye(2)


@dataclass(frozen=True, eq=False)
class TwoModeCM:
    """Two-mode covariance matrix in 2x2 block form, quadrature order (x, p).

    Block a describes the sender mode, b the receiver mode, c their
    correlations.  Construction validates block symmetry and physicality
    (both symplectic eigenvalues at least 1 up to a small numerical slack).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a", "b", "c"):
            block = np.asarray(getattr(self, name), dtype=float)
            if block.shape != (2, 2):
                raise ValueError(f"block {name} must be 2x2, got shape {block.shape}")
            object.__setattr__(self, name, block)
        for name in ("a", "b"):
            block = getattr(self, name)
            if abs(block[0, 1] - block[1, 0]) > 1e-12 * max(1.0, abs(block[0, 1])):
                raise ValueError(f"block {name} must be symmetric")
        eigs = symplectic_eigenvalues(self)
        if min(eigs) < 1.0 - _PHYSICALITY_SLACK:
            raise UnphysicalStateError(f"symplectic eigenvalues {eigs} dip below 1")

    @property
    def full(self) -> np.ndarray:
        """The assembled 4x4 matrix [[a, c], [c^T, b]]."""
        return np.block([[self.a, self.c], [self.c.T, self.b]])


def symplectic_eigenvalues(cm: TwoModeCM) -> tuple[float, float]:
    """Symplectic spectrum (lam1 >= lam2 >= 1) of a two-mode covariance matrix.

    Two-mode invariant formula: lam^2 = (D +- sqrt(D^2 - 4 det G))/2 with
    D = det a + det b + 2 det c.  The smaller eigenvalue is recovered from the
    determinant product det G = (lam1*lam2)^2 instead of the difference of
    near-equal terms, which keeps it accurate for strongly modulated states.
    """
    det_a = float(np.linalg.det(cm.a))
    det_b = float(np.linalg.det(cm.b))
    det_c = float(np.linalg.det(cm.c))
    det_full = float(np.linalg.det(cm.full))
    delta = det_a + det_b + 2.0 * det_c
    disc = delta * delta - 4.0 * det_full
    if disc < 0.0:
        if disc < -1e-12 * max(1.0, delta * delta):
            raise UnphysicalStateError(f"negative symplectic discriminant: {disc}")
        disc = 0.0
    lam1_sq = 0.5 * (delta + math.sqrt(disc))
    if lam1_sq <= 0.0:
        raise UnphysicalStateError(f"non-positive squared symplectic eigenvalue: {lam1_sq}")
    lam2_sq = max(det_full, 0.0) / lam1_sq
    return math.sqrt(lam1_sq), math.sqrt(lam2_sq)


def condition_on_homodyne(
    cm: TwoModeCM, trusted_noise: float = 0.0
) -> tuple[np.ndarray, float]:
    """Sender covariance conditioned on an x-quadrature homodyne of the receiver.

    The measured quadrature carries extra trusted noise of the given variance;
    the Moore-Penrose inverse of diag(b_xx + v_t, 0) is diag(1/(b_xx + v_t), 0).
    Returns the conditional 2x2 matrix and its symplectic eigenvalue sqrt(det).
    """
    if trusted_noise < 0.0:
        raise ValueError(f"trusted noise variance must be >= 0: {trusted_noise}")
    measured = cm.b[0, 0] + trusted_noise
    if measured <= 0.0:
        raise DegenerateMeasurementError(f"measured-quadrature variance {measured} <= 0")
    pseudo_inverse = np.diag([1.0 / measured, 0.0])
    conditional = cm.a - cm.c @ pseudo_inverse @ cm.c.T
    det = float(np.linalg.det(conditional))
    if det < 0.0:
        scale = max(1.0, abs(conditional[0, 0] * conditional[1, 1]))
        if det < -1e-12 * scale:
            raise UnphysicalStateError(f"conditional matrix has negative determinant: {det}")
        det = 0.0
    return conditional, math.sqrt(det)


def _thermal_bits(symplectic_eigenvalue: float) -> float:
    # entropy of the thermal state with mean photon number (lam - 1)/2;
    # tiny negative arguments are rounding residue on pure states
    return bosonic_entropy(max(0.0, 0.5 * (symplectic_eigenvalue - 1.0)))


def _holevo_raw(cm: TwoModeCM, trusted_noise: float) -> float:
    lam1, lam2 = symplectic_eigenvalues(cm)
    _, lam3 = condition_on_homodyne(cm, trusted_noise)
    return _thermal_bits(lam1) + _thermal_bits(lam2) - _thermal_bits(lam3)


def holevo_bound(cm: TwoModeCM, trusted_noise: float = 0.0) -> float:
    """Upper bound in bits on the eavesdropper information from a collective attack.

    The eavesdropper purifies the channel output but not the receiver's
    trusted detection noise, which only enters the conditioning step.  That
    conditioning treatment is exact at zero trusted noise and loses validity
    once it would drive the bound negative, which raises an error.
    """
    value = _holevo_raw(cm, trusted_noise)
    if value < -1e-12:
        raise ValueError(
            f"trusted noise {trusted_noise} is outside the validity region of the "
            f"conditioning treatment (Holevo term {value} < 0)"
        )
    return max(0.0, value)


@dataclass(frozen=True)
class CvSetup:
    """Parameters of a CV QKD run: preparation variant, variances and channel.

    v_s is the conditional (signal) quadrature variance the receiver would see
    without the channel, v_m the Gaussian modulation variance, v_t the trusted
    detection-noise variance added inside the receiver station.  The squeezed
    variant ties v_s to the total variance (v_s = 1/(v_s + v_m), the pure
    two-mode squeezed vacuum case); gg02 fixes v_s = 1 (coherent states); the
    generalized variant accepts independent squeezing and modulation.
    """

    variant: str
    v_s: float
    v_m: float
    channel: ChannelModel
    v_t: float = 0.0
    optimize_v_t: bool = False

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; use one of {_VARIANTS}")
        if not self.v_s > 0.0:
            raise ValueError(f"signal variance must be positive: {self.v_s}")
        if self.v_m < 0.0:
            raise ValueError(f"modulation variance must be >= 0: {self.v_m}")
        if self.v_t < 0.0:
            raise ValueError(f"trusted noise variance must be >= 0: {self.v_t}")
        if self.total_variance < 1.0 - 1e-12:
            raise UnphysicalStateError(
                f"total preparation variance {self.total_variance} below vacuum"
            )
        if self.variant == SQUEEZED and abs(self.v_s * self.total_variance - 1.0) > 1e-6:
            raise ValueError(
                "the squeezed variant requires v_s*(v_s + v_m) = 1; build it via "
                "CvSetup.squeezed(total_variance, ...) or use the generalized variant"
            )
        if self.variant == GG02 and abs(self.v_s - 1.0) > 1e-12:
            raise ValueError("gg02 uses coherent signal states, so v_s must be 1")

    @property
    def total_variance(self) -> float:
        """Total modulated variance V = v_s + v_m seen on the sender side."""
        return self.v_s + self.v_m

    @classmethod
    def squeezed(cls, total_variance: float, channel: ChannelModel, **kwargs) -> "CvSetup":
        """Squeezed-state protocol from its total modulated variance V (v_s = 1/V)."""
        if total_variance < 1.0:
            raise ValueError(f"total variance must be >= 1: {total_variance}")
        v_s = 1.0 / total_variance
        return cls(SQUEEZED, v_s, total_variance - v_s, channel, **kwargs)

    @classmethod
    def gg02_protocol(cls, modulation: float, channel: ChannelModel, **kwargs) -> "CvSetup":
        """Coherent-state protocol with Gaussian modulation variance v_m."""
        return cls(GG02, 1.0, modulation, channel, **kwargs)


def build_cm(setup: CvSetup) -> TwoModeCM:
    """Entanglement-based covariance matrix of the shared state after the channel.

    Squeezed and gg02 variants are the symmetric two-mode squeezed vacuum of
    total variance V sent through the channel.  The generalized variant applies
    single-mode squeezing to the transmitted arm of a two-mode squeezed vacuum
    so that the receiver's x-marginal is V and its x-variance conditioned on
    the sender is v_s; the p-quadrature is the mirror case.
    """
    ch = setup.channel
    t = ch.transmittance
    w = ch.noise_variance
    v = setup.total_variance
    if setup.variant in (SQUEEZED, GG02):
        a = v * _I2
        b = (v * t + (1.0 - t) * w) * _I2
        c = math.sqrt(t) * math.sqrt(max(v * v - 1.0, 0.0)) * _SIGMA_Z
        return TwoModeCM(a, b, c)
    v0 = math.sqrt(v / setup.v_s)
    x_scale = math.sqrt(v * setup.v_s)  # x-variance gain of the arm squeezer
    amplitude = math.sqrt(x_scale)
    correlation = math.sqrt(max(v0 * v0 - 1.0, 0.0))
    a = v0 * _I2
    b = t * np.diag([x_scale * v0, v0 / x_scale]) + (1.0 - t) * w * _I2
    c = math.sqrt(t) * correlation * np.diag([amplitude, -1.0 / amplitude])
    return TwoModeCM(a, b, c)


def mutual_info_cv(setup: CvSetup) -> float:
    """Mutual information in bits of the homodyne data per channel use.

    Referred to the channel output, the receiver measures variance
    T*V + (1-T)*W + v_t against the conditional T*v_s + (1-T)*W + v_t.
    """
    ch = setup.channel
    t = ch.transmittance
    offset = ch.noise_variance * (1.0 - t) / t + setup.v_t / t
    return 0.5 * math.log2((setup.total_variance + offset) / (setup.v_s + offset))


@dataclass(frozen=True)
class CvRateBreakdown:
    """Key-rate decomposition: mutual information, Holevo bound and the spectrum."""

    i_ab: float
    chi_be: float
    key_rate: float
    lam1: float
    lam2: float
    lam3: float
    v_t: float = 0.0


def _rate_at(setup: CvSetup, v_t: float, cm: TwoModeCM) -> CvRateBreakdown | None:
    """Breakdown at a fixed trusted noise, or None outside the validity region."""
    effective = replace(setup, v_t=v_t, optimize_v_t=False)
    i_ab = mutual_info_cv(effective)
    lam1, lam2 = symplectic_eigenvalues(cm)
    _, lam3 = condition_on_homodyne(cm, v_t)
    chi_be = _thermal_bits(lam1) + _thermal_bits(lam2) - _thermal_bits(lam3)
    if chi_be < -1e-12:
        return None
    chi_be = max(0.0, chi_be)
    return CvRateBreakdown(i_ab, chi_be, max(0.0, i_ab - chi_be), lam1, lam2, lam3, v_t)


_TRUSTED_NOISE_GRID = (0.0,) + tuple(float(v) for v in np.logspace(-6.0, 6.0, 49))


def key_rate_cv(setup: CvSetup, config: SolverConfig | None = None) -> CvRateBreakdown:
    """Lower bound on the secure key rate in reverse reconciliation.

    K = max[0, I_AB - chi_BE].  With optimize_v_t the trusted detection noise
    is tuned over a log-spaced grid that always includes zero, then refined by
    golden-section search around the best grid cell.
    """
    cm = build_cm(setup)
    if not setup.optimize_v_t:
        result = _rate_at(setup, setup.v_t, cm)
        if result is None:
            raise ValueError(
                f"trusted noise {setup.v_t} is outside the validity region of the "
                f"conditioning treatment (Holevo term turned negative)"
            )
        return result
    best = _rate_at(setup, 0.0, cm)
    assert best is not None  # chi is non-negative at zero trusted noise
    best_index = 0
    for index, v_t in enumerate(_TRUSTED_NOISE_GRID[1:], start=1):
        candidate = _rate_at(setup, v_t, cm)
        if candidate is not None and candidate.key_rate > best.key_rate:
            best, best_index = candidate, index
    if best_index > 0:
        lo = _TRUSTED_NOISE_GRID[max(best_index - 1, 1)]
        hi = _TRUSTED_NOISE_GRID[min(best_index + 1, len(_TRUSTED_NOISE_GRID) - 1)]
        if hi > lo:
            def refined_rate(u: float) -> float:
                candidate = _rate_at(setup, 10.0**u, cm)
                return candidate.key_rate if candidate is not None else -math.inf

            u_best, _ = maximize_scalar(
                BracketedFunction(refined_rate, math.log10(lo), math.log10(hi)),
                config,
                grid_points=16,
            )
            refined = _rate_at(setup, 10.0**u_best, cm)
            if refined is not None and refined.key_rate > best.key_rate:
                best = refined
    return best


def asymptotic_mu_max_cv(transmittance: float) -> float:
    """Small-T closed form for the squeezed protocol's maximum tolerable noise.

    exp(1 + W_-1(-T/e)): the root of the infinite-squeezing, strong-modulation
    expansion of the key rate around T = 0.
    """
    if not 0.0 < transmittance <= 1.0:
        raise ValueError(f"transmittance out of (0, 1]: {transmittance}")
    return math.exp(1.0 + lambert_w_minus1(-transmittance / math.e))
