"""Threshold and requirement solvers over the protocol rate functions.

Every operation here sweeps or bisects the key rates of `dv_security` and
`gaussian_cv`.  Grid results carry a per-point status so partial curves stay
usable where a protocol has no positive rate, matching the truncated CV lines
of the reference figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .dv_security import (
    BINARY,
    SIX_STATE,
    DvSetup,
    key_rate_dv,
    observables,
    qber_threshold,
)
from .gaussian_cv import GENERALIZED, CvSetup, key_rate_cv
from .numerics import ConvergenceError, SolverConfig
from .photon_stats import THERMAL, ChannelModel, NoiseSource

STATUS_OK = "ok"
STATUS_NO_RATE = "no-positive-rate"
STATUS_FAILURE = "solver-failure"
STATUS_CV_SECURE = "cv-secure"

#: hard cap for the noise-threshold bracket growth, in mean photons per pulse
MU_BRACKET_CAP = 1e3
#: total variance standing in for unbounded squeezing and modulation
INFINITE_SQUEEZING_V = 1e6
#: strong-modulation default for requirement computations, in shot-noise units
DEFAULT_MODULATION = 1e3

Setup = Union[DvSetup, CvSetup]

_AXES = ("T", "mu", "d_over_eta")


def log_grid(start: float, stop: float, points: int) -> tuple[float, ...]:
    """Strictly increasing log-spaced grid from start to stop, inclusive."""
    if not (start > 0.0 and stop > start and points >= 2):
        raise ValueError(f"invalid grid spec: start={start}, stop={stop}, points={points}")
    return tuple(float(v) for v in np.logspace(math.log10(start), math.log10(stop), points))


@dataclass(frozen=True)
class CurveRequest:
    """A sweep specification: protocol template, axis to sweep and its grid."""

    template: Setup
    axis: str
    grid: tuple[float, ...]
    config: SolverConfig | None = None

    def __post_init__(self) -> None:
        if self.axis not in _AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; use one of {_AXES}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("empty sweep grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.axis == "T" and not (grid[0] > 0.0 and grid[-1] <= 1.0):
            raise ValueError(f"transmittance grid must lie in (0, 1]: {grid[0]}..{grid[-1]}")
        if self.axis == "mu" and grid[0] < 0.0:
            raise ValueError(f"noise grid must be non-negative: starts at {grid[0]}")
        if self.axis == "d_over_eta" and grid[0] <= 0.0:
            raise ValueError(f"d/eta grid must be positive: starts at {grid[0]}")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class CurveResult:
    """Tabular sweep output: named columns with one row per grid point, status last."""

    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def column(self, name: str) -> list:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


@dataclass(frozen=True)
class ThresholdResult:
    """A single solved threshold with its status flag."""

    value: float
    status: str

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _placeholder_channel(noise_family: str = THERMAL) -> ChannelModel:
    return ChannelModel(0.5, NoiseSource(noise_family, 0.0))


def dv_template(
    protocol: str,
    *,
    noise_family: str = THERMAL,
    preprocessing: bool = False,
    detector: str = BINARY,
    source_p: float = 1.0,
    dark_count_d: float = 0.0,
    efficiency_eta: float = 1.0,
) -> DvSetup:
    """DV setup template; the channel values are placeholders replaced per sweep point."""
    return DvSetup(
        protocol,
        _placeholder_channel(noise_family),
        preprocessing,
        source_p,
        detector,
        dark_count_d,
        efficiency_eta,
    )


def infinite_squeezing_template(
    noise_family: str = THERMAL, optimize_v_t: bool = False
) -> CvSetup:
    """Squeezed-state protocol with the V -> 1e6 proxy for unbounded squeezing."""
    return CvSetup.squeezed(
        INFINITE_SQUEEZING_V, _placeholder_channel(noise_family), optimize_v_t=optimize_v_t
    )


def gg02_template(
    modulation: float = DEFAULT_MODULATION,
    noise_family: str = THERMAL,
    optimize_v_t: bool = False,
) -> CvSetup:
    """Coherent-state protocol template with strong Gaussian modulation."""
    return CvSetup.gg02_protocol(
        modulation, _placeholder_channel(noise_family), optimize_v_t=optimize_v_t
    )


def generalized_template(
    v_s: float = 1.0,
    modulation: float = DEFAULT_MODULATION,
    noise_family: str = THERMAL,
    optimize_v_t: bool = False,
) -> CvSetup:
    """Independently squeezed and modulated preparation template."""
    return CvSetup(
        GENERALIZED,
        v_s,
        modulation,
        _placeholder_channel(noise_family),
        optimize_v_t=optimize_v_t,
    )


def with_channel(
    setup: Setup, transmittance: float | None = None, mu: float | None = None
) -> Setup:
    """Copy a setup with its channel transmittance and/or noise strength replaced."""
    ch = setup.channel
    t = ch.transmittance if transmittance is None else transmittance
    m = ch.noise.mu if mu is None else mu
    return replace(setup, channel=ChannelModel(t, NoiseSource(ch.noise.family, m)))


def key_rate(setup: Setup, config: SolverConfig | None = None) -> float:
    """Key rate of either protocol family, in bits per source pulse / channel use."""
    if isinstance(setup, DvSetup):
        return key_rate_dv(setup, config)
    return key_rate_cv(setup, config).key_rate


def _positive_rate(setup: Setup, config: SolverConfig | None = None) -> bool:
    """Sign of the key rate, the quantity every threshold solver bisects on.

    For DV setups the secret fraction depends on the devices only through the
    QBER, so positivity reduces to comparing the QBER against the cached
    protocol threshold; this keeps the preprocessed sweeps free of the nested
    flip-rate optimization.
    """
    if isinstance(setup, DvSetup):
        obs = observables(setup)
        if obs.p_exp <= 0.0:
            return False
        return obs.qber < qber_threshold(setup.protocol, setup.preprocessing, config)
    return key_rate_cv(setup, config).key_rate > 0.0


def mu_max(
    template: Setup,
    transmittance: float,
    config: SolverConfig | None = None,
    rel_tol: float = 1e-6,
) -> ThresholdResult:
    """Largest mean noise photon number with a positive key rate at this transmittance.

    Bisection of the key-rate sign change; the initial bracket [0, T] grows
    geometrically (x4) until the rate turns non-positive, capped at
    MU_BRACKET_CAP.  If the rate is still positive at the cap the threshold is
    reported as inf with status ok: in this detection model the post-selected
    QBER saturates below the protocol threshold at high transmittance, so no
    finite bound exists.  Status no-positive-rate flags points that are
    insecure even without noise.
    """

    def secure(mu: float) -> bool:
        return _positive_rate(with_channel(template, transmittance, mu), config)

    if not secure(0.0):
        return ThresholdResult(math.nan, STATUS_NO_RATE)
    lo = 0.0
    hi = transmittance
    while secure(hi):
        lo = hi
        hi *= 4.0
        if hi > MU_BRACKET_CAP:
            return ThresholdResult(math.inf, STATUS_OK)
    for _ in range(200):
        if hi - lo <= rel_tol * hi:
            return ThresholdResult(0.5 * (lo + hi), STATUS_OK)
        mid = 0.5 * (lo + hi)
        if secure(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(math.nan, STATUS_FAILURE)


def mu_max_curve(
    template: Setup, t_grid, config: SolverConfig | None = None
) -> CurveResult:
    """Noise threshold as a function of channel transmittance."""
    rows = []
    for t in t_grid:
        result = mu_max(template, t, config)
        rows.append((t, result.value, result.status))
    return CurveResult(("t", "mu_max", "status"), tuple(rows))


def ratio_curve(
    cv_template: CvSetup,
    dv_template_: DvSetup,
    t_grid,
    config: SolverConfig | None = None,
) -> CurveResult:
    """Per-point ratio mu_max_cv / mu_max_dv over a transmittance grid."""
    rows = []
    for t in t_grid:
        cv = mu_max(cv_template, t, config)
        dv = mu_max(dv_template_, t, config)
        if cv.ok and dv.ok:
            if math.isinf(cv.value) and math.isinf(dv.value):
                rows.append((t, cv.value, dv.value, math.nan, STATUS_FAILURE))
            else:
                rows.append((t, cv.value, dv.value, cv.value / dv.value, STATUS_OK))
        else:
            bad = cv.status if not cv.ok else dv.status
            rows.append((t, cv.value, dv.value, math.nan, bad))
    return CurveResult(("t", "mu_max_cv", "mu_max_dv", "ratio", "status"), tuple(rows))


def min_source_p(
    dv_template_: DvSetup,
    transmittance: float,
    mu: float,
    config: SolverConfig | None = None,
    tol: float = 1e-6,
) -> float | None:
    """Smallest source quality p with a positive key rate, or None if p = 1 fails.

    The QBER is strictly decreasing in p (more signal dilutes the noise), so
    the key-rate sign change in p is unique; without signal the accepted events
    are pure noise and the QBER pins at 1/2.
    """

    def secure(p: float) -> bool:
        setup = with_channel(replace(dv_template_, source_p=p), transmittance, mu)
        return _positive_rate(setup, config)

    if not secure(1.0):
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if secure(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def min_squeezing(
    cv_template: CvSetup,
    transmittance: float,
    mu: float,
    config: SolverConfig | None = None,
    rel_tol: float = 1e-6,
    floor: float = 1e-6,
) -> float | None:
    """Largest signal variance v_s (least squeezing) still giving a positive rate.

    The modulation variance is held fixed while the squeezing varies
    independently, so the search runs on the generalized preparation.  Returns
    1.0 when no squeezing is required at all, None when the rate is
    non-positive even at the squeezing floor.
    """
    base = cv_template
    if base.variant != GENERALIZED:
        base = replace(base, variant=GENERALIZED)

    def secure(v_s: float) -> bool:
        setup = with_channel(replace(base, v_s=v_s), transmittance, mu)
        return key_rate_cv(setup, config).key_rate > 0.0

    if not secure(floor):
        return None
    if secure(1.0):
        return 1.0
    lo, hi = floor, 1.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if secure(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cv_cutoff_transmittance(
    cv_template: CvSetup,
    mu: float,
    config: SolverConfig | None = None,
    t_lo: float = 1e-8,
    t_hi: float = 0.999,
    rel_tol: float = 1e-6,
) -> float:
    """Smallest transmittance at which the CV template still tolerates noise mu.

    Below the returned value the CV protocol is insecure at this noise level;
    the boundary is located by log-space bisection of the key-rate sign.
    """

    def secure(t: float) -> bool:
        return _positive_rate(with_channel(cv_template, t, mu), config)

    if secure(t_lo):
        return t_lo
    if not secure(t_hi):
        raise ConvergenceError(f"CV protocol insecure over [{t_lo}, {t_hi}] at mu={mu}")
    lo, hi = t_lo, t_hi
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if secure(mid):
            hi = mid
        else:
            lo = mid
    return hi


def min_p_to_beat_cv(
    dv_template_: DvSetup,
    mu: float,
    cv_template: CvSetup | None = None,
    config: SolverConfig | None = None,
) -> tuple[float | None, float]:
    """Source quality needed to generate key where the CV protocol just fails.

    Evaluated at the CV security cutoff transmittance for this noise level,
    where the requirement over the CV-insecure region is weakest; returns
    (min_p or None, cutoff transmittance).
    """
    cv = cv_template or infinite_squeezing_template(dv_template_.channel.noise.family)
    t_star = cv_cutoff_transmittance(cv, mu, config)
    return min_source_p(dv_template_, t_star, mu, config), t_star


def dark_count_bound(protocol: str, d_over_eta: float) -> float:
    """Fitted upper bound on the dark-count transmittance threshold.

    10^(1.07*log10(d/eta) + 1.45) for six-state, 10^(1.15*log10(d/eta) + 2.12)
    for BB84; valid for d/eta between 1e-7 and 1e-4.
    """
    if d_over_eta <= 0.0:
        raise ValueError(f"d/eta must be positive: {d_over_eta}")
    slope, intercept = (1.07, 1.45) if protocol == SIX_STATE else (1.15, 2.12)
    return 10.0 ** (slope * math.log10(d_over_eta) + intercept)


def dark_count_threshold(
    dv_template_: DvSetup,
    d_over_eta: float,
    cv_template: CvSetup | None = None,
    config: SolverConfig | None = None,
    rel_tol: float = 1e-3,
) -> float:
    """Transmittance below which dark counts stop the DV protocol from beating
    the infinite-squeezing CV protocol even with a perfect source.

    Detector parameters enter only through d/eta in the low-transmittance
    regime, so the template is evaluated at eta = 1, d = d_over_eta, p = 1.
    Valid for d/eta between 1e-7 and 1e-4.
    """
    if not 1e-7 <= d_over_eta <= 1e-4:
        raise ValueError(f"d/eta out of the supported range [1e-7, 1e-4]: {d_over_eta}")
    dv = replace(dv_template_, source_p=1.0, dark_count_d=d_over_eta, efficiency_eta=1.0)
    cv = cv_template or infinite_squeezing_template(dv.channel.noise.family)

    def advantage(t: float) -> float:
        dv_threshold = mu_max(dv, t, config)
        cv_threshold = mu_max(cv, t, config)
        dv_value = 0.0 if dv_threshold.status == STATUS_NO_RATE else dv_threshold.value
        return dv_value - cv_threshold.value

    # scan downwards for the lower edge of the DV-beats-CV window
    t_pos = None
    t_neg = None
    for t in reversed(log_grid(1e-7, 0.05, 64)):
        if advantage(t) > 0.0:
            t_pos = t
        elif t_pos is not None:
            t_neg = t
            break
    if t_pos is None:
        raise ConvergenceError(
            f"no transmittance window where the DV protocol beats the CV bound "
            f"at d/eta = {d_over_eta}"
        )
    if t_neg is None:
        return t_pos
    lo, hi = t_neg, t_pos
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if advantage(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def key_rate_curve(
    template: Setup, t_grid, config: SolverConfig | None = None
) -> CurveResult:
    """K(T) at the template's noise level; zero-rate points carry no-positive-rate."""
    rows = []
    for t in t_grid:
        k = key_rate(with_channel(template, t, None), config)
        rows.append((t, k, STATUS_OK if k > 0.0 else STATUS_NO_RATE))
    return CurveResult(("t", "key_rate", "status"), tuple(rows))


def region_map(
    dv_template_: DvSetup,
    t_grid,
    mu_grid,
    cv_template: CvSetup | None = None,
    config: SolverConfig | None = None,
) -> CurveResult:
    """Source-quality requirement over a (T, mu) grid, gated on CV security.

    Cells where the infinite-squeezing CV protocol is still secure are marked
    cv-secure; elsewhere the cell holds the minimum source p for the DV
    template, or the no-positive-rate status where even p = 1 fails.
    """
    cv = cv_template or infinite_squeezing_template(dv_template_.channel.noise.family)
    rows = []
    for t in t_grid:
        cv_threshold = mu_max(cv, t, config)
        for mu in mu_grid:
            if cv_threshold.ok and mu <= cv_threshold.value:
                rows.append((t, mu, math.nan, STATUS_CV_SECURE))
                continue
            p = min_source_p(dv_template_, t, mu, config)
            if p is None:
                rows.append((t, mu, math.nan, STATUS_NO_RATE))
            else:
                rows.append((t, mu, p, STATUS_OK))
    return CurveResult(("t", "mu", "min_p", "status"), tuple(rows))
