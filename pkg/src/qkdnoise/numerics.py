"""Scalar special functions and 1-D solvers shared by the security computations.

All entropies are in bits (base-2 logarithms), and the 0*log(0) = 0 convention
is applied by explicit branching rather than by relying on floating-point
limits.  The solvers are deterministic: pure bisection for roots and
grid-seeded golden-section search for maximization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable


class NoSignChangeError(ValueError):
    """The bracket endpoints do not straddle a root."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


@dataclass(frozen=True)
class SolverConfig:
    """Termination criteria for the 1-D solvers (tolerance on the argument axis)."""

    tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not self.tol > 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class BracketedFunction:
    """A scalar function together with the closed interval it is evaluated on.

    The function must be defined everywhere on [lower, upper]; singular points
    have to be excluded by the caller when choosing the bounds.
    """

    f: Callable[[float], float]
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")


def _xlog2(x: float) -> float:
    """x * log2(x) with the 0*log2(0) = 0 convention."""
    if x == 0.0:
        return 0.0
    return x * math.log2(x)


def binary_entropy(q: float) -> float:
    """Shannon entropy in bits of a bit with bias q."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"probability out of [0, 1]: {q}")
    return -_xlog2(q) - _xlog2(1.0 - q)


def six_state_error_entropy(q: float) -> float:
    """Entropy in bits of the symmetric six-state error pattern at error rate q.

    Equals the Shannon entropy of the distribution {1 - 3q/2, q/2, q/2, q/2};
    its unit root sets the six-state QBER threshold.
    """
    if not 0.0 <= q <= 2.0 / 3.0:
        raise ValueError(f"error rate out of [0, 2/3]: {q}")
    return -_xlog2(1.0 - 1.5 * q) - 3.0 * _xlog2(0.5 * q)


def bosonic_entropy(x: float) -> float:
    """Von Neumann entropy in bits of a thermal bosonic state with mean photon number x."""
    if x < 0.0:
        raise ValueError(f"mean photon number must be >= 0: {x}")
    return _xlog2(x + 1.0) - _xlog2(x)


_BRANCH_POINT = -1.0 / math.e


def lambert_w_minus1(x: float) -> float:
    """Lower real branch W_-1 of the Lambert W function on [-1/e, 0).

    Returns the solution w <= -1 of w*exp(w) = x.  A branch-point series or the
    asymptotic expansion seeds Halley iterations, safeguarded by a bisection
    bracket so the iterates can never escape to the principal branch.
    """
    if x < _BRANCH_POINT or x >= 0.0:
        raise ValueError(f"W_-1 is real only on [-1/e, 0): {x}")
    if x == _BRANCH_POINT:
        return -1.0
    if x > -0.25:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    else:
        # series around the branch point in p = -sqrt(2(e*x + 1))
        p = -math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    # f(w) = w*exp(w) - x is monotone decreasing on (-inf, -1]; exp underflows
    # below about -745, where f is exactly -x > 0, so the bracket stays valid.
    lo, hi = -760.0, -1.0
    for _ in range(200):
        ew = math.exp(w)
        residual = w * ew - x
        if abs(residual) <= 1e-14 * abs(x):
            return w
        if residual > 0.0:
            lo = max(lo, w)
        else:
            hi = min(hi, w)
        wp1 = w + 1.0
        if abs(wp1) < 1e-12:
            return w  # hugging the branch point; the series seed is already exact
        halley_den = ew * wp1 - (w + 2.0) * residual / (2.0 * wp1)
        w_new = w - residual / halley_den if halley_den != 0.0 else 0.5 * (lo + hi)
        if not lo < w_new < hi:
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= 1e-15 * abs(w):
            return w_new
        w = w_new
    return w


def find_root(bracket: BracketedFunction, config: SolverConfig | None = None) -> float:
    """Bisection root of f over [lower, upper]; requires f(lower)*f(upper) <= 0.

    Pure bisection, no derivatives or randomness; the bracket is narrowed until
    its width is at most config.tol.
    """
    cfg = config or SolverConfig()
    f = bracket.f
    lo, hi = bracket.lower, bracket.upper
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NoSignChangeError(f"f({lo}) = {flo} and f({hi}) = {fhi} have the same sign")
    for _ in range(cfg.max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= cfg.tol:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection stalled above width {cfg.tol} after {cfg.max_iter} iterations"
    )


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_OPT_TOL = 1e-10


def maximize_scalar(
    bracket: BracketedFunction,
    config: SolverConfig | None = None,
    grid_points: int = 64,
) -> tuple[float, float]:
    """Grid-seeded golden-section maximization; returns (argmax, max).

    A coarse scan with `grid_points` samples picks the best cell, then
    golden-section search refines within the two neighbouring cells.  For
    multimodal functions the result is the best local maximum the grid can
    resolve, so the grid spacing bounds which basins can be found.
    """
    cfg = config or SolverConfig(tol=DEFAULT_OPT_TOL)
    if grid_points < 2:
        raise ValueError(f"need at least 2 grid points, got {grid_points}")
    f = bracket.f
    lo, hi = bracket.lower, bracket.upper
    xs = [lo + (hi - lo) * i / (grid_points - 1) for i in range(grid_points)]
    vals = [f(x) for x in xs]
    best = max(range(grid_points), key=vals.__getitem__)
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, grid_points - 1)]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    while b - a > cfg.tol:
        if iterations >= cfg.max_iter:
            raise ConvergenceError(
                f"golden-section search stalled above width {cfg.tol} "
                f"after {cfg.max_iter} iterations"
            )
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        iterations += 1
    x_mid = 0.5 * (a + b)
    best_val, best_x = max((f(x_mid), x_mid), (vals[best], xs[best]))
    return best_x, best_val
