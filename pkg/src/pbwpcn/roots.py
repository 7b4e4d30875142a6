"""Scalar solvers backing every closed form in the allocator.

Two primitives: the principal branch of the Lambert W function, and the
monotone family  z*ln(z) + (Y - 1)*z + 1 = X  whose unique root z > 1 fixes
the charging-time and price-response expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError

_BRANCH_POINT = -1.0 / math.e


@dataclass(frozen=True)
class RootConfig:
    abs_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise DomainError("abs_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


DEFAULT_CONFIG = RootConfig()


def lambert_w0(x: float, cfg: RootConfig = DEFAULT_CONFIG) -> float:
    """Principal branch W(x): the w >= -1 with w * exp(w) = x.

    Defined for x >= -1/e.  Near the branch point a series in
    p = sqrt(2*(e*x + 1)) seeds the iteration; plain starts lose digits
    there, and realistic low-gain channels land exactly in that region.
    """
    if x < _BRANCH_POINT:
        if x > _BRANCH_POINT * (1.0 + 1e-14) - 1e-300:
            x = _BRANCH_POINT  # round-off guard
        else:
            raise DomainError(f"lambert_w0 needs x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0

    if x < _BRANCH_POINT + 1e-4:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        # series about the branch point
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3 - 43.0 / 540.0 * p**4
    elif x < math.e:
        # pade-ish start, accurate enough for Halley on the mid range
        w = x / (1.0 + x) if x > 0.0 else x * math.exp(-x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)

    tol = cfg.abs_tol * (1.0 + abs(x))
    for _ in range(cfg.max_iter):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            return w
        # Halley step for f(w) = w e^w - x
        fp = ew * (w + 1.0)
        denom = fp - (w + 2.0) * f / (2.0 * w + 2.0) if w != -1.0 else fp
        w -= f / denom
        if w < -1.0:
            w = -1.0 + 1e-16
    ew = math.exp(w)
    if abs(w * ew - x) <= 100.0 * tol:
        return w
    raise ConvergenceError(f"lambert_w0 did not converge for x={x}")


def solve_z(
    x_target: float,
    y_coef: float,
    cfg: RootConfig = DEFAULT_CONFIG,
    z_hint: float | None = None,
) -> float:
    """Unique root z > 1 of  z*ln(z) + (y_coef - 1)*z + 1 = x_target.

    The left side is increasing for z > 1 with value y_coef at z = 1, so a
    root above 1 exists iff x_target > y_coef.  Safeguarded Newton from the
    upper bracket end (the function is convex, so iterates stay above the
    root); ``z_hint`` lets callers warm-start from a nearby solve.
    """
    if y_coef < 0.0:
        raise DomainError(f"y_coef must be nonnegative, got {y_coef}")
    if x_target <= y_coef:
        raise DomainError(f"need x_target > y_coef, got X={x_target}, Y={y_coef}")

    lo = 1.0 + 1e-15
    hi = x_target + 2.0

    def g(z):
        return z * math.log(z) + (y_coef - 1.0) * z + 1.0

    z = hi
    if z_hint is not None and lo < z_hint <= hi and g(z_hint) >= x_target:
        z = z_hint

    tol = cfg.abs_tol * (1.0 + abs(x_target))
    for _ in range(cfg.max_iter):
        resid = g(z) - x_target
        if abs(resid) <= tol:
            return z
        if resid > 0.0:
            hi = min(hi, z)
        else:
            lo = max(lo, z)
        step = resid / (math.log(z) + y_coef)
        z_new = z - step
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)  # bisection fallback
        z = z_new
    raise ConvergenceError(
        f"solve_z did not converge for X={x_target}, Y={y_coef}"
    )
