"""Quadrature, root finding and grid search over the real line.

All integration is driven by a vectorized adaptive Gauss-Kronrod rule.
Integrals over infinite tails are graded with a three-valued verdict
(converged / divergent / inconclusive) based on how partial integrals
behave under geometric doubling of the truncation radius; nothing is
ever silently extrapolated past what the probes support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .expr import EvalDomainError

__all__ = [
    "QuadratureConfig",
    "IntegralResult",
    "SupReport",
    "BracketError",
    "integrate",
    "integrate_improper",
    "find_root_monotone",
    "sup_on_expanding_grid",
    "inf_on_expanding_grid",
    "verify_mean_identity",
    "golden_max",
]

CONVERGED = "converged"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

BOUNDED = "bounded"
GROWING = "growing"

# 15-point Kronrod extension of 7-point Gauss (standard abscissae/weights)
_XK = np.array(
    [
        -0.991455371120813,
        -0.949107912342759,
        -0.864864423359769,
        -0.741531185599394,
        -0.586087235467691,
        -0.405845151377397,
        -0.207784955007898,
        0.0,
        0.207784955007898,
        0.405845151377397,
        0.586087235467691,
        0.741531185599394,
        0.864864423359769,
        0.949107912342759,
        0.991455371120813,
    ]
)
_WK = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
        0.204432940075298,
        0.190350578064785,
        0.169004726639267,
        0.140653259715525,
        0.104790010322250,
        0.063092092629979,
        0.022935322010529,
    ]
)
# Gauss-7 weights aligned with every second Kronrod node (indices 1,3,...,13)
_WG = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ]
)


@dataclass
class QuadratureConfig:
    """Shared tolerances and budgets for the integration layer.

    tail_growth_threshold is the per-doubling ratio of successive tail
    increments above which an improper integral is graded divergent.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000
    x_max: float = 40.0
    tail_growth_threshold: float = 0.9


@dataclass
class IntegralResult:
    value: float
    est_error: float
    verdict: str  # converged | divergent | inconclusive
    neval: int = 0
    message: str = ""

    def require(self) -> float:
        """Value if converged, else raise."""
        if self.verdict != CONVERGED:
            raise ArithmeticError(
                f"integral did not converge ({self.verdict}): {self.message}"
            )
        return self.value


class BracketError(RuntimeError):
    """A sign-changing bracket could not be located within budget."""


def _panel_estimates(f: Callable, lo: np.ndarray, hi: np.ndarray):
    """Kronrod/Gauss estimates for a batch of panels, one function call."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    # nodes laid out as (npanels, 15) then flattened for a single eval
    nodes = mid[:, None] + half[:, None] * _XK[None, :]
    vals = np.asarray(f(nodes.reshape(-1)), dtype=float).reshape(nodes.shape)
    k = half * (vals @ _WK)
    g = half * (vals[:, 1::2] @ _WG)
    err = np.abs(k - g)
    return k, err


def integrate(
    f: Callable,
    a: float,
    b: float,
    cfg: Optional[QuadratureConfig] = None,
    breakpoints: Sequence[float] = (),
) -> IntegralResult:
    """Adaptive integral of a vectorized integrand over [a, b].

    Known kinks can be passed as breakpoints so the initial panels do
    not straddle them.  Budget exhaustion yields verdict
    ``inconclusive`` with the best estimate, never an exception.
    """
    cfg = cfg or QuadratureConfig()
    if a == b:
        return IntegralResult(0.0, 0.0, CONVERGED, 0)
    sgn = 1.0
    if b < a:
        a, b = b, a
        sgn = -1.0
    cuts = sorted({a, b, *(float(t) for t in breakpoints if a < float(t) < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    vals, errs = _panel_estimates(f, lo, hi)
    neval = 15 * len(lo)

    while True:
        total = float(np.sum(vals))
        err_total = float(np.sum(errs))
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if err_total <= tol:
            return IntegralResult(sgn * total, err_total, CONVERGED, neval)
        if len(lo) >= cfg.max_subdivisions:
            return IntegralResult(
                sgn * total,
                err_total,
                INCONCLUSIVE,
                neval,
                f"panel budget {cfg.max_subdivisions} exhausted",
            )
        # split every panel whose error exceeds its fair share
        share = tol / max(len(lo), 1)
        split = errs > 0.5 * share
        if not split.any():
            split = errs >= np.max(errs)
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[keep], lo[split], mid])
        new_hi = np.concatenate([hi[keep], mid, hi[split]])
        kept_vals = vals[keep]
        kept_errs = errs[keep]
        child_vals, child_errs = _panel_estimates(
            f, np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]])
        )
        neval += 15 * 2 * int(split.sum())
        lo, hi = new_lo, new_hi
        vals = np.concatenate([kept_vals, child_vals])
        errs = np.concatenate([kept_errs, child_errs])


_IMPROPER_MAX_DOUBLINGS = 42  # radius reaches ~4.4e12


def _origin_scales(a: float, b: float) -> tuple:
    """Dyadic breakpoints for a window straddling the origin.

    A doubling window far from its anchor can span many orders of
    magnitude; mass concentrated near zero would then hide between the
    quadrature nodes of one giant panel.  Splitting at geometric scales
    keeps every panel within a factor 4 of its distance from zero.
    """
    if not (a < 0.0 < b):
        return ()
    out = [0.0]
    m = 1.0
    top = max(-a, b)
    while m < top:
        if a < -m:
            out.append(-m)
        if m < b:
            out.append(m)
        m *= 4.0
    return tuple(out)


def integrate_improper(
    f: Callable,
    side: str,
    cfg: Optional[QuadratureConfig] = None,
    anchor: float = 0.0,
) -> IntegralResult:
    """Tail integral with a three-valued verdict.

    side is 'left' (anchor down to -inf), 'right' (anchor up to +inf) or
    'both'.  Partial integrals are accumulated over geometrically
    doubled radii; increments that keep a fixed sign and fail to decay
    by at least the configured factor per doubling grade the tail
    divergent-indicated.  The convergence check runs first, so enlarging
    the probing budget can never flip a converged verdict.
    """
    cfg = cfg or QuadratureConfig()
    if side == "both":
        left = integrate_improper(f, "left", cfg, anchor)
        right = integrate_improper(f, "right", cfg, anchor)
        verdict = CONVERGED
        msg = ""
        for part, name in ((left, "left"), (right, "right")):
            if part.verdict == DIVERGENT:
                verdict = DIVERGENT
                msg = f"{name} tail divergent-indicated"
                break
            if part.verdict == INCONCLUSIVE:
                verdict = INCONCLUSIVE
                msg = f"{name} tail inconclusive"
        return IntegralResult(
            left.value + right.value,
            left.est_error + right.est_error,
            verdict,
            left.neval + right.neval,
            msg,
        )
    if side not in ("left", "right"):
        raise ValueError("side must be 'left', 'right' or 'both'")

    direction = 1.0 if side == "right" else -1.0
    if f.__class__.__name__ == "RealFunction" and getattr(f, "support", None):
        sup_lo, sup_hi = f.support
    else:
        sup_lo = sup_hi = None

    total = 0.0
    err = 0.0
    neval = 0
    tail_incs: list[float] = []
    radius = 1.0
    prev_edge = anchor
    quiet = 0
    for level in range(_IMPROPER_MAX_DOUBLINGS):
        inner = abs(prev_edge - anchor)
        edge = anchor + direction * radius
        a, b = (prev_edge, edge) if direction > 0 else (edge, prev_edge)
        # clip to declared support: beyond it the increment is exactly zero
        if sup_lo is not None:
            a2, b2 = max(a, sup_lo), min(b, sup_hi)
            if a2 >= b2:
                part = IntegralResult(0.0, 0.0, CONVERGED, 0)
            else:
                part = integrate(f, a2, b2, cfg, breakpoints=_origin_scales(a2, b2))
        else:
            part = integrate(f, a, b, cfg, breakpoints=_origin_scales(a, b))
        if part.verdict == INCONCLUSIVE:
            return IntegralResult(
                total + part.value,
                err + part.est_error,
                INCONCLUSIVE,
                neval + part.neval,
                f"segment [{a:g}, {b:g}] did not converge",
            )
        inc = part.value
        total += inc
        err += part.est_error
        neval += part.neval
        # increments only inform the tail verdicts once their window lies
        # beyond the anchor's own distance from the origin: before that,
        # windows sweeping across centrally concentrated mass produce
        # growth-then-collapse patterns that mean nothing about the tail
        if inner >= max(1.0, abs(anchor)):
            tail_incs.append(inc)
        prev_edge = edge
        radius *= 2.0

        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if abs(inc) <= tol and tail_incs:
            quiet += 1
            if quiet >= 2:
                return IntegralResult(total, err + abs(inc), CONVERGED, neval)
        else:
            quiet = 0
        if len(tail_incs) >= 5:
            last = tail_incs[-5:]
            same_sign = all(v > 0 for v in last) or all(v < 0 for v in last)
            ratios_ok = all(
                abs(last[i + 1]) >= cfg.tail_growth_threshold * abs(last[i])
                for i in range(4)
            )
            if same_sign and ratios_ok and abs(last[-1]) > tol:
                return IntegralResult(
                    total,
                    err,
                    DIVERGENT,
                    neval,
                    "tail increments not decaying under doubling",
                )
    return IntegralResult(
        total, err, INCONCLUSIVE, neval, "doubling budget exhausted"
    )


def find_root_monotone(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Root of a monotone function on a bracketing interval.

    Deterministic bisection with secant acceleration; ``tol`` is
    relative to the root scale.  Requires g(lo) and g(hi) of opposite
    sign (either may be zero).
    """
    glo = g(lo)
    ghi = g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]")
    for _ in range(max_iter):
        width_tol = tol * max(1.0, abs(lo), abs(hi))
        if hi - lo <= width_tol:
            break
        # secant candidate, accepted only if it lands well inside
        denom = ghi - glo
        mid = 0.5 * (lo + hi)
        x = mid
        if denom != 0.0:
            xs = lo - glo * (hi - lo) / denom
            if lo + 0.1 * width_tol < xs < hi - 0.1 * width_tol:
                x = 0.5 * (xs + mid)
        gx = g(x)
        if gx == 0.0:
            return x
        if glo * gx < 0:
            hi, ghi = x, gx
        else:
            lo, glo = x, gx
    return 0.5 * (lo + hi)


@dataclass
class SupReport:
    """Result of a supremum search over geometrically expanding probes."""

    estimate: float
    argmax: float
    trend: str  # bounded | growing | inconclusive
    level_maxima: list = field(default_factory=list)
    radii: list = field(default_factory=list)


def _expanding_probes(radii: Sequence[float], per_level: int) -> list[np.ndarray]:
    """Symmetric probe batches filling (r_{j-1}, r_j] on both sides."""
    batches = [np.array([0.0])]
    prev = 0.0
    for r in radii:
        lo = max(prev, 1e-3 * r)
        pts = np.linspace(lo, r, per_level + 1)[1:]
        batches.append(np.concatenate([-pts[::-1], pts]))
        prev = r
    return batches


def sup_on_expanding_grid(
    f: Callable[[float], float],
    radii: Optional[Sequence[float]] = None,
    per_level: int = 8,
    stable_tol: float = 0.005,
    growth_factor: float = 1.5,
    trend_window: int = 4,
    refine: bool = False,
) -> SupReport:
    """Estimate sup f over the line with a bounded/growing trend grade.

    Levels double the probe radius.  The running max is graded
    ``bounded`` when the last ``trend_window`` doublings changed it by
    less than ``stable_tol`` relatively, ``growing`` when it kept
    increasing and gained at least ``growth_factor`` over that window,
    and ``inconclusive`` otherwise.  f is evaluated pointwise (scalars).
    """
    if radii is None:
        radii = [float(2**j) for j in range(0, 21)]
    best = -math.inf
    arg = 0.0
    level_maxima = []
    for batch in _expanding_probes(radii, per_level):
        for x in batch:
            val = float(f(float(x)))
            if val > best:
                best = val
                arg = float(x)
        level_maxima.append(best)
    w = min(trend_window, len(level_maxima) - 1)
    trend = INCONCLUSIVE
    if w >= 1:
        old = level_maxima[-1 - w]
        new = level_maxima[-1]
        if old > 0 and new <= old * (1.0 + stable_tol):
            trend = BOUNDED
        elif old == new == 0.0:
            trend = BOUNDED
        elif old > 0 and new >= old * growth_factor:
            trend = GROWING
        elif old <= 0 < new:
            trend = GROWING
    if refine and trend == BOUNDED:
        span = max(abs(arg), 1.0)
        lo, hi = arg - 0.5 * span, arg + 0.5 * span
        xr, vr = golden_max(lambda t: float(f(t)), lo, hi)
        if vr > best:
            best, arg = vr, xr
    return SupReport(best, arg, trend, level_maxima, list(radii))


def inf_on_expanding_grid(f, **kwargs) -> SupReport:
    """Infimum counterpart of sup_on_expanding_grid (same grading)."""
    rep = sup_on_expanding_grid(lambda x: -f(x), **kwargs)
    return SupReport(-rep.estimate, rep.argmax, rep.trend, [-m for m in rep.level_maxima], rep.radii)


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8):
    """Golden-section maximum of a scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol * max(1.0, abs(a), abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def verify_mean_identity(
    f,
    f2: Callable,
    x: float,
    t: float,
    cfg: Optional[QuadratureConfig] = None,
) -> float:
    """Residual of the symmetric-window mean identity, a quadrature self-test.

    For twice-differentiable f the window integral satisfies

        int_{x-t}^{x+t} f  =  2 f(x) t
            + int_0^t int_0^{t1} int_{x-t2}^{x+t2} f''(t3) dt3 dt2 dt1.

    Both sides are evaluated by the adaptive rule (the triple integral
    by nesting), so the residual exercises the full quadrature stack.
    Returns |lhs - rhs|.
    """
    cfg = cfg or QuadratureConfig()
    lhs = integrate(f, x - t, x + t, cfg, breakpoints=[x]).require()

    def inner(t2_arr):
        t2s = np.atleast_1d(np.asarray(t2_arr, dtype=float))
        out = np.empty_like(t2s)
        for i, t2 in enumerate(t2s):
            out[i] = integrate(f2, x - t2, x + t2, cfg, breakpoints=[x]).require()
        return out if np.ndim(t2_arr) else float(out[0])

    def middle(t1_arr):
        t1s = np.atleast_1d(np.asarray(t1_arr, dtype=float))
        out = np.empty_like(t1s)
        for i, t1 in enumerate(t1s):
            out[i] = integrate(inner, 0.0, float(t1), cfg).require()
        return out if np.ndim(t1_arr) else float(out[0])

    triple = integrate(middle, 0.0, t, cfg).require()
    rhs = 2.0 * float(f(x)) * t + triple
    return abs(lhs - rhs)
