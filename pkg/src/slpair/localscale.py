"""Local length scales induced by a locally integrable potential.

For a nonnegative potential q with positive mass on both sides of every
point, two companion scales are defined implicitly:

* d(x)     solves  int_0^{sqrt(2) d} ( int_{x-t}^{x+t} q )  dt = 2,
* d_hat(x) solves  eta * int_{x-eta}^{x+eta} q = 2.

Both roots exist and are unique because the left sides are continuous,
vanish at 0 and increase without bound in eta.  The averaged potentials
q*(x) = d(x)^-2 and its companion d_hat(x)^-2 drive every later
diagnostic: solvability trends, asymmetry measures and admissibility
certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .expr import EvalDomainError, RealFunction
from .grading import FAIL, GradedCheck, INCONCLUSIVE_GRADE, PASS
from .numerics import (
    BracketError,
    QuadratureConfig,
    integrate,
    sup_on_expanding_grid,
)

__all__ = [
    "LocalScale",
    "AsymptoticDecomposition",
    "class_H_check",
    "kappa1",
    "kappa2",
    "asymptotic_d_check",
]

_SQRT2 = math.sqrt(2.0)
_MAX_BRACKET_DOUBLINGS = 70
_OVERFLOW_SENTINEL = 1e300


class LocalScale:
    """Solver and cache for the scales d, d_hat of one potential.

    Roots are located by bracket doubling plus monotone bisection with
    secant acceleration.  Results are cached keyed on the exact float
    abscissa; correctness-sensitive callers always get a fresh solve at
    any x not previously requested, never an interpolation.
    """

    def __init__(
        self,
        q: RealFunction,
        quad: Optional[QuadratureConfig] = None,
        root_tol: float = 1e-10,
        eps_q: float = 1e-12,
    ):
        self.q = q
        self.quad = quad or QuadratureConfig()
        self.root_tol = root_tol
        self.eps_q = eps_q
        self._d_cache: dict[float, float] = {}
        self._dhat_cache: dict[float, float] = {}

    # -- window integrals ------------------------------------------------

    def _window_breaks(self, lo: float, hi: float, extra=()):
        kinks = getattr(self.q, "kinks", ()) or ()
        return [*extra, *(k for k in kinks if lo < k < hi)]

    def window_mass(self, x: float, eta: float) -> float:
        """int_{x-eta}^{x+eta} q."""
        if eta <= 0.0:
            return 0.0
        lo, hi = x - eta, x + eta
        r = integrate(self.q, lo, hi, self.quad, breakpoints=self._window_breaks(lo, hi))
        return r.require()

    def F(self, x: float, eta: float) -> float:
        """Nested window mass int_0^{sqrt(2) eta} int_{x-t}^{x+t} q dxi dt.

        Evaluated in collapsed form as a single tent-weighted integral,
        int q(xi) (sqrt(2) eta - |xi - x|) dxi over the widest window,
        which is exact by switching the order of integration.
        """
        if eta <= 0.0:
            return 0.0
        half = _SQRT2 * eta
        lo, hi = x - half, x + half

        def tent(xi):
            return self.q(xi) * (half - np.abs(xi - x))

        r = integrate(tent, lo, hi, self.quad, breakpoints=self._window_breaks(lo, hi, (x,)))
        return r.require()

    # -- implicit scales --------------------------------------------------

    def _initial_eta(self, x: float) -> float:
        qx = float(self.q(x))
        if qx <= 0.0:
            return 1.0
        return 1.0 / math.sqrt(max(qx, self.eps_q))

    def _solve(self, x: float, g) -> float:
        """Root of increasing g with g(0+) < 0, by doubling then bisection.

        Window integrals of a nonnegative potential can overflow when a
        trial width reaches far into a growth region; a non-finite value
        then only means the mass target is exceeded, so such trials are
        treated as a huge positive g and the bracket shrinks past them.
        """

        def gg(eta: float) -> float:
            try:
                return g(eta)
            except EvalDomainError:
                return _OVERFLOW_SENTINEL

        eta = self._initial_eta(x)
        val = gg(eta)
        if val > 0.0:
            hi, lo = eta, eta
            for _ in range(_MAX_BRACKET_DOUBLINGS):
                lo *= 0.5
                if gg(lo) <= 0.0:
                    break
                hi = lo
            else:
                raise BracketError(
                    f"no lower bracket for the scale equation at x = {x!r}"
                )
        else:
            lo, hi = eta, eta
            for _ in range(_MAX_BRACKET_DOUBLINGS):
                hi *= 2.0
                if gg(hi) >= 0.0:
                    break
                lo = hi
            else:
                raise BracketError(
                    f"window mass never reaches the target near x = {x!r}; "
                    "the potential may vanish on an unbounded set"
                )
        from .numerics import find_root_monotone

        return find_root_monotone(gg, lo, hi, tol=self.root_tol)

    def d(self, x: float) -> float:
        """Primary local scale at x (cached)."""
        x = float(x)
        hit = self._d_cache.get(x)
        if hit is not None:
            return hit
        root = self._solve(x, lambda eta: self.F(x, eta) - 2.0)
        self._d_cache[x] = root
        return root

    def d_hat(self, x: float) -> float:
        """Companion scale at x from the single-window equation (cached)."""
        x = float(x)
        hit = self._dhat_cache.get(x)
        if hit is not None:
            return hit
        root = self._solve(x, lambda eta: eta * self.window_mass(x, eta) - 2.0)
        self._dhat_cache[x] = root
        return root

    def q_star(self, x: float) -> float:
        """Averaged potential d(x)^-2."""
        return 1.0 / self.d(x) ** 2

    def q_hat_star(self, x: float) -> float:
        """Averaged potential d_hat(x)^-2."""
        return 1.0 / self.d_hat(x) ** 2

    def d_prime(self, x: float, h: Optional[float] = None) -> float:
        """Central-difference slope of d; |d'| <= 1/sqrt(2) must hold."""
        if h is None:
            h = max(1e-5, 1e-5 * abs(x))
        return (self.d(x + h) - self.d(x - h)) / (2.0 * h)

    def nu(self, x: float) -> float:
        """Windowed asymmetry d(x) * int_0^{sqrt2 d} (q(x+t) - q(x-t)) dt.

        Computed as d * (right window mass - left window mass), which is
        the same integral after swapping integration order.
        """
        dx = self.d(x)
        half = _SQRT2 * dx
        right = integrate(
            self.q, x, x + half, self.quad, breakpoints=self._window_breaks(x, x + half)
        ).require()
        left = integrate(
            self.q, x - half, x, self.quad, breakpoints=self._window_breaks(x - half, x)
        ).require()
        return dx * (right - left)

    def export_profile(self, xs: Sequence[float]) -> list[dict]:
        """Deterministic profile rows (x, d, d_hat, q_star, nu), in x order."""
        rows = []
        for x in xs:
            x = float(x)
            rows.append(
                {
                    "x": x,
                    "d": self.d(x),
                    "d_hat": self.d_hat(x),
                    "q_star": self.q_star(x),
                    "nu": self.nu(x),
                }
            )
        return rows


# ---------------------------------------------------------------------------
# vanishing-asymmetry class and two-term asymptotics


def class_H_check(
    scale: LocalScale,
    radii: Optional[Sequence[float]] = None,
    tol: float = 0.05,
    trend_window: int = 4,
) -> GradedCheck:
    """Grade whether the asymmetry measure nu vanishes at infinity.

    Probes nu at +-R over doubling radii.  Pass when the running max
    over the outermost ``trend_window`` radii is below ``tol``; fail
    when that max sits above tol without decaying; inconclusive when it
    is still visibly decaying but has not yet dipped below tol.
    """
    if radii is None:
        radii = [float(2**j) for j in range(0, 21)]
    maxima = []
    for r in radii:
        m = max(abs(scale.nu(r)), abs(scale.nu(-r)))
        maxima.append(m)
    w = min(trend_window, len(maxima))
    tail = maxima[-w:]
    tail_max = max(tail)
    detail = {
        "radii": [float(r) for r in radii],
        "max_abs_nu_per_radius": maxima,
        "tail_max": tail_max,
        "tol": tol,
    }
    statement = (
        "asymmetry nu(x) decays to below "
        f"{tol} over the outermost probed radii (vanishing-asymmetry class)"
    )
    if tail_max <= tol:
        return GradedCheck("class_H", PASS, statement, detail)
    decaying = maxima[-1] <= 0.7 * max(maxima[-w], 1e-300)
    if not decaying:
        return GradedCheck("class_H", FAIL, statement, detail)
    return GradedCheck("class_H", INCONCLUSIVE_GRADE, statement, detail)


@dataclass
class AsymptoticDecomposition:
    """Split q = q1 + q2 with smooth positive q1 carrying the growth.

    q1 must be strictly positive with a usable first derivative (parsed
    expressions differentiate symbolically).  The split quality is the
    caller's responsibility; ``validate`` spot-checks consistency.
    """

    q1: RealFunction
    q2: RealFunction
    _q1_prime: Optional[RealFunction] = field(default=None, repr=False)

    @property
    def q1_prime(self) -> RealFunction:
        if self._q1_prime is None:
            self._q1_prime = self.q1.derivative()
        return self._q1_prime

    def A_halfwidth(self, x: float) -> float:
        """Probe half-width 2 / sqrt(q1(x)) for the smallness functionals."""
        return 2.0 / math.sqrt(float(self.q1(x)))

    def validate(self, q: RealFunction, probes: Sequence[float], tol: float = 1e-9) -> bool:
        xs = np.asarray(probes, dtype=float)
        total = np.asarray(self.q1(xs)) + np.asarray(self.q2(xs))
        ref = np.asarray(q(xs))
        if not np.all(np.asarray(self.q1(xs)) > 0):
            return False
        return bool(np.all(np.abs(total - ref) <= tol * (1.0 + np.abs(ref))))


def _stable_sup(eval_batch, halfwidth: float, n0: int = 257, rel_change: float = 0.01):
    """Max of a nonnegative sampler over [0, halfwidth], refined by doubling."""
    n = n0
    prev = None
    while True:
        ts = np.linspace(0.0, halfwidth, n)
        cur = float(np.max(eval_batch(ts)))
        if prev is not None and abs(cur - prev) <= rel_change * max(cur, 1e-300):
            return cur
        prev = cur
        n = 2 * n - 1
        if n > 10000:
            return cur


def kappa1(x: float, decomp: AsymptoticDecomposition, quad: Optional[QuadratureConfig] = None) -> float:
    """Curvature smallness q1(x)^{-3/2} sup_t |int_{x-t}^{x+t} q1''|.

    The inner integral collapses exactly to q1'(x+t) - q1'(x-t), so only
    the first derivative is sampled; the sup over t in [0, 2/sqrt(q1)]
    is taken on a doubling grid until stable to 1 percent.
    """
    q1p = decomp.q1_prime
    half = decomp.A_halfwidth(x)

    def batch(ts):
        return np.abs(np.asarray(q1p(x + ts)) - np.asarray(q1p(x - ts)))

    sup = _stable_sup(batch, half)
    return float(decomp.q1(x)) ** (-1.5) * sup


def kappa2(x: float, decomp: AsymptoticDecomposition, quad: Optional[QuadratureConfig] = None) -> float:
    """Remainder smallness q1(x)^{-1/2} sup_t |int_{x-t}^{x+t} q2|.

    Window integrals honor any declared support of q2 (windows that
    miss the support contribute exactly zero).
    """
    quad = quad or QuadratureConfig()
    half = decomp.A_halfwidth(x)
    q2 = decomp.q2
    sup_interval = getattr(q2, "support", None)
    kinks = getattr(q2, "kinks", ()) or ()

    def window_abs(t: float) -> float:
        lo, hi = x - t, x + t
        if sup_interval is not None:
            lo, hi = max(lo, sup_interval[0]), min(hi, sup_interval[1])
            if lo >= hi:
                return 0.0
        breaks = [k for k in kinks if lo < k < hi]
        return abs(integrate(q2, lo, hi, quad, breakpoints=breaks).require())

    def batch(ts):
        return np.array([window_abs(float(t)) for t in ts])

    # window integrals are costlier than point samples; a coarser start
    sup = _stable_sup(batch, half, n0=65)
    return float(decomp.q1(x)) ** (-0.5) * sup


def asymptotic_d_check(
    scale: LocalScale,
    decomp: AsymptoticDecomposition,
    probes: Sequence[float],
    slack: float = 0.02,
    applicable_bound: float = 0.25,
) -> GradedCheck:
    """Compare d * sqrt(q1) against 1 with the two-term error budget.

    At each probe the deviation |d sqrt(q1) - 1| must fit within
    2 (kappa1 + kappa2) + slack whenever that budget is small enough to
    be meaningful (below ``applicable_bound``); probes with a larger
    budget are reported but not graded.
    """
    rows = []
    violations = 0
    graded = 0
    for x in probes:
        x = float(x)
        k1 = kappa1(x, decomp, scale.quad)
        k2 = kappa2(x, decomp, scale.quad)
        product = scale.d(x) * math.sqrt(float(decomp.q1(x)))
        eps = abs(product - 1.0)
        budget = 2.0 * (k1 + k2)
        applicable = budget <= applicable_bound
        ok = (eps <= budget + slack) if applicable else None
        if applicable:
            graded += 1
            if not ok:
                violations += 1
        rows.append(
            {
                "x": x,
                "d_sqrt_q1": product,
                "eps": eps,
                "kappa1": k1,
                "kappa2": k2,
                "budget": budget,
                "graded": applicable,
                "ok": ok,
            }
        )
    detail = {"rows": rows, "graded_probes": graded, "violations": violations}
    statement = (
        "d(x) sqrt(q1(x)) stays within 2 (kappa1 + kappa2) + slack of 1 "
        "wherever the smallness budget applies"
    )
    if graded == 0:
        return GradedCheck("asymptotic_d", INCONCLUSIVE_GRADE, statement, detail)
    status = PASS if violations == 0 else FAIL
    return GradedCheck("asymptotic_d", status, statement, detail)
