"""Decision pipeline: is a weighted pair of Lebesgue spaces admissible
for the second-order equation -y'' + q y = f on the line?

Every stage returns a three-valued grade (pass / fail / inconclusive)
because each underlying condition is a limit or a supremum over the
whole line, which a numerical run can indicate but never prove.  The
final verdict is assembled from the stage grades and always carries the
suffix "-indicated".

Two decision routes exist.  For constant weights the question reduces
to plain L_p correct solvability, decided by the trend of the averaged
local scale together with the window-mass infimum; the two criteria are
provably equivalent, so their disagreement is treated as a defect trap
and yields a hard inconclusive with a diagnostic dump.  For genuinely
varying weights the decision goes through the certificate: weight-mass
divergence, the vanishing-asymmetry class of q, weight agreement with
the local scale, and finally the finiteness trend of
sup (mu/theta) d^2, which is equivalent to admissibility when the
prerequisites hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import EvalDomainError, RealFunction, from_callable, parse_function
from .fss import FundamentalSystem, apply_green, build_fss
from .grading import FAIL, INCONCLUSIVE_GRADE, PASS, GradedCheck
from .hardy import HardyWeights, NormBound, s_operator_bounds
from .localscale import LocalScale, class_H_check
from .numerics import (
    BOUNDED,
    CONVERGED,
    DIVERGENT,
    GROWING,
    QuadratureConfig,
    SupReport,
    inf_on_expanding_grid,
    integrate,
    integrate_improper,
    sup_on_expanding_grid,
)

__all__ = [
    "ProblemSpec",
    "AdmissibilityReport",
    "check_21",
    "check_42",
    "q0",
    "lp_solvability",
    "agreement_check",
    "m_certificate",
    "m0_certificate",
    "verdict",
    "special_pair_qstar",
    "special_pair_theta",
    "stability_probe",
    "make_test_sources",
]

VERDICT_ADMISSIBLE = "admissible-indicated"
VERDICT_NOT_ADMISSIBLE = "not-admissible-indicated"
VERDICT_INCONCLUSIVE = "inconclusive"

_DEFAULT_RADII = tuple(float(2**j) for j in range(0, 21))


@dataclass
class ProblemSpec:
    """One complete problem instance: potential, weight pair, exponent.

    q may optionally be split as q = q1 + q2 into a smooth part and a
    small or oscillatory remainder, which the asymptotic local-scale
    checks consume.  osc_freq, when given, tells the grid builder the
    local oscillation frequency of q so cells resolve it.
    """

    q: RealFunction
    mu: RealFunction
    theta: RealFunction
    p: float = 2.0
    q1: Optional[RealFunction] = None
    q2: Optional[RealFunction] = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    osc_freq: Optional[Callable] = None
    box_halfwidth: Optional[float] = None
    grid_points: int = 4096
    note: str = ""

    def weights(self) -> HardyWeights:
        return HardyWeights(mu=self.mu, theta=self.theta, p=self.p)


@dataclass
class AdmissibilityReport:
    """Everything the pipeline measured, plus the graded verdict.

    provenance holds one (field, check id, plain-words statement) triple
    per decision-relevant entry, so a reader can trace which measured
    quantity justified which part of the verdict.
    """

    verdict: str
    route: str
    cond_21: GradedCheck
    cond_42: Optional[GradedCheck] = None
    q0_profile: dict = field(default_factory=dict)
    d_hat_trend: Optional[str] = None
    lp_solvable: Optional[GradedCheck] = None
    in_H: Optional[GradedCheck] = None
    agreement: dict = field(default_factory=dict)
    m_value: Optional[float] = None
    m_trend: Optional[str] = None
    m0_value: Optional[float] = None
    s_bounds: Optional[NormBound] = None
    provenance: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {VERDICT_ADMISSIBLE: 0, VERDICT_NOT_ADMISSIBLE: 1}.get(self.verdict, 2)


# ---------------------------------------------------------------------------
# preconditions on q and mu

_ZERO_TAIL_SCALE = 8  # windows vanishing from 2^8 on count as truncation


def check_21(q: RealFunction, cfg: Optional[QuadratureConfig] = None) -> GradedCheck:
    """Positive mass of q on every half-line, probed by dyadic windows.

    For a nonnegative q the condition fails only when q vanishes
    identically beyond some point.  Window masses over [2^k, 2^{k+1}]
    (and mirrored) are scanned; exact zeros starting at a moderate scale
    grade fail, zeros appearing only beyond 2^{_ZERO_TAIL_SCALE} after
    positive windows are read as underflow of a decaying tail and grade
    pass, and all-zero windows grade inconclusive, since a mass too
    small for double precision cannot be told from an actual zero.
    Declared bounded support short-circuits to fail.
    """
    cfg = cfg or QuadratureConfig()
    sup = getattr(q, "support", None)
    if sup is not None and (math.isfinite(sup[0]) or math.isfinite(sup[1])):
        side = "left" if math.isfinite(sup[0]) else "right"
        return GradedCheck(
            "tail-mass-positivity", FAIL,
            f"q has declared bounded support on the {side}; "
            "its half-line masses vanish beyond it",
        )

    def q_safe(t):
        try:
            return np.asarray(q(t), dtype=float)
        except EvalDomainError:
            return np.full(np.shape(t), 1e300) if np.ndim(t) else 1e300

    kinks = tuple(getattr(q, "kinks", ()) or ())
    grades = {}
    for label, sign in (("left", -1.0), ("right", 1.0)):
        masses = []
        lo, hi = 0.0, 1.0
        for _ in range(21):
            a, b = sorted((sign * lo, sign * hi))
            bs = tuple(t for t in kinks if a < t < b)
            masses.append(max(integrate(q_safe, a, b, cfg, breakpoints=bs).value, 0.0))
            lo, hi = hi, 2.0 * hi
        positive = [k for k, m in enumerate(masses) if m > 0.0]
        if not positive:
            grades[label] = (INCONCLUSIVE_GRADE, "all probed windows are numerically zero")
        elif positive[-1] >= _ZERO_TAIL_SCALE or positive[-1] == len(masses) - 1:
            grades[label] = (PASS, f"window mass positive through scale 2^{positive[-1]}")
        else:
            grades[label] = (
                FAIL,
                f"window masses vanish from scale 2^{positive[-1] + 1} on "
                "while earlier windows are well above underflow",
            )

    statuses = {g[0] for g in grades.values()}
    status = FAIL if FAIL in statuses else (
        INCONCLUSIVE_GRADE if INCONCLUSIVE_GRADE in statuses else PASS)
    statement = "; ".join(f"{side}: {msg}" for side, (_, msg) in grades.items())
    return GradedCheck("tail-mass-positivity", status, statement,
                       detail={s: g[0] for s, g in grades.items()})


def check_42(mu: RealFunction, cfg: Optional[QuadratureConfig] = None) -> GradedCheck:
    """Both improper integrals of the target weight graded divergent."""
    cfg = cfg or QuadratureConfig()
    verdicts = {}
    for side in ("left", "right"):
        r = integrate_improper(mu, side=side, cfg=cfg, anchor=0.0)
        verdicts[side] = r.verdict
    if all(v == DIVERGENT for v in verdicts.values()):
        status, msg = PASS, "the weight mass diverges on both half-lines"
    elif any(v == CONVERGED for v in verdicts.values()):
        conv = [s for s, v in verdicts.items() if v == CONVERGED]
        status, msg = FAIL, f"the weight mass converges on the {' and '.join(conv)}"
    else:
        status, msg = INCONCLUSIVE_GRADE, f"tail verdicts: {verdicts}"
    return GradedCheck("weight-mass-divergence", status, msg, detail=dict(verdicts))


# ---------------------------------------------------------------------------
# plain L_p solvability: two equivalent criteria, cross-checked


def _window_mass_fn(q: RealFunction, a: float, cfg: QuadratureConfig):
    breaks = tuple(getattr(q, "kinks", ()) or ())

    def g(x: float) -> float:
        bs = tuple(t for t in breaks if x - a < t < x + a)
        try:
            return max(integrate(q, x - a, x + a, cfg, breakpoints=bs).value, 0.0)
        except EvalDomainError:
            return 1e300

    return g


def q0(a: float, q: RealFunction, cfg: Optional[QuadratureConfig] = None,
       radii: Sequence[float] = _DEFAULT_RADII) -> float:
    """Infimum over the line (expanding probe grid) of the mass of q in
    the window of half-width a."""
    if not a > 0:
        raise ValueError("window half-width a must be positive")
    cfg = cfg or QuadratureConfig()
    rep = inf_on_expanding_grid(_window_mass_fn(q, a, cfg), radii=radii, per_level=8)
    return rep.estimate


def _grade_inf_positive(rep: SupReport) -> str:
    """positive | vanishing | undecided for a running-infimum report."""
    m = rep.level_maxima
    w = min(4, len(m) - 1)
    last, old = m[-1], m[-1 - w]
    if last > 0.0 and last >= 0.7 * old:
        return "positive"
    if last <= 0.0 or (old > 0.0 and last <= 0.25 * old):
        return "vanishing"
    return "undecided"


def lp_solvability(
    q: RealFunction,
    cfg: Optional[QuadratureConfig] = None,
    scale: Optional[LocalScale] = None,
    radii: Sequence[float] = _DEFAULT_RADII,
) -> GradedCheck:
    """Correct solvability of the unweighted L_p problem, decided twice.

    Criterion one: the running supremum of the averaged local scale over
    expanding probes stays bounded.  Criterion two: for some window
    half-width a in {1, 2, 4} the window-mass infimum stays positive.
    The two are equivalent in exact arithmetic, so any disagreement is
    graded hard-inconclusive and the full diagnostics are attached:
    a disagreement means a defect in this package, not a property of q.
    """
    cfg = cfg or QuadratureConfig()
    scale = scale or LocalScale(q)

    dhat_rep = sup_on_expanding_grid(scale.d_hat, radii=radii, per_level=8)
    via_scale = {BOUNDED: "solvable", GROWING: "unsolvable"}.get(dhat_rep.trend, "undecided")

    q0_reports = {a: inf_on_expanding_grid(_window_mass_fn(q, a, cfg), radii=radii, per_level=8)
                  for a in (1.0, 2.0, 4.0)}
    q0_grades = {a: _grade_inf_positive(rep) for a, rep in q0_reports.items()}
    if any(g == "positive" for g in q0_grades.values()):
        via_mass = "solvable"
    elif all(g == "vanishing" for g in q0_grades.values()):
        via_mass = "unsolvable"
    else:
        via_mass = "undecided"

    detail = {
        "d_hat_trend": dhat_rep.trend,
        "d_hat_sup": dhat_rep.estimate,
        "d_hat_levels": dhat_rep.level_maxima,
        "q0_values": {a: rep.estimate for a, rep in q0_reports.items()},
        "q0_grades": q0_grades,
        "q0_levels": {a: rep.level_maxima for a, rep in q0_reports.items()},
    }
    if via_scale == "solvable" and via_mass == "solvable":
        return GradedCheck(
            "lp-solvability", PASS,
            f"averaged scale bounded (sup {dhat_rep.estimate:.6g}) and some "
            "window-mass infimum stays positive", detail=detail)
    if via_scale == "unsolvable" and via_mass == "unsolvable":
        return GradedCheck(
            "lp-solvability", FAIL,
            "averaged scale grows without bound and every probed window-mass "
            "infimum slides to zero", detail=detail)
    if "undecided" not in (via_scale, via_mass):
        detail["disagreement"] = {"via_scale": via_scale, "via_mass": via_mass}
        return GradedCheck(
            "lp-solvability", INCONCLUSIVE_GRADE,
            "the two solvability criteria disagree, which they must not; "
            "treating the run as unreliable and dumping both level tables",
            detail=detail)
    return GradedCheck(
        "lp-solvability", INCONCLUSIVE_GRADE,
        f"criteria not settled (scale route: {via_scale}, mass route: {via_mass})",
        detail=detail)


# ---------------------------------------------------------------------------
# certificate-route prerequisites


def _level_maxima(f: Callable[[float], float], radii: Sequence[float],
                  per_level: int = 6) -> list:
    """Per-level (not running) maxima of f over the symmetric dyadic probe
    ladder; level 0 also probes the origin."""
    out = []
    prev = 0.0
    for j, r in enumerate(radii):
        lo = max(prev, 1e-3 * r)
        pts = np.linspace(lo, r, per_level + 1)[1:]
        xs = np.concatenate([-pts[::-1], [0.0] if j == 0 else [], pts])
        out.append(max(float(f(float(x))) for x in xs))
        prev = r
    return out


def agreement_check(
    w: HardyWeights,
    scale: LocalScale,
    cfg: Optional[QuadratureConfig] = None,
    radii: Sequence[float] = _DEFAULT_RADII,
    tol: float = 0.05,
) -> dict:
    """Each weight's logarithmic derivative times the local scale must
    decay to zero along the line; graded per weight.

    The condition for the source weight theta is the target-weight
    condition applied to 1/theta, whose logarithmic derivative is the
    negative, so the same |theta'/theta| d quantity is scanned.
    """
    out = {}
    for name, fn in (("mu", w.mu), ("theta", w.theta)):
        dfn = fn.derivative()

        def ratio(x: float) -> float:
            g = float(fn(x))
            if g == 0.0:
                return math.inf
            return abs(float(dfn(x)) / g) * scale.d(x)

        levels = _level_maxima(ratio, radii)
        wnd = min(4, len(levels) - 1)
        last, old = levels[-1], levels[-1 - wnd]
        if last <= tol:
            status = PASS
            msg = f"|{name}'/{name}| d down to {last:.3g} at the farthest probes"
        elif old > 0 and last >= 0.7 * old:
            status = FAIL
            msg = f"|{name}'/{name}| d is not decaying (stuck near {last:.3g})"
        else:
            status = INCONCLUSIVE_GRADE
            msg = f"|{name}'/{name}| d still {last:.3g}, trend not settled"
        out[name] = GradedCheck(f"scale-agreement-{name}", status, msg,
                                detail={"levels": levels, "tol": tol})
    return out


def m_certificate(
    w: HardyWeights,
    scale: LocalScale,
    cfg: Optional[QuadratureConfig] = None,
    radii: Sequence[float] = _DEFAULT_RADII,
) -> SupReport:
    """Expanding-grid supremum of (mu/theta) d^2 with its trend grade.

    A bounded trend indicates the certificate is finite (admissibility
    under the prerequisites); a growing trend indicates it is infinite.
    """

    def quantity(x: float) -> float:
        d = scale.d(x)
        return float(w.mu(x)) / float(w.theta(x)) * d * d

    return sup_on_expanding_grid(quantity, radii=radii, per_level=8, refine=True)


def m0_certificate(
    theta: RealFunction,
    scale: LocalScale,
    radii: Sequence[float] = _DEFAULT_RADII,
) -> SupReport:
    """Expanding-grid infimum of q* theta (the floor quantity of the
    distinguished source-weight pair)."""

    def quantity(x: float) -> float:
        return scale.q_star(x) * float(theta(x))

    return inf_on_expanding_grid(quantity, radii=radii, per_level=8)


# ---------------------------------------------------------------------------
# verdict assembly


def _weights_constant(w: HardyWeights) -> bool:
    probes = (0.0, 0.5, -1.0, 3.7, -9.2, 40.0, -173.0, 1024.0)
    try:
        mu0, th0 = float(w.mu(0.0)), float(w.theta(0.0))
        for x in probes:
            if abs(float(w.mu(x)) - mu0) > 1e-12 * (1.0 + abs(mu0)):
                return False
            if abs(float(w.theta(x)) - th0) > 1e-12 * (1.0 + abs(th0)):
                return False
    except EvalDomainError:
        return False
    return True


def verdict(
    q: RealFunction,
    w: HardyWeights,
    cfg: Optional[QuadratureConfig] = None,
    *,
    scale: Optional[LocalScale] = None,
    fs: Optional[FundamentalSystem] = None,
    osc_freq: Optional[Callable] = None,
    box_halfwidth: Optional[float] = None,
    grid_points: int = 4096,
    radii: Sequence[float] = _DEFAULT_RADII,
    compute_s_bounds: bool = True,
) -> AdmissibilityReport:
    """Run the full pipeline and assemble the graded verdict.

    Constant weights are decided by the plain-solvability route; varying
    weights by the certificate route.  All stages run either way and are
    reported, so the report is the same shape on both routes; only the
    decision rule differs.  The verdict is admissible-indicated only
    when every prerequisite of the active route graded pass.
    """
    cfg = cfg or QuadratureConfig()
    scale = scale or LocalScale(q)
    w.check_positive((-7.0, -1.0, 0.0, 1.0, 7.0))
    prov = []

    c21 = check_21(q, cfg)
    prov.append(("cond_21", c21.name, c21.statement))
    if c21.status != PASS:
        vd = VERDICT_NOT_ADMISSIBLE if c21.status == FAIL else VERDICT_INCONCLUSIVE
        return AdmissibilityReport(
            verdict=vd, route="precondition", cond_21=c21, provenance=prov,
            detail={"failed_stage": "cond_21"})

    lp = lp_solvability(q, cfg, scale, radii)
    prov.append(("lp_solvable", lp.name, lp.statement))
    c42 = check_42(w.mu, cfg)
    prov.append(("cond_42", c42.name, c42.statement))
    in_h = class_H_check(scale, radii=radii)
    prov.append(("in_H", in_h.name, in_h.statement))
    agr = agreement_check(w, scale, cfg, radii)
    for nm, gc in agr.items():
        prov.append((f"agreement.{nm}", gc.name, gc.statement))
    mrep = m_certificate(w, scale, cfg, radii)
    prov.append(("m_value", "certificate-sup",
                 f"sup (mu/theta) d^2 graded {mrep.trend} at {mrep.estimate:.6g}"))
    m0rep = m0_certificate(w.theta, scale, radii)
    m0_grade = _grade_inf_positive(m0rep)
    prov.append(("m0_value", "floor-inf",
                 f"inf q* theta graded {m0_grade} at {m0rep.estimate:.6g}"))

    s_bounds = None
    if compute_s_bounds:
        try:
            fs = fs or build_fss(
                q,
                X=box_halfwidth or max(25.0, 12.0 * scale.d(0.0)),
                n=grid_points,
                scale=scale,
                osc_freq=osc_freq,
            )
            s_bounds = s_operator_bounds(fs, w, cfg)
            prov.append(("s_bounds", s_bounds.method,
                         f"solution-map norm within [{s_bounds.lower:.6g}, "
                         f"{s_bounds.upper:.6g}] ({s_bounds.trend})"))
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            prov.append(("s_bounds", "norm-bounds-unavailable", str(exc)))

    m_value = None
    if mrep.trend == BOUNDED:
        m_value = mrep.estimate
    elif mrep.trend == GROWING:
        m_value = math.inf
    # the trend grade of the negated sup scan is meaningless for an
    # infimum of a positive quantity, so grade the level minima directly
    m0_value = {"positive": m0rep.estimate, "vanishing": 0.0}.get(m0_grade)

    report = AdmissibilityReport(
        verdict=VERDICT_INCONCLUSIVE,
        route="",
        cond_21=c21,
        cond_42=c42,
        q0_profile=dict(lp.detail.get("q0_values", {})),
        d_hat_trend={BOUNDED: "finite-indicated", GROWING: "growing"}.get(
            lp.detail.get("d_hat_trend"), "undecided"),
        lp_solvable=lp,
        in_H=in_h,
        agreement=agr,
        m_value=m_value,
        m_trend=mrep.trend,
        m0_value=m0_value,
        s_bounds=s_bounds,
        provenance=prov,
        detail={"m_levels": mrep.level_maxima, "m_argmax": mrep.argmax},
    )

    if _weights_constant(w):
        report.route = "plain-solvability"
        if lp.status == PASS:
            report.verdict = VERDICT_ADMISSIBLE
        elif lp.status == FAIL:
            report.verdict = VERDICT_NOT_ADMISSIBLE
        else:
            report.detail["failed_stage"] = "lp_solvable"
        prov.append(("verdict", "route-plain",
                     "constant weights reduce the question to plain correct "
                     "solvability; verdict follows that grade"))
        return report

    report.route = "certificate"
    prereqs = {"cond_42": c42, "in_H": in_h,
               "agreement.mu": agr["mu"], "agreement.theta": agr["theta"]}
    bad = {k: gc.status for k, gc in prereqs.items() if gc.status != PASS}
    if bad:
        report.detail["failed_stage"] = ", ".join(sorted(bad))
        prov.append(("verdict", "route-certificate",
                     "certificate prerequisites not established "
                     f"({report.detail['failed_stage']}); the finiteness test "
                     "is not decisive without them"))
        return report

    if mrep.trend == BOUNDED:
        report.verdict = VERDICT_ADMISSIBLE
        prov.append(("verdict", "route-certificate",
                     "all prerequisites hold and the certificate supremum is "
                     "bounded, which indicates admissibility"))
    elif mrep.trend == GROWING:
        report.verdict = VERDICT_NOT_ADMISSIBLE
        prov.append(("verdict", "route-certificate",
                     "all prerequisites hold and the certificate supremum "
                     "grows without bound, which indicates the pair is not "
                     "admissible"))
    else:
        report.detail["failed_stage"] = "m_certificate"
        prov.append(("verdict", "route-certificate",
                     "certificate trend undecided within the probe budget"))
    return report


# ---------------------------------------------------------------------------
# distinguished pairs


def _vectorized(fn: Callable[[float], float]):
    def wrapped(x):
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 0:
            return fn(float(xs))
        return np.array([fn(float(t)) for t in xs.reshape(-1)]).reshape(xs.shape)

    return wrapped


def special_pair_qstar(
    q: RealFunction,
    p: float = 2.0,
    scale: Optional[LocalScale] = None,
    cfg: Optional[QuadratureConfig] = None,
    radii: Sequence[float] = _DEFAULT_RADII,
) -> ProblemSpec:
    """The distinguished pair with target weight q* = 1/d^2 and unit
    source weight, for potentials whose local scale grows.

    Preconditions (each must grade): q in the vanishing-asymmetry class,
    the local scale unbounded, and the integral of q* divergent on both
    sides.  A potential with bounded scale is rejected: there the plain
    pair already works and this construction is pointless.
    """
    cfg = cfg or QuadratureConfig()
    scale = scale or LocalScale(q)

    in_h = class_H_check(scale, radii=radii)
    if in_h.status != PASS:
        raise ValueError(f"vanishing-asymmetry precondition not established: {in_h.statement}")
    drep = sup_on_expanding_grid(scale.d, radii=radii, per_level=8)
    if drep.trend != GROWING:
        raise ValueError(
            "the local scale does not grow (trend "
            f"{drep.trend}, sup {drep.estimate:.6g}); the distinguished pair "
            "needs an unbounded scale")
    qstar = from_callable(_vectorized(scale.q_star), "q_star",
                          positivity="strictly-positive")
    for side in ("left", "right"):
        r = integrate_improper(qstar, side=side, cfg=cfg, anchor=0.0)
        if r.verdict != DIVERGENT:
            raise ValueError(
                f"integral of q* on the {side} half-line graded {r.verdict}; "
                "divergence on both sides is required")
    return ProblemSpec(
        q=q, mu=qstar, theta=parse_function("1", positivity="strictly-positive"),
        p=p, note="distinguished pair: target weight q*, unit source weight")


def special_pair_theta(
    q: RealFunction,
    theta: RealFunction,
    p: float = 2.0,
    scale: Optional[LocalScale] = None,
    radii: Sequence[float] = _DEFAULT_RADII,
) -> ProblemSpec:
    """The distinguished pair with target weight 1/d against a given
    source weight theta, valid when inf q* theta stays positive.

    The target space is the d-scaled Lebesgue space: its norm is the
    plain p-norm of y/d, which is why the weight is 1/d.
    """
    scale = scale or LocalScale(q)
    m0rep = m0_certificate(theta, scale, radii)
    grade = _grade_inf_positive(m0rep)
    if grade != "positive":
        raise ValueError(
            f"inf q* theta graded {grade} (last level {m0rep.level_maxima[-1]:.3g}); "
            "a positive floor is required")
    inv_d = from_callable(_vectorized(lambda x: 1.0 / scale.d(x)), "1/d",
                          positivity="strictly-positive")
    return ProblemSpec(
        q=q, mu=inv_d, theta=theta, p=p,
        note="distinguished pair: scale-normalized target, given source weight")


# ---------------------------------------------------------------------------
# stability probe


def make_test_sources(seed: int, count: int, halfwidth: float) -> list:
    """Seeded source terms for stability probing: smooth bumps,
    oscillatory packets, and truncated slowly-decaying profiles, all
    with declared compact support inside |t| <= halfwidth."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        kind = k % 3
        c = float(rng.uniform(-0.4, 0.4) * halfwidth)
        wdt = float(halfwidth * 10.0 ** rng.uniform(-2.0, -0.7))
        amp = float(rng.uniform(0.5, 2.0))
        r = float(rng.uniform(0.5, 0.9) * halfwidth)
        if kind == 0:
            def fn(t, c=c, w=wdt, a=amp):
                t = np.asarray(t, dtype=float)
                return a * np.exp(-(((t - c) / w) ** 2))
            lab = f"bump(center={c:.3g}, width={wdt:.3g})"
        elif kind == 1:
            om = float(rng.uniform(1.0, 8.0) / wdt)
            def fn(t, c=c, w=wdt, a=amp, om=om):
                t = np.asarray(t, dtype=float)
                return a * np.exp(-(((t - c) / w) ** 2)) * np.cos(om * (t - c))
            lab = f"packet(center={c:.3g}, freq={om:.3g})"
        else:
            alpha = float(rng.uniform(0.6, 1.5))
            def fn(t, r=r, a=amp, al=alpha):
                t = np.asarray(t, dtype=float)
                body = a / (1.0 + np.abs(t)) ** al
                return np.where(np.abs(t) <= r, body, 0.0)
            lab = f"truncated-tail(alpha={alpha:.3g}, cut={r:.3g})"
        support = (-r, r) if kind == 2 else (c - 9.0 * wdt, c + 9.0 * wdt)
        out.append(from_callable(fn, lab, support=support))
    return out


def stability_probe(
    spec: ProblemSpec,
    f_samples: Sequence[RealFunction],
    fs: Optional[FundamentalSystem] = None,
) -> dict:
    """Push each sample source through the solution map and record the
    weighted norm ratio; the maximum must sit below the upper norm bound.

    Samples outside the weighted source space (divergent norm) are
    skipped with a note rather than failing the probe.
    """
    if fs is None:
        scale = LocalScale(spec.q)
        fs = build_fss(
            spec.q,
            X=spec.box_halfwidth or max(25.0, 12.0 * scale.d(0.0)),
            n=spec.grid_points,
            scale=scale,
            osc_freq=spec.osc_freq,
        )
    ratios = []
    skipped = []
    for i, f in enumerate(f_samples):
        label = getattr(f, "expr_text", f"sample {i}")
        try:
            sol = apply_green(fs, f, p=spec.p, mu=spec.mu, theta=spec.theta,
                              quad=spec.quad)
        except ValueError as exc:
            skipped.append({"sample": label, "reason": str(exc)})
            continue
        if sol.norms["f_p_theta"] == 0.0:
            skipped.append({"sample": label, "reason": "identically zero source"})
            continue
        ratios.append({"sample": label, "ratio": sol.norms["ratio"]})
    max_ratio = max((r["ratio"] for r in ratios), default=0.0)
    return {"max_ratio": max_ratio, "ratios": ratios, "skipped": skipped}
