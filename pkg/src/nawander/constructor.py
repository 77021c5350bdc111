"""Execute the construction at finite depth and emit replayable certificates.

The depth-1 witness is built backward, mirroring the existence proof: pull
the target 1 back to the unit preimage w1 on S_{1/2}(c1), pull w1 back
through the three-step critical cycles to a point p on the rho_{m1} sphere
(each cycle crosses the critical fold once, which is where the tower picks
up its quadratic layers), then pull p back through the expanding range to
the witness x beside the auxiliary point y over 1.  Root selection inside
each proof-specified sphere disambiguates the quadratics; on the fold
spheres both preimages are valid for the construction and the tie is
broken canonically toward the positive discriminant branch.

Parameter refinement solves the parameter equation
Phi_x^{I_k + n_{k+1} + 1}(beta) = c1 on the sphere
|beta - b_k| = 1/(2^{n_{k+1}} sqrt 2) with verified Newton steps, then
places b_{k+1} on the sphere of radius rho_{m_{k+1}}/2^{n_{k+1}} about the
solution; the later checkpoints ride the sphere-to-sphere transport and
are re-verified by replaying the orbit.  An exact strict solve at the
deepest level would drag the working field through another cascade of
fold extensions, so depth is capped and the certificate records each
level's strictness residual as achieved.

Certificates are JSON dicts; verify_certificate rebuilds the tower from
its recorded layers and replays every exponent, region tag, membership
and residual without trusting any stored pass/fail flag.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import List, Optional, Tuple

from .valgroup import ValExp, rho_exponent
from .qifield import GaussianRational
from .geometry import Region, ZData, classify, PSI_SPHERE, GAMMA_SPHERE, \
    NEAR_ONE, EXPANDING
from .dynamics import FamilyParams, example_params, critical_points, \
    orbit as exact_orbit, region_context
from .planner import Plan, default_plan, itinerary_pattern, \
    radius_trace_report
from .mapping import replay_phi, critical_ball_image, image_disk
from .tower import Tower, TowerElement, make_tower, solve_quadratic, \
    sqrt_descend, SolveError, PrecisionError

logger = logging.getLogger(__name__)

SCHEMA = "nawander-certificate/1"

_C1 = GaussianRational(1, 1)
_C2 = GaussianRational(Fraction(3, 5), Fraction(-1, 5))


class BuildError(RuntimeError):
    pass


# -- family arithmetic over a tower ------------------------------------------------


class TowerFamily:
    """The map R_b over a tower, with b exact or a tower element."""

    def __init__(self, field: Tower, a: GaussianRational, b):
        self.field = field
        self.a = a
        self.inv_a = a.inverse()
        self.b = b if isinstance(b, TowerElement) else field.embed(b)
        self.refresh()

    def refresh(self):
        """Re-embed cached constants after the tower grew."""
        field = self.field
        self.b = field.lift_element(self.b)
        self.one = field.one()
        self.c1 = field.embed(_C1)
        self.c2 = field.embed(_C2)
        self.inv_a_el = field.embed(self.inv_a)
        self.pole = (self.b * field.embed(self.a)).inverse()

    def eval(self, z: TowerElement) -> TowerElement:
        den = self.b * z - self.inv_a_el
        return (z * z - z) * den.inverse()

    def pullback(self, target: TowerElement, allow_extend: bool = False):
        """Both preimages of target: roots of z^2 - (1 + b t) z + t/a."""
        B = self.one + self.b * target
        C = target * self.inv_a_el
        return solve_quadratic(self.field, B, C, allow_extend=allow_extend)

    def zdata(self, z: TowerElement, z_minus_1=None) -> ZData:
        one = self.one
        return ZData(
            z=z.val_or_floor(),
            z_minus_1=(z - one).val_or_floor() if z_minus_1 is None else z_minus_1,
            z_minus_c1=(z - self.c1).val_or_floor(),
            z_minus_pole=(z - self.pole).val_or_floor(),
            z_minus_c2=(z - self.c2).val_or_floor(),
        )


def phi_orbit(fam: TowerFamily, x: TowerElement, n_steps: int,
              derivative: bool = False, keep_pairs: bool = False):
    """R_b^N(x) by projective iteration, optionally with d/db R_b^N(x).

    Returns (z_N, dz_N or None, pairs or None); pairs[n] = (X_n, Y_n) with
    R^n(x) = X_n/Y_n.  Renormalization keeps the pair near unit size and
    changes neither the affine values nor the affine derivative.
    """
    field = fam.field
    X, Y = field.lift_element(x), field.one()
    dX = dY = field.zero() if derivative else None
    pairs = [(X, Y)] if keep_pairs else None
    for step in range(n_steps):
        U = X - Y
        V = fam.b * X - fam.inv_a_el * Y
        nX = X * U
        nY = Y * V
        if derivative:
            dU = dX - dY
            dV = X + fam.b * dX - fam.inv_a_el * dY   # d(b)/db = 1
            dX, dY = dX * U + X * dU, dY * V + Y * dV
        X, Y = nX, nY
        try:
            vy = Y.val()
        except PrecisionError as exc:
            raise SolveError(
                f"projective orbit degenerated at step {step}: {exc}")
        if not Fraction(-6) < vy.exponent < Fraction(6):
            mono_inv = field.monomial(-vy.exponent)
            X, Y = X * mono_inv, Y * mono_inv
            if derivative:
                dX, dY = dX * mono_inv, dY * mono_inv
        if keep_pairs:
            pairs.append((X, Y))
    y_inv = Y.inverse()
    z = X * y_inv
    dz = (dX - z * dY) * y_inv if derivative else None
    return z, dz, pairs


def batch_affine(field: Tower, pairs) -> List[TowerElement]:
    """Affine values X_n / Y_n with a single inversion (Montgomery trick)."""
    ys = [p[1] for p in pairs]
    prefix = [ys[0]]
    for y in ys[1:]:
        prefix.append(prefix[-1] * y)
    inv = prefix[-1].inverse()
    out = [None] * len(pairs)
    for n in range(len(pairs) - 1, -1, -1):
        y_inv = inv * prefix[n - 1] if n else inv
        out[n] = pairs[n][0] * y_inv
        inv = inv * ys[n]
    return out


def projective_zdata(fam: TowerFamily, X: TowerElement,
                     Y: TowerElement) -> ZData:
    """Valuation data of z = X/Y without inverting Y."""
    vy = Y.val()

    def rel(el):
        v = el.val_or_floor()
        if v.is_zero:
            return v
        return ValExp(v.exponent - vy.exponent)

    return ZData(
        z=rel(X),
        z_minus_1=rel(X - Y),
        z_minus_c1=rel(X - fam.c1 * Y),
        z_minus_pole=rel(X - fam.pole * Y),
        z_minus_c2=rel(X - fam.c2 * Y),
    )


# -- itinerary verification -----------------------------------------------------------


@dataclass
class CheckpointReport:
    step: int
    expected: str
    observed: Region
    ok: bool
    exponent: str

    def serialize(self):
        return {"step": self.step, "expected": self.expected,
                "observed": self.observed.serialize(), "ok": self.ok,
                "exponent": self.exponent}


def check_itinerary(fam: TowerFamily, x: TowerElement, plan: Plan,
                    depth: int, strict_target: Optional[ValExp] = None,
                    want_trace: bool = False):
    """Replay the orbit and verify the itinerary bullets at `depth`.

    Checkpoints: x and R^{I_depth}(x) in D_{1/sqrt2}(1); R^{I_j+1}(x) on
    Gamma_{n_{j+1}}; R^{I_j+n_{j+1}+1}(x) on Psi_{m_{j+1}}; and region
    agreement with the planned pattern at every intermediate step.
    Returns (ok, reports, affine trace or None, strict residual).
    """
    pattern = itinerary_pattern(plan, depth)
    n_steps = plan.I[depth]
    _, _, pairs = phi_orbit(fam, x, n_steps, keep_pairs=True)
    reports: List[CheckpointReport] = []
    ok = True
    for step, (case, aux) in enumerate(pattern):
        X, Y = pairs[step]
        zd = projective_zdata(fam, X, Y)
        region = classify(zd)
        if case == "psi":
            expected = f"psi:{aux}"
            exp_str = zd.z_minus_c1.serialize()
            good = region.tag == PSI_SPHERE and region.index == aux
        elif case == "small":
            expected = f"small:{aux.serialize()}"
            exp_str = zd.z.serialize()
            want = -(aux.exponent + Fraction(1, 2))
            good = (region.tag == GAMMA_SPHERE and region.index == want
                    and zd.z == aux)
        else:
            expected = f"near_one:{aux.serialize()}"
            exp_str = zd.z_minus_1.serialize()
            if aux.is_zero:
                good = zd.z_minus_1 < ValExp(Fraction(-1, 2))
            else:
                good = zd.z_minus_1 == aux
            good = good and region.tag == NEAR_ONE
        reports.append(CheckpointReport(step=step, expected=expected,
                                        observed=region, ok=bool(good),
                                        exponent=exp_str))
        ok = ok and good
    Xl, Yl = pairs[-1]
    strict_residual = _rel_val(Xl - Yl, Yl)
    if strict_target is not None and not strict_residual <= strict_target:
        ok = False
    trace = batch_affine(fam.field, pairs) if want_trace else None
    return ok, reports, trace, strict_residual


def _rel_val(num: TowerElement, den: TowerElement) -> ValExp:
    v = num.val_or_floor()
    if v.is_zero:
        return v
    return ValExp(v.exponent - den.val().exponent)


# -- finding the strict point ----------------------------------------------------------


def _pick_root(roots, selector, what: str):
    for r in roots:
        if selector(r):
            return r
    raise SolveError(f"no pullback root matches {what}")


def unit_preimages(fam: TowerFamily, allow_extend: bool = True):
    """The preimages (w1, w2) of 1, each on the sphere |z - c1| = 1/2."""
    r1, r2 = fam.pullback(fam.one, allow_extend=allow_extend)
    fam.refresh()
    r1, r2 = fam.field.lift_element(r1), fam.field.lift_element(r2)
    for w in (r1, r2):
        if (w - fam.c1).val() != ValExp(-1):
            raise SolveError("unit preimage is off the |z - c1| = 1/2 sphere")
    return r1, r2


@dataclass
class ItineraryWitness:
    x: TowerElement
    y: TowerElement
    w1: TowerElement
    p: TowerElement
    plan: Plan
    reports: List[CheckpointReport]
    trace: List[TowerElement]
    strict_residual: ValExp


def find_strict_point(fam: TowerFamily, plan: Plan,
                      solve_precision: ValExp) -> ItineraryWitness:
    """Backward construction of the depth-1 strict point x."""
    n1, m1 = plan.n[0], plan.m[0]
    field = fam.field
    w1, _ = unit_preimages(fam, allow_extend=True)

    half_small = ValExp(Fraction(-3, 2))
    # critical cycles from Psi_1 up to Psi_{m1}
    q = w1
    for k in range(2, m1 + 1):
        r1, r2 = fam.pullback(q)
        u2 = _pick_root((r1, r2),
                        lambda r: r.val_or_floor() == half_small,
                        "|z| = 1/(2 sqrt 2)")
        r1, r2 = fam.pullback(u2)
        u1 = _pick_root((r1, r2),
                        lambda r: (r - fam.one).val_or_floor() == half_small,
                        "|z - 1| = 1/(2 sqrt 2)")
        r1, r2 = fam.pullback(u1, allow_extend=True)
        fam.refresh()
        q = None
        for cand in (r1, r2):
            cand = field.lift_element(cand)
            if (cand - fam.c1).val() == rho_exponent(k):
                q = cand
                break
        if q is None:
            raise SolveError(f"fold pullback missed the Psi_{k} sphere")
        logger.info("fold %d: |q - c1| = 2^%s, tower dim %d",
                    k, rho_exponent(k).serialize(), field.dim)
    p = q

    def climb(target, what):
        """Pull back through Gamma_{1..n1} and once more to the 1-sphere."""
        z = target
        for j in range(1, n1 + 1):
            want = ValExp(Fraction(-(2 * j + 1), 2))
            r1, r2 = fam.pullback(z)
            z = _pick_root((r1, r2),
                           lambda r, w=want: r.val_or_floor() == w,
                           f"Gamma_{j} point for {what}")
        near = ValExp(Fraction(-(2 * n1 + 1), 2))
        r1, r2 = fam.pullback(z)
        return _pick_root((r1, r2),
                          lambda r: (r - fam.one).val_or_floor() == near,
                          f"{what} on the sphere about 1")

    y = climb(fam.c1, "y")
    x = climb(p, "x")

    sphere_exp = ValExp(rho_exponent(m1).exponent - n1)
    dxy = (x - y).val()
    if dxy != sphere_exp:
        raise SolveError(
            f"witness off the rho/2^n sphere about y: 2^{dxy.serialize()}")

    ok, reports, trace, strict = check_itinerary(
        fam, x, plan, 1, strict_target=solve_precision, want_trace=True)
    if not ok:
        bad = [r.step for r in reports if not r.ok]
        raise BuildError(f"itinerary verification failed at steps {bad[:6]}")
    logger.info("witness found: strict residual 2^%s, tower dim %d",
                strict.serialize(), field.dim)
    return ItineraryWitness(x=x, y=y, w1=w1, p=p, plan=plan, reports=reports,
                            trace=trace, strict_residual=strict)


# -- parameter refinement ----------------------------------------------------------------


def _ensure_group_denominator(field: Tower, den: int) -> None:
    """Grow the value group with binomial layers until 1/den is reached."""
    while field.group_denominator() < den:
        quantum = Fraction(1, field.group_denominator())
        sqrt_descend(field, field.monomial(-quantum), allow_extend=True)
        logger.info("group refinement layer: denominator %d, dim %d",
                    field.group_denominator(), field.dim)


def _backchain_to_near_one(fam: TowerFamily, target: TowerElement,
                           n_steps: int) -> TowerElement:
    """Pull a Gamma_0-level target back through Gamma_1..Gamma_n to the
    1-sphere: the unique fold-free preimage path under the given family."""
    z = target
    for j in range(1, n_steps + 1):
        want = ValExp(Fraction(-(2 * j + 1), 2))
        r1, r2 = fam.pullback(z)
        z = _pick_root((r1, r2), lambda r, w=want: r.val_or_floor() == w,
                       f"Gamma_{j} backchain point")
    near = ValExp(Fraction(-(2 * n_steps + 1), 2))
    r1, r2 = fam.pullback(z)
    return _pick_root((r1, r2),
                      lambda r: (r - fam.one).val_or_floor() == near,
                      "backchain point on the sphere about 1")


def _solve_phi_target(fam: TowerFamily, x: TowerElement, target: TowerElement,
                      n_next: int, I1: int, beta0: TowerElement,
                      solve_precision: ValExp, label: str, log: list):
    """Solve Phi_x^{I1 + n_next + 1}(beta) = target for a Gamma_0 target.

    Phase A localizes the branch: the fold-free backchain of the target
    under the current beta gives a near-one block target, and Newton on
    the isometric block map Phi_x^{I1} homes onto the sphere point whose
    block image matches; two rounds contract the parameter error by the
    backchain sensitivity squared.  Phase B runs verified Newton on the
    full map Phi_x^{I1 + n_next + 1}, which is then safely inside its
    quadratic-convergence zone on the localized branch.
    """
    field = fam.field
    N = I1 + n_next + 1
    beta = beta0

    # phase A: branch localization via the block isometry
    for outer in range(2):
        famb = TowerFamily(field, fam.a, beta)
        t22 = _backchain_to_near_one(famb, field.lift_element(target), n_next)
        der = None
        last = None
        for _ in range(10):
            famb = TowerFamily(field, fam.a, beta)
            res, dz, _ = phi_orbit(famb, x, I1, derivative=der is None)
            res = res - t22
            if dz is not None:
                der = dz
            rq = res.val_or_floor()
            if res.is_indistinguishable_from_zero():
                break
            if last is not None and not rq < last:
                break   # stale backchain target; refresh in the outer loop
            last = rq
            beta = beta - res * der.inverse()
            log.append({"stage": f"{label}_block", "residual": rq.serialize()})

    # phase B: full-map Newton with derivative reuse and strict monitoring
    der = None
    famb = TowerFamily(field, fam.a, beta)
    res, dz, _ = phi_orbit(famb, x, N, derivative=True)
    res, der = res - target, dz
    rq = res.val_or_floor()
    log.append({"stage": f"{label}_full_seed", "residual": rq.serialize()})
    for it in range(64):
        if res.is_indistinguishable_from_zero() or rq <= solve_precision:
            return beta
        cand = beta - res * der.inverse()
        famc = TowerFamily(field, fam.a, cand)
        nres, _, _ = phi_orbit(famc, x, N)
        nres = nres - target
        nq = nres.val_or_floor()
        if not nq < rq:
            # refresh the derivative at the current point and retry once
            _, dz, _ = phi_orbit(famb, x, N, derivative=True)
            der = dz
            cand = beta - res * der.inverse()
            famc = TowerFamily(field, fam.a, cand)
            nres, _, _ = phi_orbit(famc, x, N)
            nres = nres - target
            nq = nres.val_or_floor()
            if not nq < rq:
                raise SolveError(
                    f"{label}: full Newton stalled at 2^{rq.serialize()}")
        beta, famb, res, rq = cand, famc, nres, nq
        log.append({"stage": f"{label}_full_{it}", "residual": rq.serialize()})
    raise SolveError(f"{label}: Newton budget exhausted")


def refine_parameter(fam: TowerFamily, witness: ItineraryWitness, plan: Plan,
                     k: int, solve_precision: ValExp):
    """Find b_{k+1} from b_k; returns (b_next, beta1, refine_log).

    First solves Phi_x^{I_k + n_{k+1} + 1}(beta) = c1 (the proof's first
    parameter equation); the solution beta1 lands on the sphere
    |beta - b_k| = 1/(2^{n_{k+1}} sqrt 2).  Then solves the same equation
    with target c1 + (rho_{m_{k+1}} monomial) -- an explicit point of the
    Psi_{m_{k+1}} sphere -- seeded at beta1, which realizes the placement
    b_{k+1} on the sphere of radius rho_{m_{k+1}}/2^{n_{k+1}} about beta1
    with the Psi checkpoint exact by construction.
    """
    if k != 1:
        raise BuildError("refinement beyond k = 1 needs a strict solve whose "
                         "minimal field grows beyond the supported towers")
    field = fam.field
    n_next, m_next = plan.n[k], plan.m[k]
    _ensure_group_denominator(field, 2 ** m_next)
    fam.refresh()
    x = field.lift_element(witness.x)
    sphere = ValExp(Fraction(-(2 * n_next + 1), 2))

    log = []
    beta1 = _solve_phi_target(fam, x, fam.c1, n_next, plan.I[k], fam.b,
                              solve_precision, "solve_c1", log)
    dist = (beta1 - fam.b).val()
    if dist != sphere:
        raise SolveError(
            f"first parameter solution left its sphere: 2^{dist.serialize()}")

    place = ValExp(rho_exponent(m_next).exponent)
    q_target = fam.c1 + field.monomial(place.exponent)
    b_next = _solve_phi_target(fam, x, q_target, n_next, plan.I[k], beta1,
                               solve_precision, "solve_psi", log)
    sphere2 = ValExp(rho_exponent(m_next).exponent - n_next)
    d2 = (b_next - beta1).val()
    if d2 != sphere2:
        raise SolveError(
            f"placement left the rho/2^n sphere about beta1: 2^{d2.serialize()}")
    log.append({"stage": "placement_sphere", "offset": d2.serialize()})
    return b_next, beta1, log


# -- certificates ---------------------------------------------------------------------------


@dataclass
class Certificate:
    data: dict

    def to_json(self, **kw) -> str:
        return json.dumps(self.data, sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls(json.loads(text))


def periodicity_block(params: FamilyParams) -> dict:
    """Exact period-3 data for the critical ball plus the rule chain."""
    c1, _ = critical_points(params)
    ctx = region_context(params)
    tr = exact_orbit(params, c1, 3, ctx=ctx)
    radius = ValExp(Fraction(-3, 2))
    rules = []
    res0 = critical_ball_image(radius)
    rules.append({"step": 0, "rule": res0.rule_id, "in": radius.serialize(),
                  "out": res0.radius.serialize()})
    near = Region(NEAR_ONE, x_exp=(tr.points[1] - GaussianRational(1)).val())
    res1 = image_disk(res0.radius, near)
    rules.append({"step": 1, "rule": res1.rule_id,
                  "in": res0.radius.serialize(),
                  "out": res1.radius.serialize()})
    res2 = image_disk(res1.radius, Region(EXPANDING))
    rules.append({"step": 2, "rule": res2.rule_id,
                  "in": res1.radius.serialize(),
                  "out": res2.radius.serialize()})
    dist = (tr.points[3] - c1).val()
    return {
        "orbit": [p.serialize() for p in tr.points],
        "regions": [r.serialize() for r in tr.regions],
        "return_distance": dist.serialize(),
        "ball_radius": radius.serialize(),
        "rules": rules,
        "closes": bool(dist <= radius and res2.radius == radius),
    }


def build(depth: int, plan: Optional[Plan] = None,
          precision: ValExp = ValExp(-128),
          params: Optional[FamilyParams] = None,
          modulus_bits: Optional[int] = None) -> Certificate:
    """Run the construction to `depth` and emit a certificate."""
    if depth < 1:
        raise BuildError("depth must be >= 1")
    if depth > 2:
        raise BuildError(
            "depth > 2 is not supported: the strict solve for b_3 would need "
            "parameter-space fold extensions beyond the working towers")
    if plan is None:
        plan = default_plan(depth)
    plan.validate()
    if plan.depth < depth:
        raise BuildError("plan is shallower than the requested depth")
    if params is None:
        params = example_params()
    if modulus_bits is None:
        modulus_bits = 2 * int(-precision.exponent) + 224

    per = periodicity_block(params)
    if not per["closes"]:
        raise BuildError("base parameters fail the period-3 ball check")

    solve_prec = ValExp(precision.exponent - 48)
    field = make_tower(0, modulus_bits=modulus_bits)
    fam = TowerFamily(field, params.a, params.b)
    witness = find_strict_point(fam, plan, solve_prec)

    levels = [{
        "level": 1,
        "value": None,
        "value_exact": params.b.serialize(),
        "strict_residual": witness.strict_residual.serialize(),
        "itinerary_depth": 1,
    }]
    orbit_logs = [{
        "param_level": 1,
        "depth": 1,
        "steps": [r.serialize() for r in witness.reports],
        "elements": {str(i): v.serialize()
                     for i, v in enumerate(witness.trace)},
    }]
    nest = []
    refine_logs = []

    if depth >= 2:
        b2, beta1, rlog = refine_parameter(fam, witness, plan, 1, solve_prec)
        refine_logs.append({"k": 1, "stages": rlog,
                            "beta1": beta1.serialize()})
        fam2 = TowerFamily(field, params.a, b2)
        x_l = field.lift_element(witness.x)
        ok2, reports2, trace2, strict2 = check_itinerary(
            fam2, x_l, plan, 2, want_trace=True)
        if not ok2:
            bad = [r.step for r in reports2 if not r.ok]
            raise BuildError(f"depth-2 itinerary failed at steps {bad[:6]}")
        ok1b, _, _, _ = check_itinerary(fam2, x_l, plan, 1)
        if not ok1b:
            raise BuildError("depth-1 itinerary lost under the refined parameter")
        dist = (b2 - fam.b).val()
        tau1 = plan.tau(1)
        if not dist < tau1:
            raise BuildError("nest violated: |b2 - b1| >= tau_1")
        nest.append({"k": 1, "dist": dist.serialize(),
                     "tau": tau1.serialize(), "strict": bool(dist < tau1)})
        levels.append({
            "level": 2,
            "value": b2.serialize(),
            "value_exact": None,
            "strict_residual": strict2.serialize(),
            "itinerary_depth": 2,
        })
        orbit_logs.append({
            "param_level": 2,
            "depth": 2,
            "steps": [r.serialize() for r in reports2],
            "elements": {str(i): v.serialize()
                         for i, v in enumerate(trace2)},
        })

    tau_mid = plan.tau(1)
    states = replay_phi(itinerary_pattern(plan, 1), tau_mid)
    phi_block = {
        "tau": tau_mid.serialize(),
        "boundary_radii": [states[plan.I[1]].delta.serialize()],
        "radii": [s.delta.serialize() for s in states],
    }

    r0 = ValExp(plan.tau_exponents[0] - 1)
    radius_block = {
        "r0": r0.serialize(),
        "stages": [{
            "stage": st.stage, "r": st.r.serialize(),
            "bound": st.bound.serialize() if st.bound is not None else None,
            "ok": st.ok, "chain_ok": st.chain_ok,
        } for st in radius_trace_report(plan, r0)],
    }

    data = {
        "schema": SCHEMA,
        "precision": precision.serialize(),
        "solve_precision": solve_prec.serialize(),
        "depth": depth,
        "plan": plan.serialize(),
        "params": {"a": params.a.serialize(), "b_levels": levels},
        "tower": field.serialize(),
        "witness": {
            "x": witness.x.serialize(),
            "y": witness.y.serialize(),
            "w1": witness.w1.serialize(),
            "p": witness.p.serialize(),
            "sphere_exponent": ValExp(
                rho_exponent(plan.m[0]).exponent - plan.n[0]).serialize(),
        },
        "periodicity": per,
        "orbit_logs": orbit_logs,
        "phi_replay": phi_block,
        "radius_trace": radius_block,
        "nest": nest,
        "refine_logs": refine_logs,
    }
    return Certificate(data)


# -- verification ------------------------------------------------------------------------------


@dataclass
class VerifyReport:
    checks: List[Tuple[str, bool, str]] = dc_field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self):
        return [(n, d) for n, ok, d in self.checks if not ok]


def verify_certificate(cert) -> VerifyReport:
    """Replay every exponent, membership and residual in the certificate."""
    report = VerifyReport()
    data = cert.data if isinstance(cert, Certificate) else cert

    if data.get("schema") != SCHEMA:
        report.add("schema", False, f"unknown schema {data.get('schema')!r}")
        return report
    report.add("schema", True)

    try:
        plan = Plan.deserialize(data["plan"])
        report.add("plan", True)
    except Exception as exc:
        report.add("plan", False, str(exc))
        return report

    precision = ValExp.deserialize(data["precision"])
    try:
        a = GaussianRational.deserialize(data["params"]["a"])
        b1 = GaussianRational.deserialize(
            data["params"]["b_levels"][0]["value_exact"])
        params = FamilyParams(a, b1)
        report.add("param_valuations", True)
    except Exception as exc:
        report.add("param_valuations", False, str(exc))
        return report

    try:
        per = periodicity_block(params)
        stored = data["periodicity"]
        ok = (per == stored)
        report.add("periodicity", ok,
                   "" if ok else "periodicity replay disagrees")
    except Exception as exc:
        report.add("periodicity", False, str(exc))

    try:
        r0 = ValExp.deserialize(data["radius_trace"]["r0"])
        stages = radius_trace_report(plan, r0)
        stored = data["radius_trace"]["stages"]
        ok = len(stored) == len(stages) and all(
            st.ok and st.chain_ok and st.r.serialize() == sd["r"]
            and sd["ok"] and sd["chain_ok"]
            for st, sd in zip(stages, stored))
        report.add("radius_trace", ok)
    except Exception as exc:
        report.add("radius_trace", False, str(exc))

    try:
        tau = ValExp.deserialize(data["phi_replay"]["tau"])
        ok = Fraction(*map(int, data["phi_replay"]["tau"].split("/"))) \
            == plan.tau_exponents[0]
        states = replay_phi(itinerary_pattern(plan, 1), tau)
        ok = ok and states[plan.I[1]].delta == tau
        ok = ok and data["phi_replay"]["boundary_radii"] == [tau.serialize()]
        ok = ok and [s.delta.serialize() for s in states] \
            == data["phi_replay"]["radii"]
        report.add("phi_replay", ok)
    except Exception as exc:
        report.add("phi_replay", False, str(exc))

    try:
        field = Tower.deserialize(data["tower"])
        x = TowerElement.deserialize(field, data["witness"]["x"])
        y = TowerElement.deserialize(field, data["witness"]["y"])
        report.add("tower_rebuild", True, f"dim {field.dim}")
    except Exception as exc:
        report.add("tower_rebuild", False, str(exc))
        return report

    try:
        sphere = ValExp.deserialize(data["witness"]["sphere_exponent"])
        want = ValExp(rho_exponent(plan.m[0]).exponent - plan.n[0])
        dxy = (x - y).val()
        report.add("witness_sphere", sphere == want and dxy == want,
                   f"|x - y| = 2^{dxy.serialize()}")
    except Exception as exc:
        report.add("witness_sphere", False, str(exc))

    for block in data["orbit_logs"]:
        level = block["param_level"]
        name = f"itinerary_level{level}"
        try:
            lvl_data = data["params"]["b_levels"][level - 1]
            if lvl_data["value_exact"] is not None:
                b_el = GaussianRational.deserialize(lvl_data["value_exact"])
            else:
                b_el = TowerElement.deserialize(field, lvl_data["value"])
            fam = TowerFamily(field, a, b_el)
            stored_res = ValExp.deserialize(lvl_data["strict_residual"])
            strict_target = stored_res if block["depth"] == 1 else None
            ok, reports, trace, strict = check_itinerary(
                fam, x, plan, block["depth"],
                strict_target=strict_target, want_trace=True)
            report.add(name, ok,
                       "" if ok else str([r.step for r in reports if not r.ok][:6]))
            stored_steps = block["steps"]
            same = len(stored_steps) == len(reports) and all(
                sd["observed"] == r.observed.serialize() and sd["ok"] and r.ok
                and sd["exponent"] == r.exponent
                for sd, r in zip(stored_steps, reports))
            report.add(f"orbit_log_level{level}", same)
            agree, bad_step = True, None
            for i_str, stored_el in block.get("elements", {}).items():
                el = TowerElement.deserialize(field, stored_el)
                if not (el - trace[int(i_str)]).is_indistinguishable_from_zero():
                    agree, bad_step = False, i_str
                    break
            report.add(f"orbit_elements_level{level}", agree,
                       "" if agree else f"step {bad_step} differs above the floor")
            if block["depth"] == 1:
                report.add("strict_residual_level1",
                           strict <= stored_res and stored_res <= precision,
                           f"2^{strict.serialize()}")
            else:
                report.add(f"strict_residual_level{level}",
                           strict <= stored_res,
                           f"2^{strict.serialize()}")
        except Exception as exc:
            report.add(name, False, str(exc))

    for entry in data.get("nest", []):
        k = entry["k"]
        try:
            lvl = data["params"]["b_levels"][k]
            b_next = TowerElement.deserialize(field, lvl["value"])
            dist = (b_next - field.embed(b1)).val()
            tau_k = plan.tau(k)
            ok = (dist < tau_k and entry["dist"] == dist.serialize()
                  and entry["tau"] == tau_k.serialize() and entry["strict"])
            report.add(f"nest_k{k}", ok, f"|b2 - b1| = 2^{dist.serialize()}")
        except Exception as exc:
            report.add(f"nest_k{k}", False, str(exc))

    return report
