"""Executable image rules: disk images, sphere transport, parameter tracking.

Every rule is an exact exponent computation.  Disk-image rules for the
family with |a| = 2:

  isometry     outside B_{1/sqrt2}(0), or inside D_{1/sqrt2}(1), or on the
               sphere |x| = 1/sqrt2: radius factor 1
  expanding    inside B_{1/2}(0) minus the pole disk: factor 2
  annulus      1/2 < |x| <= 1/sqrt2 off the critical disk: factor 1/(2|x|^2)
  psi_linear   disk in Psi_k with r <= sqrt2 rho_k^2: factor 2 rho_k^2
  psi_quad     disk in Psi_k with r > sqrt2 rho_k^2: radius sqrt2 r^2
  critical_ball  ball B_s(c) at a critical point, s <= 1/(2 sqrt2):
               radius sqrt2 s^2

Rules operate on exponents only; concrete centers are used solely to
validate that a disk does not straddle regions.  A straddling disk is a
hard error, never a silent fallback.

Parameter tracking follows the three-case one-step rule for
beta -> R_beta^N(x): mu_1 = max(tau, 2 delta rho_k^2, sqrt2 delta^2) on a
Psi sphere, mu_2 = max(|R^N(x)-1| tau, delta) near 1, and
mu_3 = max(4 |R^N(x)|^2 tau, 2 delta) near 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from .valgroup import ValExp, rho_exponent
from .geometry import (
    Region, OUTER, EXPANDING, ANNULUS, CRITICAL_DISK, PSI_SPHERE,
    GAMMA_SPHERE, NEAR_ONE, POLE_DISK,
)


class RuleError(ValueError):
    """A disk straddles regions or no rule applies."""


@dataclass(frozen=True)
class ImageRuleResult:
    radius: ValExp          # output disk radius exponent
    rule_id: str
    factor: ValExp          # factor * input radius = output radius

    def serialize(self) -> dict:
        return {
            "radius": self.radius.serialize(),
            "rule": self.rule_id,
            "factor": self.factor.serialize(),
        }


@dataclass(frozen=True)
class RuleLogEntry:
    step: int
    rule_id: str
    in_exp: ValExp
    out_exp: ValExp

    def serialize(self) -> dict:
        return {
            "step": self.step,
            "rule": self.rule_id,
            "in": self.in_exp.serialize(),
            "out": self.out_exp.serialize(),
        }

    @classmethod
    def deserialize(cls, data: dict) -> "RuleLogEntry":
        return cls(
            step=data["step"],
            rule_id=data["rule"],
            in_exp=ValExp.deserialize(data["in"]),
            out_exp=ValExp.deserialize(data["out"]),
        )


_SQRT2 = Fraction(1, 2)   # exponent of sqrt 2
_HALF_SPHERE = ValExp(Fraction(-1, 2))   # |x| = 1/sqrt2


def _result(rule_id: str, r: ValExp, factor: ValExp) -> ImageRuleResult:
    return ImageRuleResult(radius=r * factor, rule_id=rule_id, factor=factor)


def image_disk(radius: ValExp, region: Region) -> ImageRuleResult:
    """Image radius of a disk D_radius wholly inside `region` under one R step.

    The caller guarantees the disk does not straddle regions (checked by
    validate_disk_in_region when concrete data is available).
    """
    tag = region.tag
    if tag in (OUTER, NEAR_ONE):
        return _result("isometry", radius, ValExp(0))
    if tag == EXPANDING:
        return _result("expanding", radius, ValExp(1))
    if tag == GAMMA_SPHERE:
        if region.index == 0:
            return _result("isometry", radius, ValExp(0))
        return _result("expanding", radius, ValExp(1))
    if tag == ANNULUS:
        x = region.x_exp
        if x is None:
            raise RuleError("annulus rule needs the |x| exponent")
        # factor 1/(|a| |x|^2) with |a| = 2
        return _result("annulus", radius, ValExp(-1 - 2 * x.exponent))
    if tag == PSI_SPHERE:
        k = region.index
        rho2 = rho_exponent(k).exponent * 2
        threshold = ValExp(_SQRT2 + rho2)     # sqrt2 rho_k^2
        if radius > ValExp(rho_exponent(k).exponent):
            raise RuleError("disk radius exceeds the Psi sphere scale")
        if radius <= threshold:
            return _result("psi_linear", radius, ValExp(1 + rho2))
        # radius sqrt2 r^2: factor is sqrt2 * r
        return _result("psi_quad", radius, ValExp(_SQRT2 + radius.exponent))
    if tag in (CRITICAL_DISK, POLE_DISK):
        raise RuleError(f"no disk-image rule applies in {tag}")
    raise RuleError(f"unknown region tag {tag!r}")


def critical_ball_image(radius: ValExp) -> ImageRuleResult:
    """Ball image at a critical center: B_s(c) -> B_{sqrt2 s^2}(R(c)).

    Valid for s <= 1/(2 sqrt2), the scale of the period-3 critical ball.
    """
    if radius > ValExp(Fraction(-3, 2)):
        raise RuleError("critical ball rule needs radius <= 1/(2 sqrt 2)")
    return ImageRuleResult(
        radius=ValExp(_SQRT2 + 2 * radius.exponent),
        rule_id="critical_ball",
        factor=ValExp(_SQRT2 + radius.exponent),
    )


def validate_disk_in_region(region: Region, radius: ValExp, zd) -> None:
    """Straddle check with concrete valuation data (raises RuleError)."""
    tag = region.tag
    if tag == OUTER:
        if not (zd.z > _HALF_SPHERE and radius <= zd.z):
            raise RuleError("disk straddles the outer region boundary")
    elif tag == NEAR_ONE:
        if not (zd.z_minus_1 < _HALF_SPHERE and radius <= _HALF_SPHERE):
            raise RuleError("disk straddles D_{1/sqrt2}(1)")
    elif tag in (EXPANDING, GAMMA_SPHERE) and not (
        tag == GAMMA_SPHERE and region.index == 0
    ):
        if zd.z > ValExp(-1) or radius > ValExp(-1):
            raise RuleError("disk straddles B_{1/2}(0)")
        if zd.z_minus_pole < ValExp(-1):
            raise RuleError("disk meets the pole disk")
    elif tag == ANNULUS or (tag == GAMMA_SPHERE and region.index == 0):
        if radius > zd.z:
            raise RuleError("disk straddles the annulus sphere")
    elif tag == PSI_SPHERE:
        if radius > ValExp(rho_exponent(region.index).exponent):
            raise RuleError("disk exceeds the Psi sphere scale")


def r3_psi(i: int, radius: ValExp) -> ImageRuleResult:
    """Three-step image of D_r(x) in Psi_i: D_delta(R^3 x) in Psi_{i-1}.

    delta = 2^2 rho_i^2 r; requires i > 1 and r < sqrt2 rho_i^2 strictly.
    The bound delta < sqrt2 rho_{i-1}^2 is re-derived and asserted.
    """
    if i <= 1:
        raise RuleError("r3_psi needs i > 1")
    rho2 = 2 * rho_exponent(i).exponent
    if not radius < ValExp(_SQRT2 + rho2):
        raise RuleError("r3_psi needs r < sqrt2 rho_i^2 strictly")
    factor = ValExp(2 + rho2)
    delta = radius * factor
    bound = ValExp(_SQRT2 + 2 * rho_exponent(i - 1).exponent)
    if not delta < bound:
        raise RuleError("derived bound delta < sqrt2 rho_(i-1)^2 failed")
    return ImageRuleResult(radius=delta, rule_id="r3_psi", factor=factor)


def sphere_transport(region: Region) -> Region:
    """Psi_(i+1) -> Psi_i under R^3 (i >= 1); Gamma_(i+1) -> Gamma_i under R."""
    if region.tag == PSI_SPHERE:
        if region.index is None or region.index < 2:
            raise RuleError("Psi transport needs index >= 2")
        return Region(PSI_SPHERE, index=region.index - 1)
    if region.tag == GAMMA_SPHERE:
        if region.index is None or region.index < 1:
            raise RuleError("Gamma transport needs index >= 1")
        return Region(GAMMA_SPHERE, index=region.index - 1)
    raise RuleError(f"no sphere transport for {region.tag}")


# -- parameter perturbation (two maps, same point) ---------------------------

SPHERE_CASE = "sphere"       # |z| = 1/sqrt(2)
NEAR_ONE_CASE = "near_one"   # z in D_{1/sqrt2}(1), carries |z - 1|
SMALL_CASE = "small"         # |z| < 1/2, carries |z|


def param_perturbation(case: str, z_exp: Optional[ValExp], db: ValExp) -> ValExp:
    """|R_b(z) - R_beta(z)| for |b - beta| = db, by region of z.

    sphere:   db
    near_one: |z - 1| * db      (z_exp = |z - 1|)
    small:    4 |z|^2 * db      (z_exp = |z|)
    """
    if case == SPHERE_CASE:
        return db
    if case == NEAR_ONE_CASE:
        if z_exp is None:
            raise RuleError("near-one perturbation needs |z - 1|")
        if not z_exp < _HALF_SPHERE:
            raise RuleError("near-one perturbation needs |z - 1| < 1/sqrt2")
        return z_exp * db
    if case == SMALL_CASE:
        if z_exp is None:
            raise RuleError("small perturbation needs |z|")
        if not z_exp < ValExp(-1):
            raise RuleError("small perturbation needs |z| < 1/2")
        return ValExp(2) * (z_exp ** 2) * db
    raise RuleError(f"parameter perturbation has no case {case!r}")


# -- pairwise distance predictions (sampling oracle hooks) --------------------


def predict_pair_distance(region_tag: str, dxy: ValExp,
                          x_exp: Optional[ValExp] = None,
                          prod_crit: Optional[ValExp] = None,
                          denom: Optional[ValExp] = None) -> Tuple[ValExp, bool]:
    """Predicted |R(x) - R(y)| and whether it is an exact equality.

    region_tag "outer": |x - y|; "expanding": 2|x - y|;
    "annulus": |x-y| / (2 |x|^2) (x_exp = |x|);
    "critical": 2 |x-y| max(prod_crit, |x-y| * denom) where prod_crit =
    |x-c1||x-c2| and denom = |bx - 1/a|; exact iff the two max args differ.
    """
    if region_tag == "outer":
        return dxy, True
    if region_tag == "expanding":
        return ValExp(1) * dxy, True
    if region_tag == "annulus":
        return dxy * ValExp(-1 - 2 * x_exp.exponent), True
    if region_tag == "critical":
        second = dxy * denom
        bigger = prod_crit if prod_crit >= second else second
        return ValExp(1) * dxy * bigger, prod_crit != second
    raise RuleError(f"no pair-distance prediction for {region_tag!r}")


# -- the parameter-disk tracker -----------------------------------------------


@dataclass(frozen=True)
class PhiState:
    """State of beta -> R_beta^N(x) tracking on a parameter disk D_tau(b).

    delta is the z-disk radius at step N (ValExp; may be the zero value at
    N = 0), tau the parameter-disk radius.  case/aux describe the region of
    R_b^N(x): ("psi", k), ("near_one", |R^N(x)-1|), ("small", |R^N(x)|).
    """

    step: int
    delta: ValExp
    tau: ValExp
    case: str
    aux: Optional[object] = None   # int k for psi; ValExp otherwise


def phi_step(state: PhiState, next_case: str, next_aux=None) -> PhiState:
    """One tracking step; returns the state at step N+1.

    The returned delta is the exact max of the applicable scales; ties
    still return that exponent (the image is the stated disk either way).
    """
    tau, delta = state.tau, state.delta
    if state.case == "psi":
        k = state.aux
        rho2 = 2 * rho_exponent(k).exponent
        if not delta <= ValExp(rho_exponent(k).exponent):
            raise RuleError("phi step: disk exceeds the Psi sphere scale")
        mu = _vmax(tau, delta * ValExp(1 + rho2), (delta ** 2) * ValExp(_SQRT2))
    elif state.case == "near_one":
        dist1 = state.aux
        if not (dist1 < _HALF_SPHERE and delta <= _HALF_SPHERE):
            raise RuleError("phi step: state not inside D_{1/sqrt2}(1)")
        mu = _vmax(dist1 * tau, delta)
    elif state.case == "small":
        absz = state.aux
        if not (absz < ValExp(-1) and delta <= ValExp(-1)):
            raise RuleError("phi step: state not inside D_{1/2}(0)")
        mu = _vmax(ValExp(2) * (absz ** 2) * tau, ValExp(1) * delta)
    else:
        raise RuleError(f"phi step has no case {state.case!r}")
    return PhiState(step=state.step + 1, delta=mu, tau=tau,
                    case=next_case, aux=next_aux)


def _vmax(*vals: ValExp) -> ValExp:
    best = vals[0]
    for v in vals[1:]:
        if v > best:
            best = v
    return best


def replay_phi(pattern: List[Tuple[str, object]], tau: ValExp) -> List[PhiState]:
    """Replay phi_step along an itinerary pattern from delta = 0.

    pattern[n] describes the region of R^n(x); the replay returns the
    state list with states[n].delta = the z-disk radius at step n.
    """
    case0, aux0 = pattern[0]
    states = [PhiState(step=0, delta=ValExp(None), tau=tau, case=case0, aux=aux0)]
    for case, aux in pattern[1:]:
        states.append(phi_step(states[-1], case, aux))
    return states
