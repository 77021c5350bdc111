"""The quadratic family R_b(z) = (z^2 - z)/(bz - 1/a) and its orbits.

Evaluation is generic over the element type: exact Gaussian rationals or
finite-precision tower elements, as long as the operands support field
arithmetic and .val().  Evaluation clears denominators before valuations
are taken, so no spurious precision is lost near the pole 1/(ab).

R(0) = R(1) = 0; 0 is a repelling fixed point with multiplier a, infinity
an indifferent one with multiplier b.  The critical points are
(1 +- sqrt(1 - ab))/(ab), both on the sphere |z| = 1/sqrt(|a|).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .valgroup import ValExp
from .qifield import GaussianRational, sqrt_exact
from .geometry import Region, ZData, classify


class PoleError(ArithmeticError):
    """Evaluation hit the pole 1/(ab)."""

    def __init__(self, step=None):
        self.step = step
        msg = "evaluation at the pole 1/(ab)"
        if step is not None:
            msg += f" at orbit step {step}"
        super().__init__(msg)


@dataclass(frozen=True)
class FamilyParams:
    """Parameters (a, b) with |a| = 2 and |b| = 1, checked at construction."""

    a: object
    b: object

    def __post_init__(self):
        av, bv = self.a.val(), self.b.val()
        if av != ValExp(1):
            raise ValueError(f"|a| must be 2 (exponent 1), got exponent {av}")
        if bv != ValExp(0):
            raise ValueError(f"|b| must be 1 (exponent 0), got exponent {bv}")

    def with_b(self, b) -> "FamilyParams":
        return FamilyParams(self.a, b)

    @property
    def pole(self):
        """1/(ab), the unique pole of R."""
        return (self.a * self.b).inverse()


def example_params() -> FamilyParams:
    """The worked base parameters a = -1 + i/2, b1 = -1."""
    return FamilyParams(
        GaussianRational(-1, Fraction(1, 2)), GaussianRational(-1, 0)
    )


def eval_map(params: FamilyParams, z):
    """R_b(z), exact or precision-tracked; raises PoleError at the pole."""
    den = params.b * z - params.a.inverse()
    if _is_definitely_zero(den):
        raise PoleError()
    return (z * z - z) / den


def eval_derivative_z(params: FamilyParams, z):
    """dR/dz = f_b(z)/(bz - 1/a)^2 with f_b(z) = b z^2 - 2z/a + 1/a."""
    den = params.b * z - params.a.inverse()
    return critical_equation(params, z) / (den * den)


def eval_derivative_b(params: FamilyParams, z):
    """dR/db at fixed z: -z (z^2 - z) / (bz - 1/a)^2."""
    den = params.b * z - params.a.inverse()
    return -(z * (z * z - z)) / (den * den)


def critical_equation(params: FamilyParams, z):
    """f_b(z) = b z^2 - (2/a) z + 1/a; its zeros are the critical points."""
    inv_a = params.a.inverse()
    return params.b * (z * z) - (inv_a + inv_a) * z + inv_a


def _is_definitely_zero(x) -> bool:
    vz = x.val()
    return vz.is_zero if not hasattr(x, "precision") else x.is_indistinguishable_from_zero()


@dataclass(frozen=True)
class RegionContext:
    """Reference points needed to tag orbit points with regions."""

    c1: object
    c2: object
    pole: object
    one: object


def region_context(params: FamilyParams) -> RegionContext:
    c1, c2 = critical_points(params)
    one = _one_like(params.a)
    return RegionContext(c1=c1, c2=c2, pole=params.pole, one=one)


def _one_like(x):
    if isinstance(x, GaussianRational):
        return GaussianRational(1, 0)
    return x.field.one()


def zdata_for(ctx: RegionContext, z) -> ZData:
    return ZData(
        z=z.val(),
        z_minus_1=(z - ctx.one).val(),
        z_minus_c1=(z - ctx.c1).val(),
        z_minus_pole=(z - ctx.pole).val(),
        z_minus_c2=(z - ctx.c2).val(),
    )


@dataclass
class OrbitTrace:
    """Orbit points with region tags; entry n is R^n of the start point."""

    points: List[object] = field(default_factory=list)
    regions: List[Region] = field(default_factory=list)

    def __len__(self):
        return len(self.points)


def orbit(params: FamilyParams, z, n_steps: int,
          ctx: Optional[RegionContext] = None) -> OrbitTrace:
    """Trace of length n_steps + 1 with region tags; PoleError carries the step."""
    if ctx is None:
        ctx = region_context(params)
    trace = OrbitTrace()
    current = z
    for step in range(n_steps + 1):
        trace.points.append(current)
        trace.regions.append(classify(zdata_for(ctx, current)))
        if step == n_steps:
            break
        try:
            current = eval_map(params, current)
        except PoleError:
            raise PoleError(step=step) from None
    return trace


def critical_points(params: FamilyParams) -> Tuple[object, object]:
    """(c1, c2) = (1 +- sqrt(1 - ab))/(ab); exact when the root is in Q(i).

    For parameters whose 1 - ab has no square root in the working field the
    caller must solve through a tower (see constructor.solve_critical_point);
    here that situation raises ValueError.
    """
    one = _one_like(params.a)
    ab = params.a * params.b
    disc = one - ab
    if isinstance(disc, GaussianRational):
        roots = sqrt_exact(disc)
        if roots is None:
            raise ValueError("sqrt(1 - ab) is not in Q(i); use a tower solve")
        r = roots[0]
        c1 = (one + r) / ab
        c2 = (one - r) / ab
        # canonical order: c1 is the root closer to 1+i when distinguishable
        anchor = GaussianRational(1, 1)
        if (c1 - anchor).val() > (c2 - anchor).val():
            c1, c2 = c2, c1
        return c1, c2
    raise ValueError("critical_points over towers goes through the constructor")


def unit_preimage_quadratic(params: FamilyParams):
    """Coefficients (B, C) of z^2 - Bz + C = 0 whose roots are R^-1(1).

    Clearing denominators in R(z) = 1: z^2 - z = bz - 1/a, i.e.
    z^2 - (1 + b) z + 1/a = 0.
    """
    one = _one_like(params.a)
    return one + params.b, params.a.inverse()


def multiplier(params: FamilyParams, fixed_point) -> object:
    """Multiplier of the fixed point 0 (returns a) or infinity (returns b).

    At 0 this is R'(0) = a; at infinity the coordinate flip w = 1/z gives
    S(w) = w(b - w/a)/(1 - w) with S'(0) = b.
    """
    if fixed_point == 0:
        return params.a
    if fixed_point in ("inf", "infinity"):
        return params.b
    raise ValueError("multiplier is defined for the fixed points 0 and infinity")
