"""Ultrametric disks, balls, spheres and the region taxonomy of the plane.

All radii are exact exponents (ValExp).  Centers are either concrete field
elements or symbolic anchors ("0", "1", "c1", "b1", ...), so the planner
and the certificate verifier can reason about containment without concrete
tower data.  A disk D_r(a) is open, a ball B_r(a) is closed, and the
sphere S_r(a) is the difference B_r(a) - D_r(a); every member of a disk or
ball is a center.

Region classification is driven purely by valuation data (exponents of z,
z-1, z-c1, z-pole and optionally z-c2) for the family with |a| = 2:

  PoleDisk       |z - 1/(ab)| < 1/2            (excluded from every rule)
  NearOne        |z - 1| <= 1/(2*sqrt(2))      (image of the critical ball)
  PsiSphere(i)   |z - c1| = rho_i              (inside the critical disk)
  CriticalDisk   |z - c1| < 1/sqrt(2), not on a rho sphere
  GammaSphere(i) |z| = 1/(2^i sqrt(2)), i >= 0
  Expanding      |z| <= 1/2 otherwise
  Annulus        1/2 < |z| <= 1/sqrt(2) otherwise
  Outer          |z| > 1/sqrt(2) otherwise
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .valgroup import ValExp, ZERO, rho_exponent

OPEN = "open"       # D_r(a)
CLOSED = "closed"   # B_r(a)
SPHERE = "sphere"   # S_r(a)

# exponent constants for |a| = 2
_HALF = Fraction(1, 2)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Disk:
    """A disk, ball or sphere with exact-exponent radius.

    center is a field element (anything with .val()) or a symbolic anchor
    string; radius is a ValExp; kind is "open", "closed" or "sphere".
    """

    center: Union[str, object]
    radius: ValExp
    kind: str = OPEN

    def __post_init__(self):
        if self.kind not in (OPEN, CLOSED, SPHERE):
            raise GeometryError(f"unknown kind {self.kind!r}")

    def with_center(self, center) -> "Disk":
        return Disk(center, self.radius, self.kind)

    def member_has(self, dist: ValExp) -> bool:
        """Is a point at distance |z - center| = dist a member?"""
        if self.kind == OPEN:
            return dist < self.radius
        if self.kind == CLOSED:
            return dist <= self.radius
        return dist == self.radius

    def serialize(self) -> dict:
        center = self.center if isinstance(self.center, str) else self.center.serialize()
        return {"center": center, "radius": self.radius.serialize(), "kind": self.kind}


# Known exact distances between symbolic anchors for the |a| = 2 family
# with the worked base parameters (exponents).  "pole" is 1/(ab).
_ANCHOR_DISTANCES = {
    ("0", "1"): Fraction(0),
    ("0", "c1"): Fraction(-1, 2),
    ("0", "c2"): Fraction(-1, 2),
    ("0", "pole"): Fraction(-1),
    ("1", "c1"): Fraction(0),
    ("1", "pole"): Fraction(0),
    ("c1", "c2"): Fraction(-3, 2),
    ("c1", "pole"): Fraction(-1, 2),
    ("1", "w1"): Fraction(-1, 2),
    ("c1", "w1"): Fraction(-1),
}


def anchor_distance(a: str, b: str) -> ValExp:
    if a == b:
        return ZERO
    key = (a, b) if (a, b) in _ANCHOR_DISTANCES else (b, a)
    if key not in _ANCHOR_DISTANCES:
        raise GeometryError(f"unknown anchor distance {a!r} .. {b!r}")
    return ValExp(_ANCHOR_DISTANCES[key])


def center_distance(x, y) -> ValExp:
    """|x - y| for concrete or symbolic centers; raises when incomparable."""
    xs, ys = isinstance(x, str), isinstance(y, str)
    if xs and ys:
        return anchor_distance(x, y)
    if xs or ys:
        raise GeometryError(
            f"incomparable centers: symbolic {x!r} vs concrete {y!r}"
        )
    try:
        return (x - y).val()
    except Exception as exc:  # different towers, etc.
        raise GeometryError(f"incomparable centers: {exc}") from exc


def contains(outer: Disk, inner) -> bool:
    """Does `outer` contain `inner` (a Disk or a point)?

    Ultrametric rule: a disk contains another iff it contains its center
    and its radius bound dominates.  Points are elements or anchors.
    """
    if isinstance(inner, Disk):
        d = center_distance(outer.center, inner.center)
        if not outer.member_has(d) and not (d <= _radius_bound(outer)):
            return False
        # every point of inner is within inner's radius bound of its center
        if inner.kind == SPHERE:
            # sphere members are at exact distance; treat as closed bound
            bound = inner.radius
        else:
            bound = inner.radius
        # distance from outer.center to any inner point <= max(d, bound)
        worst = d if d >= bound else bound
        if outer.kind == OPEN:
            # strict: need worst < outer.radius, except equality of d alone
            # cannot rescue membership for open disks
            if inner.kind == OPEN and bound == outer.radius and d < outer.radius:
                return True  # open-in-open with equal radius and inner center
            return worst < outer.radius
        if outer.kind == CLOSED:
            return worst <= outer.radius
        raise GeometryError("containment in a sphere is not a disk relation")
    # a point
    d = center_distance(outer.center, inner if isinstance(inner, str) else inner)
    return outer.member_has(d)


def _radius_bound(disk: Disk) -> ValExp:
    return disk.radius


def disjoint(a: Disk, b: Disk) -> bool:
    """Two disks/balls intersect iff one contains the other."""
    return not (contains(a, b) or contains(b, a))


# -- regions -----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Classified subset of the dynamical plane; tag plus parameters."""

    tag: str
    index: Optional[int] = None          # PsiSphere / GammaSphere index
    which: Optional[str] = None          # CriticalDisk: "c1" or "c2"
    x_exp: Optional[ValExp] = None       # Annulus: |x|; NearOne: |z-1|

    def serialize(self) -> dict:
        out = {"tag": self.tag}
        if self.index is not None:
            out["index"] = self.index
        if self.which is not None:
            out["which"] = self.which
        if self.x_exp is not None:
            out["x_exp"] = self.x_exp.serialize()
        return out

    @classmethod
    def deserialize(cls, data: dict) -> "Region":
        return cls(
            tag=data["tag"],
            index=data.get("index"),
            which=data.get("which"),
            x_exp=ValExp.deserialize(data["x_exp"]) if "x_exp" in data else None,
        )


OUTER = "Outer"
EXPANDING = "Expanding"
ANNULUS = "Annulus"
CRITICAL_DISK = "CriticalDisk"
PSI_SPHERE = "PsiSphere"
GAMMA_SPHERE = "GammaSphere"
NEAR_ONE = "NearOne"
POLE_DISK = "PoleDisk"


@dataclass(frozen=True)
class ZData:
    """Valuation data of a point needed by classify.

    All entries are absolute-value exponents; entries may be None when
    unknown (classify raises if a needed one is missing).
    """

    z: Optional[ValExp] = None
    z_minus_1: Optional[ValExp] = None
    z_minus_c1: Optional[ValExp] = None
    z_minus_pole: Optional[ValExp] = None
    z_minus_c2: Optional[ValExp] = None


def _need(v: Optional[ValExp], name: str) -> ValExp:
    if v is None:
        raise GeometryError(f"insufficient valuation data: {name} missing")
    return v


def _psi_index(dist: ValExp) -> Optional[int]:
    """i >= 1 with dist = rho_i exponent (-3/2 + 2^-i), else None."""
    if dist.is_zero:
        return None
    q = dist.exponent + Fraction(3, 2)   # should be 2^-i
    if q <= 0 or q.numerator != 1:
        return None
    den = q.denominator
    if den & (den - 1):
        return None
    i = den.bit_length() - 1
    return i if i >= 1 else None


def _gamma_index(abs_exp: ValExp) -> Optional[int]:
    """i >= 0 with |z| = 2^(-i - 1/2), else None."""
    if abs_exp.is_zero:
        return None
    q = -(abs_exp.exponent + _HALF)
    if q.denominator != 1 or q < 0:
        return None
    return int(q)


def classify(zd: ZData) -> Region:
    """Total classification into exactly one region.

    Precedence: PoleDisk, NearOne, PsiSphere/CriticalDisk, GammaSphere,
    Expanding, Annulus, Outer.  The pole disk is carved out first so the
    expanding rule never sees it.
    """
    z = _need(zd.z, "|z|")

    # pole disk: |z - pole| < 1/2; only points with |z| = 1/2 can be inside
    if z == ValExp(-1):
        zp = _need(zd.z_minus_pole, "|z - pole|")
        if zp < ValExp(-1):
            return Region(POLE_DISK)

    # near one: |z - 1| <= 1/(2 sqrt 2)
    if zd.z_minus_1 is not None and zd.z_minus_1 <= ValExp(Fraction(-3, 2)):
        return Region(NEAR_ONE, x_exp=zd.z_minus_1)

    # critical disk |z - c1| < 1/sqrt(2) (the c2 disk coincides with it)
    if zd.z_minus_c1 is not None and zd.z_minus_c1 < ValExp(-_HALF):
        i = _psi_index(zd.z_minus_c1)
        if i is not None:
            return Region(PSI_SPHERE, index=i)
        d2 = zd.z_minus_c2
        if d2 is not None and d2 < zd.z_minus_c1:
            return Region(CRITICAL_DISK, which="c2")
        return Region(CRITICAL_DISK, which="c1")

    g = _gamma_index(z)
    if g is not None:
        return Region(GAMMA_SPHERE, index=g)

    if z <= ValExp(-1):
        return Region(EXPANDING)
    if z <= ValExp(-_HALF):
        return Region(ANNULUS, x_exp=z)
    return Region(OUTER)
