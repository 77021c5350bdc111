"""Finite-precision arithmetic in adaptive quadratic chains over Q(i).

A Tower is Q(i) extended by an ordered chain of generators h_1, ..., h_r,
each satisfying an explicit quadratic relation h^2 = A + B*h over the
chain below it.  Two layer shapes occur:

* binomial layers (make_tower): h^2 = previous uniformizer (1+i at the
  first level), B = 0.  A level-m tower has value group (1/2^(m+1))Z and
  embeds Q(i) exactly at level 0.
* adaptive layers: adjoined when a square root stalls during digit
  descent; for the stalled approximation w of sqrt(D) the generator is
  h = sqrt(D) - w, so A = D - w^2 (the stall defect) and B = -2w.

Each generator either has absolute-value exponent outside the group below
(ramified: the group index doubles) or extends the residue field
(unramified).  In both cases distinct basis monomials prod h_t never
cancel at top order, so the absolute value of an element is the maximum
over its terms: valuations are exact reads, down to the precision floor.

Elements are coefficient vectors over Q(i) held as 2-adic residues
(integer pairs modulo 2^bits at a common dyadic scale: every coefficient
is (re + i*im) / 2^scale).  Multiplication flattens the square-free basis
into radix-3 exponent keys and uses Kronecker substitution -- three
big-integer multiplies per product -- then substitutes the layer
relations.  gmpy2 accelerates the big multiplies when present.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Callable, List, Optional, Tuple

from .valgroup import ValExp, ZERO
from .qifield import GaussianRational, v2_int

try:  # pragma: no cover - environment probe
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover
    _mpz = int

logger = logging.getLogger(__name__)


class TowerError(ArithmeticError):
    pass


class PrecisionError(TowerError):
    """A valuation or inverse was requested at or below the precision floor."""


class SolveError(TowerError):
    """Root finding failed; carries diagnostic exponents."""

    def __init__(self, msg, residual=None, derivative=None):
        super().__init__(msg)
        self.residual = residual
        self.derivative = derivative


class ExtensionNeeded(TowerError):
    """A required square root does not exist in the current tower."""

    def __init__(self, msg, defect_exp=None):
        super().__init__(msg)
        self.defect_exp = defect_exp


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


def _split2(n: int) -> Tuple[int, int]:
    """n = odd * 2^e for n != 0."""
    e = (n & -n).bit_length() - 1
    return n >> e, e


@dataclass
class Layer:
    """Generator h with h^2 = A + B*h over the chain below; |h| = 2^q."""

    q: Fraction
    a_coeffs: tuple            # sub-chain residue vector of A
    b_coeffs: Optional[tuple]  # residue vector of B, or None for B = 0
    scale: int                 # common dyadic scale of the A/B residues
    modulus_bits: int
    kind: str                  # "binomial" or "adaptive"
    ramified: bool

    def serialize(self) -> dict:
        def dump(coeffs):
            if coeffs is None:
                return None
            return {str(m): [str(re), str(im)]
                    for m, (re, im) in enumerate(coeffs) if re or im}

        return {
            "q": f"{self.q.numerator}/{self.q.denominator}",
            "A": dump(self.a_coeffs),
            "B": dump(self.b_coeffs),
            "scale": self.scale,
            "modulus_bits": self.modulus_bits,
            "kind": self.kind,
            "ramified": self.ramified,
        }

    @classmethod
    def deserialize(cls, data: dict, dim: int) -> "Layer":
        def load(obj):
            if obj is None:
                return None
            coeffs = [(0, 0)] * dim
            for mask, (re, im) in obj.items():
                coeffs[int(mask)] = (int(re), int(im))
            return tuple(coeffs)

        num, _, den = data["q"].partition("/")
        return cls(
            q=Fraction(int(num), int(den or "1")),
            a_coeffs=load(data["A"]),
            b_coeffs=load(data["B"]),
            scale=data["scale"],
            modulus_bits=data["modulus_bits"],
            kind=data["kind"],
            ramified=data["ramified"],
        )


def _gauss_q(re: int, im: int, scale: int) -> Fraction:
    """Absolute-value exponent of (re + i*im) / 2^scale (nonzero input)."""
    return Fraction(-v2_int(re * re + im * im), 2) + scale


class Tower:
    """A chain field, mutable only by appending layers."""

    def __init__(self, modulus_bits: int = 256):
        self.layers: List[Layer] = []
        self.modulus_bits = modulus_bits
        self._shift_cache: List[Fraction] = [Fraction(0)]
        self._r3_cache: List[int] = [0]
        self._inv_cache = {}

    # -- structure ------------------------------------------------------------

    @property
    def r(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return 1 << self.r

    def group_denominator(self) -> int:
        den = 2
        for layer in self.layers:
            if layer.ramified:
                den = _lcm(den, layer.q.denominator)
        return den

    def in_group(self, v: Fraction) -> bool:
        return (Fraction(v) * self.group_denominator()).denominator == 1

    def shift(self, mask: int) -> Fraction:
        while len(self._shift_cache) < self.dim:
            n = len(self._shift_cache)
            t = n.bit_length() - 1
            self._shift_cache.append(
                self._shift_cache[n ^ (1 << t)] + self.layers[t].q)
        return self._shift_cache[mask]

    def r3(self, mask: int) -> int:
        while len(self._r3_cache) < self.dim:
            n = len(self._r3_cache)
            t = n.bit_length() - 1
            self._r3_cache.append(self._r3_cache[n ^ (1 << t)] + 3 ** t)
        return self._r3_cache[mask]

    def serialize(self) -> dict:
        return {
            "base": "Q(i)",
            "modulus_bits": self.modulus_bits,
            "layers": [layer.serialize() for layer in self.layers],
        }

    @classmethod
    def deserialize(cls, data: dict) -> "Tower":
        tower = cls(modulus_bits=data["modulus_bits"])
        for t, layer_data in enumerate(data["layers"]):
            tower.layers.append(Layer.deserialize(layer_data, 1 << t))
        return tower

    # -- element constructors ---------------------------------------------------

    def default_prec(self) -> ValExp:
        return ValExp(-(self.modulus_bits - 16))

    def zero(self) -> "TowerElement":
        coeffs = [(0, 0)] * self.dim
        return TowerElement(self, 0, coeffs, prec=self.default_prec(),
                            modulus_bits=self.modulus_bits)

    def one(self) -> "TowerElement":
        coeffs = [(0, 0)] * self.dim
        coeffs[0] = (1, 0)
        return TowerElement(self, 0, coeffs, prec=self.default_prec(),
                            modulus_bits=self.modulus_bits)

    def generator(self, t: int) -> "TowerElement":
        coeffs = [(0, 0)] * self.dim
        coeffs[1 << t] = (1, 0)
        return TowerElement(self, 0, coeffs, prec=self.default_prec(),
                            modulus_bits=self.modulus_bits)

    def embed(self, g) -> "TowerElement":
        """Embed an exact Gaussian rational (or int / Fraction)."""
        if isinstance(g, TowerElement):
            if g.field is self:
                return self.lift_element(g)
            raise TowerError("cannot embed an element of a different tower")
        if isinstance(g, (int, Fraction)):
            g = GaussianRational(g)
        den = _lcm(g.re.denominator, g.im.denominator)
        odd, scale = _split2(den)
        bits = self.modulus_bits + scale
        mod = 1 << bits
        inv_odd = pow(odd, -1, mod) if odd > 1 else 1
        re = (g.re.numerator * (den // g.re.denominator) * inv_odd) % mod
        im = (g.im.numerator * (den // g.im.denominator) * inv_odd) % mod
        coeffs = [(0, 0)] * self.dim
        coeffs[0] = (re, im)
        return TowerElement(self, scale, coeffs, prec=self.default_prec(),
                            modulus_bits=bits)

    def monomial(self, v) -> "TowerElement":
        """Element 2^e0 (1+i)^e1 prod(h_t) of absolute value exactly 2^v."""
        rem = Fraction(v)
        mask = 0
        for t in reversed(range(self.r)):
            layer = self.layers[t]
            if not layer.ramified or layer.q.denominator <= 2:
                continue
            d = layer.q.denominator
            scaled = rem * d
            if scaled.denominator == 1 and scaled.numerator % 2 != 0:
                rem -= layer.q
                mask |= 1 << t
        halves = rem * 2
        if halves.denominator != 1:
            raise TowerError(f"exponent {v} is not in the value group")
        halves = int(halves)
        e1 = halves % 2
        a = -((halves + e1) // 2)
        g = GaussianRational(Fraction(2) ** a)
        if e1:
            g = g * GaussianRational(1, 1)
        out = self.embed(g)
        if mask:
            coeffs = [(0, 0)] * self.dim
            coeffs[mask] = out.coeffs[0]
            out = TowerElement(self, out.scale, coeffs, prec=out.prec,
                               modulus_bits=out.modulus_bits)
        if out.val().exponent != Fraction(v):
            raise TowerError(f"monomial construction failed for exponent {v}")
        return out

    # -- layers -------------------------------------------------------------------

    def add_binomial_layer(self) -> None:
        """Append h with h^2 = previous uniformizer; 1+i at the first level."""
        if self.r == 0:
            a = self.embed(GaussianRational(1, 1))
            q = Fraction(-1, 4)
        else:
            prev = self.layers[-1]
            a = self.generator(self.r - 1)
            q = prev.q / 2
        self._append_layer(q, a, None, kind="binomial", ramified=True)

    def _append_layer(self, q: Fraction, a: "TowerElement",
                      b: Optional["TowerElement"], kind: str,
                      ramified: bool) -> None:
        old_dim = self.dim
        scale = a.scale if b is None else max(a.scale, b.scale)
        bits = max(a.modulus_bits, b.modulus_bits if b is not None else 0)

        def rescale(el):
            if el is None:
                return None
            d = scale - el.scale
            return tuple(((re << d), (im << d)) for re, im in el.coeffs[:old_dim])

        self.layers.append(Layer(
            q=q,
            a_coeffs=rescale(a),
            b_coeffs=rescale(b),
            scale=scale,
            modulus_bits=bits + scale,
            kind=kind,
            ramified=ramified,
        ))
        self._shift_cache = self._shift_cache[:1]
        self._r3_cache = self._r3_cache[:1]
        self._inv_cache.clear()

    def lift_element(self, x: "TowerElement") -> "TowerElement":
        if len(x.coeffs) == self.dim:
            return x
        coeffs = list(x.coeffs) + [(0, 0)] * (self.dim - len(x.coeffs))
        return TowerElement(self, x.scale, coeffs, prec=x.prec,
                            modulus_bits=x.modulus_bits)

    def layer_constant(self, t: int, which: str) -> Optional["TowerElement"]:
        layer = self.layers[t]
        data = layer.a_coeffs if which == "a" else layer.b_coeffs
        if data is None:
            return None
        coeffs = list(data) + [(0, 0)] * (self.dim - len(data))
        return TowerElement(self, layer.scale, coeffs,
                            prec=self.default_prec(),
                            modulus_bits=layer.modulus_bits)


class TowerElement:
    """Square-free coefficient vector over Q(i); see the module docstring."""

    __slots__ = ("field", "scale", "coeffs", "prec", "modulus_bits")

    def __init__(self, field: Tower, scale: int, coeffs, prec: ValExp,
                 modulus_bits: int):
        self.field = field
        self.scale = scale
        self.coeffs = coeffs if isinstance(coeffs, list) else list(coeffs)
        self.prec = prec
        self.modulus_bits = modulus_bits

    @property
    def precision(self) -> ValExp:
        return self.prec

    def _terms(self):
        shift = self.field.shift
        for mask, (re, im) in enumerate(self.coeffs):
            if re or im:
                yield mask, _gauss_q(re, im, self.scale) + shift(mask)

    def val(self) -> ValExp:
        """Exact absolute-value exponent; PrecisionError at/below the floor."""
        best = None
        for _, q in self._terms():
            if best is None or q > best:
                best = q
        if best is None or not ValExp(best) > self.prec:
            raise PrecisionError(
                "valuation indistinguishable at floor 2^%s" % self.prec.serialize())
        return ValExp(best)

    def val_or_floor(self) -> ValExp:
        try:
            return self.val()
        except PrecisionError:
            return self.prec

    def is_indistinguishable_from_zero(self) -> bool:
        try:
            self.val()
            return False
        except PrecisionError:
            return True

    def with_prec(self, prec: ValExp) -> "TowerElement":
        return TowerElement(self.field, self.scale, self.coeffs,
                            prec=prec, modulus_bits=self.modulus_bits)

    def __repr__(self):
        nz = sum(1 for c in self.coeffs if c != (0, 0))
        return ("<TowerElement dim=%d nz=%d |.|=2^%s prec=%s>"
                % (self.field.dim, nz, self.val_or_floor().serialize(),
                   self.prec.serialize()))

    # -- ring structure ------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, TowerElement):
            if other.field is not self.field:
                raise TowerError("elements of different towers")
            return self.field.lift_element(other)
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self.field.embed(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        x = self.field.lift_element(self)
        s = max(x.scale, other.scale)
        bits = max(x.modulus_bits + (s - x.scale),
                   other.modulus_bits + (s - other.scale))
        mod = 1 << bits
        dx, dy = s - x.scale, s - other.scale
        coeffs = [
            (((a << dx) + (c << dy)) % mod, ((b << dx) + (d << dy)) % mod)
            for (a, b), (c, d) in zip(x.coeffs, other.coeffs)
        ]
        return TowerElement(self.field, s, coeffs,
                            prec=_worse(x.prec, other.prec), modulus_bits=bits)

    __radd__ = __add__

    def __neg__(self):
        mod = 1 << self.modulus_bits
        coeffs = [((-re) % mod, (-im) % mod) for re, im in self.coeffs]
        return TowerElement(self.field, self.scale, coeffs, prec=self.prec,
                            modulus_bits=self.modulus_bits)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return _multiply(self.field.lift_element(self), other)

    __rmul__ = __mul__

    def square(self) -> "TowerElement":
        x = self.field.lift_element(self)
        return _multiply(x, x)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def halve(self) -> "TowerElement":
        """Exact division by 2: a pure scale shift."""
        return TowerElement(self.field, self.scale + 1, self.coeffs,
                            prec=_prec_shift(self.prec, +1),
                            modulus_bits=self.modulus_bits)

    def double(self) -> "TowerElement":
        mod = 1 << self.modulus_bits
        coeffs = [((re << 1) % mod, (im << 1) % mod) for re, im in self.coeffs]
        return TowerElement(self.field, self.scale, coeffs,
                            prec=_prec_shift(self.prec, -1),
                            modulus_bits=self.modulus_bits)

    def inverse(self) -> "TowerElement":
        v = self.val()  # raises at the floor
        x = self.field.lift_element(self)
        y = _leading_inverse(x)
        out_prec = ValExp(x.prec.exponent - 2 * v.exponent)
        target = ValExp(out_prec.exponent + v.exponent)  # residual |xy - 1|
        one = self.field.one()
        for _ in range(64):
            res = one - x * y
            try:
                rq = res.val()
            except PrecisionError:
                break
            if rq <= target:
                break
            y = y + y * res
        else:
            raise SolveError("inversion did not converge")
        out = y.with_prec(out_prec)
        return _reduce(out)

    def reduce(self) -> "TowerElement":
        return _reduce(self)

    # -- serialization -------------------------------------------------------------

    def serialize(self) -> dict:
        out = {"scale": self.scale, "prec": self.prec.serialize(),
               "modulus_bits": self.modulus_bits, "coeffs": {}}
        for mask, (re, im) in enumerate(self.coeffs):
            if re or im:
                out["coeffs"][str(mask)] = [str(re), str(im)]
        return out

    @classmethod
    def deserialize(cls, field: Tower, data: dict) -> "TowerElement":
        coeffs = [(0, 0)] * field.dim
        for mask, (re, im) in data["coeffs"].items():
            coeffs[int(mask)] = (int(re), int(im))
        return cls(field, data["scale"], coeffs,
                   prec=ValExp.deserialize(data["prec"]),
                   modulus_bits=data["modulus_bits"])


def _worse(p1: ValExp, p2: ValExp) -> ValExp:
    if p1.is_zero:
        return p2
    if p2.is_zero:
        return p1
    return p1 if p1 >= p2 else p2


def _prec_shift(p: ValExp, delta: int) -> ValExp:
    if p.is_zero:
        return p
    return ValExp(p.exponent + delta)


# -- multiplication ------------------------------------------------------------------


def _multiply(x: TowerElement, y: TowerElement) -> TowerElement:
    field = x.field
    qx, qy = x.val_or_floor(), y.val_or_floor()
    cands = []
    if not qx.is_zero:
        cands.append(ValExp(qx.exponent + y.prec.exponent))
    else:
        cands.append(y.prec)
    if not qy.is_zero:
        cands.append(ValExp(qy.exponent + x.prec.exponent))
    else:
        cands.append(x.prec)
    prec = cands[0] if cands[0] >= cands[1] else cands[1]

    if field.r == 0:
        (a, b), (c, d) = x.coeffs[0], y.coeffs[0]
        bits = x.modulus_bits + y.modulus_bits
        mod = 1 << bits
        coeffs = [((a * c - b * d) % mod, (a * d + b * c) % mod)]
        return _reduce(TowerElement(field, x.scale + y.scale, coeffs,
                                    prec=prec, modulus_bits=bits))

    work_bits = x.modulus_bits + y.modulus_bits + 32
    mod_work = 1 << work_bits
    xv = {field.r3(m): c for m, c in enumerate(x.coeffs) if c != (0, 0)}
    yv = {field.r3(m): c for m, c in enumerate(y.coeffs) if c != (0, 0)}
    vec = _packed_conv(xv, yv, mod_work)
    vec, extra_scale, mod_work = _normalize_vec(field, vec, field.r, mod_work)
    bits = work_bits + extra_scale
    mod = 1 << bits
    coeffs = [(0, 0)] * field.dim
    for mask in range(field.dim):
        entry = vec.get(field.r3(mask))
        if entry is not None and entry != (0, 0):
            coeffs[mask] = (entry[0] % mod, entry[1] % mod)
    out = TowerElement(field, x.scale + y.scale + extra_scale, coeffs,
                       prec=prec, modulus_bits=bits)
    return _reduce(out)


def _packed_conv(xv: dict, yv: dict, mod_work: int) -> dict:
    """Complex integer convolution via Kronecker substitution.

    All entries must be nonnegative (2-adic residue canonical form); the
    output is canonicalized modulo mod_work, a power of two, which is
    2-adically harmless and keeps later packs nonnegative.
    """
    if not xv or not yv:
        return {}
    if len(xv) * len(yv) <= 48:
        out = {}
        for i, (ar, ai) in xv.items():
            for j, (br, bi) in yv.items():
                k = i + j
                cur = out.get(k, (0, 0))
                out[k] = ((cur[0] + ar * br - ai * bi) % mod_work,
                          (cur[1] + ar * bi + ai * br) % mod_work)
        return out
    xbits = max(max(re.bit_length(), im.bit_length()) for re, im in xv.values())
    ybits = max(max(re.bit_length(), im.bit_length()) for re, im in yv.values())
    nterms = min(len(xv), len(yv))
    slot_bits = xbits + ybits + nterms.bit_length() + 3
    W = ((slot_bits + 7) // 8) * 8
    B = W // 8
    top = max(max(xv), max(yv)) + 1

    def pack(vec, part):
        buf = bytearray(top * B)
        for idx, c in vec.items():
            v = c[part]
            if v:
                buf[idx * B:idx * B + B] = v.to_bytes(B, "little")
        return _mpz(int.from_bytes(bytes(buf), "little"))

    xr, xi = pack(xv, 0), pack(xv, 1)
    yr, yi = pack(yv, 0), pack(yv, 1)
    prr = int(xr * yr)
    pii = int(xi * yi)
    pxy = int((xr + xi) * (yr + yi))
    out = {}
    nmax = 2 * top + 1
    nbytes = nmax * B + 16
    raw_rr = prr.to_bytes(nbytes, "little")
    raw_ii = pii.to_bytes(nbytes, "little")
    raw_xy = pxy.to_bytes(nbytes, "little")
    for k in range(nmax):
        o = k * B
        a = int.from_bytes(raw_rr[o:o + B], "little")
        b = int.from_bytes(raw_ii[o:o + B], "little")
        c = int.from_bytes(raw_xy[o:o + B], "little")
        if a or b or c:
            out[k] = ((a - b) % mod_work, (c - a - b) % mod_work)
    return out


def _layer_r3_vectors(layer: Layer):
    """Cached radix-3 views of the layer constants (masks live below t)."""
    cached = getattr(layer, "_r3_vectors", None)
    if cached is not None:
        return cached
    r3 = [0]
    while len(r3) < len(layer.a_coeffs):
        n = len(r3)
        tbit = n.bit_length() - 1
        r3.append(r3[n ^ (1 << tbit)] + 3 ** tbit)
    nz = [(m, c) for m, c in enumerate(layer.a_coeffs) if c != (0, 0)]
    if layer.b_coeffs is None and len(nz) == 1:
        cached = ("mono", (r3[nz[0][0]], nz[0][1]), None)
    else:
        a_vec = {r3[m]: c for m, c in nz}
        b_vec = None
        if layer.b_coeffs is not None:
            b_vec = {r3[m]: c for m, c in enumerate(layer.b_coeffs)
                     if c != (0, 0)}
        cached = ("conv", a_vec, b_vec)
    layer._r3_vectors = cached
    return cached


def _normalize_vec(field: Tower, vec: dict, top_layer: int, mod_work: int):
    """Substitute h_t^2 = A_t + B_t h_t for all layers below top_layer.

    Entries of `vec` are radix-3 indexed with digits <= 2 at layers below
    top_layer and square-free above.  Returns the square-free vector, the
    extra dyadic scale picked up from layer constants, and the updated
    working modulus.  Binomial layers (A a single monomial, B = 0) reduce
    by a pure index remap; adaptive layers convolve with the constants,
    grouped by the (already square-free) digits above t so each packed
    convolution stays at size 3^t.
    """
    extra_scale = 0
    for t in reversed(range(top_layer)):
        p3 = 3 ** t
        p3up = 3 * p3
        layer = None
        kind = a_data = b_data = None
        while True:
            dirty = {}
            for idx in list(vec.keys()):
                if (idx // p3) % 3 == 2:
                    entry = vec.pop(idx)
                    if entry != (0, 0):
                        dirty[idx - 2 * p3] = entry
            if not dirty:
                break
            if layer is None:
                layer = field.layers[t]
                kind, a_data, b_data = _layer_r3_vectors(layer)
            # square-free the extracted block below t before substituting
            dirty, ds, mod_work = _normalize_vec(field, dirty, t, mod_work)
            if ds:
                extra_scale += ds
                for idx in vec:
                    re, im = vec[idx]
                    vec[idx] = (re << ds, im << ds)
            if kind == "mono":
                off, (ar, ai) = a_data
                if (ar, ai) == (1, 0):
                    for idx, (re, im) in dirty.items():
                        _acc(vec, idx + off, re, im)
                else:
                    for idx, (re, im) in dirty.items():
                        _acc(vec, idx + off, re * ar - im * ai,
                             re * ai + im * ar)
                continue
            # adaptive layer: lift the ambient vector by the constant scale
            if layer.scale:
                extra_scale += layer.scale
                mod_work <<= layer.scale
                for idx in vec:
                    re, im = vec[idx]
                    vec[idx] = (re << layer.scale, im << layer.scale)
            # group the dirty block by its digits above t; each group is a
            # small vector over the layers below t
            groups = {}
            for idx, entry in dirty.items():
                upper, lower = divmod(idx, p3up)
                groups.setdefault(upper, {})[lower] = entry
            for upper, block in groups.items():
                base = upper * p3up
                contrib = _packed_conv(block, a_data, mod_work)
                for idx, (re, im) in contrib.items():
                    _acc(vec, base + idx, re, im)
                if b_data:
                    contrib = _packed_conv(block, b_data, mod_work)
                    for idx, (re, im) in contrib.items():
                        _acc(vec, base + idx + p3, re, im)
    return vec, extra_scale, mod_work


def _acc(vec: dict, idx: int, re: int, im: int) -> None:
    cur = vec.get(idx)
    if cur is None:
        vec[idx] = (re, im)
    else:
        vec[idx] = (cur[0] + re, cur[1] + im)


def _reduce(x: TowerElement) -> TowerElement:
    """Clamp residues to the precision floor; strip common 2-powers."""
    field = x.field
    floor = x.prec.exponent
    coeffs = []
    max_bits = 8
    for mask, (re, im) in enumerate(x.coeffs):
        if not (re or im):
            coeffs.append((0, 0))
            continue
        # term exponent q(c) + shift(mask) must stay resolvable down to floor:
        # keep v2 information up to t bits where -t + scale + shift <= floor
        need = Fraction(floor) - field.shift(mask)
        t_bits = x.scale + 2 - (need.numerator // need.denominator) \
            if need < 0 else x.scale + 2
        t_bits = max(t_bits, 1)
        if t_bits < x.modulus_bits:
            m = 1 << t_bits
            re, im = re % m, im % m
            max_bits = max(max_bits, t_bits)
        else:
            max_bits = max(max_bits, x.modulus_bits)
        coeffs.append((re, im))
    # strip common powers of 2 into the scale
    strip = None
    for re, im in coeffs:
        for v in (re, im):
            if v:
                e = (v & -v).bit_length() - 1
                strip = e if strip is None else min(strip, e)
                if strip == 0:
                    break
        if strip == 0:
            break
    if strip and x.scale > 0:
        strip = min(strip, x.scale)
        coeffs = [(re >> strip, im >> strip) for re, im in coeffs]
        return TowerElement(field, x.scale - strip, coeffs, prec=x.prec,
                            modulus_bits=min(x.modulus_bits, max_bits) - strip)
    return TowerElement(field, x.scale, coeffs, prec=x.prec,
                        modulus_bits=min(x.modulus_bits, max_bits))


def _leading_inverse(x: TowerElement) -> TowerElement:
    """Inverse of the leading term of x (seed for Newton inversion)."""
    field = x.field
    best_mask, best_q = None, None
    for mask, q in x._terms():
        if best_q is None or q > best_q:
            best_mask, best_q = mask, q
    re, im = x.coeffs[best_mask]
    norm = re * re + im * im
    odd, e = _split2(norm)
    bits = x.modulus_bits
    mod = 1 << bits
    inv = pow(odd % mod, -1, mod)
    cre = (re * inv) % mod
    cim = (-im * inv) % mod
    # (re + i im)^-1 = (cre + i cim) / 2^e ; with the element scale s the
    # leading coefficient was (re + i im)/2^s, so its inverse carries 2^s/2^e
    new_scale = e - x.scale
    coeffs = [(0, 0)] * field.dim
    coeffs[0] = (cre, cim)
    g = TowerElement(field, max(new_scale, 0), coeffs,
                     prec=field.default_prec(), modulus_bits=bits)
    if new_scale < 0:
        mod2 = 1 << (bits - new_scale)
        coeffs = [((r << -new_scale) % mod2, (i2 << -new_scale) % mod2)
                  for r, i2 in g.coeffs]
        g = TowerElement(field, 0, coeffs, prec=g.prec,
                         modulus_bits=bits - new_scale)
    if best_mask:
        g = g * _monomial_inverse(field, best_mask)
    return g


def _monomial_inverse(field: Tower, mask: int) -> TowerElement:
    """Inverse of prod_{t in mask} h_t via h^-1 = (h - B) / A per layer."""
    out = field.one()
    for t in range(field.r):
        if not mask & (1 << t):
            continue
        key = ("hinv", t, field.r)
        if key not in field._inv_cache:
            a = field.layer_constant(t, "a")
            b = field.layer_constant(t, "b")
            h = field.generator(t)
            num = h if b is None else h - b
            field._inv_cache[key] = num * a.inverse()
        out = out * field._inv_cache[key]
    return out


# -- construction surface ---------------------------------------------------------


def make_tower(m: int, modulus_bits: int = 256) -> Tower:
    """Binomial chain of level m: value group (1/2^(m+1))Z; level 0 is Q(i)."""
    if m < 0:
        raise ValueError("tower level must be >= 0")
    tower = Tower(modulus_bits=modulus_bits)
    for _ in range(m):
        tower.add_binomial_layer()
    return tower


def sqrt_descend(field: Tower, target: TowerElement,
                 allow_extend: bool = False,
                 max_steps: int = 8192) -> TowerElement:
    """Square root by greedy digit descent plus a Newton finish.

    Progress is measured by the defect D - w^2: each accepted digit
    strictly lowers its exponent.  In residue terms every in-group
    position is fixable unless the residue class obstructs; on a stall
    the defect is adjoined as a new quadratic layer when allow_extend is
    set, otherwise ExtensionNeeded reports the obstruction exponent.
    """
    v = target.val()
    half = v.exponent / 2
    if not field.in_group(half):
        if allow_extend:
            root = _adjoin_binomial_sqrt(field, target, half)
            return root
        raise ExtensionNeeded("sqrt exponent outside the value group",
                              defect_exp=v)
    mono = field.monomial(half)
    unit = target * mono.square().inverse()
    w = field.one()
    floor = _worse(target.prec, field.default_prec())
    for _ in range(max_steps):
        defect = unit - w.square()
        try:
            dq = defect.val()
        except PrecisionError:
            return _finish_sqrt(w, mono, floor)
        if dq.exponent <= floor.exponent + 4:
            return _finish_sqrt(w, mono, floor)
        if dq < ValExp(-2):
            # Hensel zone (|defect| < |2w|^2 = 1/4): Newton steps
            w = w + defect * w.double().inverse()
            continue
        halfpos = dq.exponent / 2
        if not field.in_group(halfpos):
            if allow_extend:
                return _adjoin_unit_sqrt(field, unit, w, mono, dq.exponent)
            raise ExtensionNeeded("sqrt digit position outside the value group",
                                  defect_exp=dq)
        improved = False
        for cand in _digit_candidates(field, halfpos):
            w2 = w + cand
            nd = (unit - w2.square()).val_or_floor()
            if nd < dq:
                w = w2
                improved = True
                break
        if not improved:
            if allow_extend:
                return _adjoin_unit_sqrt(field, unit, w, mono, dq.exponent)
            raise ExtensionNeeded("sqrt residue obstruction",
                                  defect_exp=dq)
    raise SolveError("sqrt descent exceeded its step budget")


def _digit_candidates(field: Tower, pos: Fraction):
    """Digit monomials at exponent `pos`, over all residue classes."""
    g = field.monomial(pos)
    yield g
    for t in range(field.r):
        layer = field.layers[t]
        if layer.ramified:
            continue
        try:
            m2 = field.monomial(pos - layer.q)
        except TowerError:
            continue
        u = m2 * field.generator(t)
        yield u
        yield g + u


def _finish_sqrt(w: TowerElement, mono: TowerElement, floor: ValExp) -> TowerElement:
    root = w * mono
    # |w - w*| <= |defect| / |2w| = floor + 1 for unit w
    root_prec = ValExp(floor.exponent + 1 + mono.val().exponent)
    return root.with_prec(_worse(root.prec, root_prec))


def _adjoin_unit_sqrt(field: Tower, unit: TowerElement, w: TowerElement,
                      mono: TowerElement, defect_exp: Fraction) -> TowerElement:
    """Adjoin h = sqrt(unit) - w: h^2 = (unit - w^2) - 2w h."""
    a = unit - w.square()
    b = -w.double()
    q = defect_exp / 2
    ramified = not field.in_group(q)
    field._append_layer(q, field.lift_element(a), field.lift_element(b),
                        kind="adaptive", ramified=ramified)
    logger.info("adjoined %s sqrt layer (|h| = 2^%s), tower dim %d",
                "ramified" if ramified else "unramified", q, field.dim)
    h = field.generator(field.r - 1)
    return (field.lift_element(w) + h) * field.lift_element(mono)


def _adjoin_binomial_sqrt(field: Tower, target: TowerElement,
                          q: Fraction) -> TowerElement:
    field._append_layer(q, field.lift_element(target), None,
                        kind="adaptive", ramified=True)
    logger.info("adjoined binomial sqrt layer (|h| = 2^%s), dim %d",
                q, field.dim)
    return field.generator(field.r - 1)


def solve_quadratic(field: Tower, B, C, allow_extend: bool = False):
    """Both roots of z^2 - B z + C = 0 via the discriminant square root."""
    disc = B * B - C.double().double()
    s = sqrt_descend(field, disc, allow_extend=allow_extend)
    B = field.lift_element(B) if isinstance(B, TowerElement) else field.embed(B)
    r1 = (B + s).halve()
    r2 = (B - s).halve()
    return r1, r2


def newton_solve(f: Callable[[TowerElement], Tuple[TowerElement, TowerElement]],
                 seed: TowerElement,
                 seed_disk,
                 target_precision: ValExp,
                 budget: int = 64) -> TowerElement:
    """Newton iteration from a Hensel-certified seed.

    f maps z to (f(z), f'(z)).  Requires |f(seed)| < |f'(seed)|^2 at the
    seed center (both exponents reported on failure).  The returned root
    satisfies |f(root)| <= target_precision and lies in seed_disk.
    """
    fv, dv = f(seed)
    dq = dv.val()
    rq = fv.val_or_floor()
    if not rq < ValExp(2 * dq.exponent):
        raise SolveError(
            "Hensel criterion not met: |f| = 2^%s vs |f'|^2 = 2^%s"
            % (rq.serialize(), ValExp(2 * dq.exponent).serialize()),
            residual=rq, derivative=dq)
    z = seed
    last = None
    for _ in range(budget):
        if fv.is_indistinguishable_from_zero():
            _check_in_disk(z, seed_disk)
            return z
        z = z - fv * dv.inverse()
        fv, dv = f(z)
        rq = fv.val_or_floor()
        if fv.is_indistinguishable_from_zero() or rq <= target_precision:
            _check_in_disk(z, seed_disk)
            return z
        if last is not None and not rq < last:
            raise SolveError("Newton residual stalled at 2^%s" % rq.serialize(),
                             residual=rq, derivative=dv.val_or_floor())
        last = rq
    raise SolveError("Newton budget exhausted", residual=rq)


def _check_in_disk(z: TowerElement, disk) -> None:
    if disk is None:
        return
    d = (z - disk.center).val_or_floor()
    if not disk.member_has(d):
        raise SolveError("solved root at distance 2^%s is outside the seed disk"
                         % d.serialize())


def lift_precision(f, x: TowerElement, new_precision: ValExp,
                   seed_disk=None) -> TowerElement:
    """Re-run Newton from a solved root to tighten its residual."""
    fv, _ = f(x)
    if not new_precision < fv.val_or_floor():
        logger.warning("lift_precision: target not tighter than current; no-op")
        return x
    return newton_solve(f, x, seed_disk, new_precision)
