"""The symplectic loop space: rational functions of q over a K-theory model.

A RationalLoop is kept in canonical partial-fraction form: a Laurent
polynomial part plus principal parts c/(1 - z^-1 q)^j at finitely many
invertible scalar pole locations z.  Pole locations and coefficients are
complexified (Gaussian-rational phases) so fourth roots of unity are exact;
the coefficient ring otherwise supplies the scalars, and a nilpotent scalar
factor such as 1 - y q is a unit of the truncated Laurent ring and expands
away rather than contributing a pole.

The residue symplectic form, polarization projectors, polarization-change
kernels, dilaton shifts, and the geometric-sum twisting exponents all live
here.  Residue-orientation conventions are fixed once by CALIBRATION_SIGN.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .kring import Algebra, AlgElem, MultClass, SplitBundle, adams_on_coefficient
from .rings import GradedPoly, Ring, binomial
from .series import Series, UnsupportedInputError, expand_ratio_at

# The one-time residue-orientation calibration: with the conventions below,
# the canonical tensor 1/(1 - q^-1 x) acts as the identity on the standard
# negative space.  Multiplies the bare -Res_{0,inf} recipe; never mutated.
CALIBRATION_SIGN = -1


class UndeclaredPoleError(ValueError):
    """Residue requested at a location that is neither a declared pole nor
    cleanly separated from the declared ones."""


class PoleConfigError(ValueError):
    """Pole configuration incompatible with the requested decomposition."""


# -- complexified scalars ------------------------------------------------------

@dataclass(frozen=True)
class CScalar:
    """Element of the coefficient ring extended by a Gaussian imaginary unit."""

    re: GradedPoly
    im: GradedPoly

    @staticmethod
    def real(x: GradedPoly) -> "CScalar":
        return CScalar(x, x.ring.zero())

    @staticmethod
    def rational(ring: Ring, value) -> "CScalar":
        return CScalar(ring.scalar(value), ring.zero())

    @staticmethod
    def imag_unit(ring: Ring) -> "CScalar":
        return CScalar(ring.zero(), ring.one())

    @property
    def ring(self) -> Ring:
        return self.re.ring

    def is_zero(self) -> bool:
        return self.re.is_zero() and self.im.is_zero()

    def is_real(self) -> bool:
        return self.im.is_zero()

    def is_unit(self) -> bool:
        return (self.re * self.re + self.im * self.im).is_unit()

    def is_nilpotent(self) -> bool:
        return self.re.is_nilpotent() and self.im.is_nilpotent()

    def __add__(self, other: "CScalar") -> "CScalar":
        return CScalar(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "CScalar") -> "CScalar":
        return CScalar(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "CScalar":
        return CScalar(-self.re, -self.im)

    def __mul__(self, other: "CScalar") -> "CScalar":
        return CScalar(self.re * other.re - self.im * other.im,
                       self.re * other.im + self.im * other.re)

    def scale(self, value) -> "CScalar":
        return CScalar(self.re.scale(value), self.im.scale(value))

    def conj(self) -> "CScalar":
        return CScalar(self.re, -self.im)

    def inverse(self) -> "CScalar":
        norm = self.re * self.re + self.im * self.im
        ninv = norm.inverse()
        return CScalar(self.re * ninv, -(self.im * ninv))

    def __pow__(self, n: int) -> "CScalar":
        if n < 0:
            return self.inverse() ** (-n)
        out = CScalar(self.ring.one(), self.ring.zero())
        for _ in range(n):
            out = out * self
        return out

    def render(self) -> str:
        if self.im.is_zero():
            return self.re.render()
        return f"({self.re.render()}) + ({self.im.render()})*i"

    def to_json(self) -> dict:
        return {"re": self.re.to_json(), "im": self.im.to_json()}

    @staticmethod
    def from_json(obj: dict) -> "CScalar":
        return CScalar(GradedPoly.from_json(obj["re"]), GradedPoly.from_json(obj["im"]))


def root_of_unity(ring: Ring, order: int, power: int = 1) -> CScalar:
    """Exact root-of-unity tags; orders dividing 4 are representable."""
    if order not in (1, 2, 4):
        raise UnsupportedInputError(
            f"roots of unity of order {order} are not representable exactly here")
    table = {0: CScalar.rational(ring, 1), 1: CScalar.imag_unit(ring),
             2: CScalar.rational(ring, -1),
             3: -CScalar.imag_unit(ring)}
    step = 4 // order
    return table[(step * power) % 4]


# -- complexified algebra elements ------------------------------------------------

@dataclass(frozen=True)
class CxElem:
    re: AlgElem
    im: AlgElem

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.re) and all(c.is_zero() for c in self.im)

    def is_real(self) -> bool:
        return all(c.is_zero() for c in self.im)

    def to_json(self) -> dict:
        return {"re": [c.to_json() for c in self.re],
                "im": [c.to_json() for c in self.im]}

    @staticmethod
    def from_json(obj: dict) -> "CxElem":
        return CxElem(tuple(GradedPoly.from_json(c) for c in obj["re"]),
                      tuple(GradedPoly.from_json(c) for c in obj["im"]))


class CxAlgebra:
    """Complexification of a finite-rank algebra, for loop coefficients."""

    def __init__(self, algebra: Algebra):
        self.algebra = algebra

    def zero(self) -> CxElem:
        z = self.algebra.zero()
        return CxElem(z, z)

    def one(self) -> CxElem:
        return CxElem(self.algebra.one(), self.algebra.zero())

    def from_real(self, a: AlgElem) -> CxElem:
        return CxElem(a, self.algebra.zero())

    def from_scalar(self, s: CScalar) -> CxElem:
        return CxElem(self.algebra.from_scalar(s.re), self.algebra.from_scalar(s.im))

    def add(self, a: CxElem, b: CxElem) -> CxElem:
        return CxElem(self.algebra.add(a.re, b.re), self.algebra.add(a.im, b.im))

    def sub(self, a: CxElem, b: CxElem) -> CxElem:
        return CxElem(self.algebra.sub(a.re, b.re), self.algebra.sub(a.im, b.im))

    def neg(self, a: CxElem) -> CxElem:
        return CxElem(self.algebra.neg(a.re), self.algebra.neg(a.im))

    def mul(self, a: CxElem, b: CxElem) -> CxElem:
        alg = self.algebra
        return CxElem(alg.sub(alg.mul(a.re, b.re), alg.mul(a.im, b.im)),
                      alg.add(alg.mul(a.re, b.im), alg.mul(a.im, b.re)))

    def scalar_mul(self, s: CScalar, a: CxElem) -> CxElem:
        alg = self.algebra
        return CxElem(alg.sub(alg.scalar_mul(s.re, a.re), alg.scalar_mul(s.im, a.im)),
                      alg.add(alg.scalar_mul(s.re, a.im), alg.scalar_mul(s.im, a.re)))

    def chi(self, a: CxElem) -> CScalar:
        return CScalar(self.algebra.chi(a.re), self.algebra.chi(a.im))


# -- rational loops ------------------------------------------------------------------

class RationalLoop:
    """Canonical partial-fraction form: Laurent part plus principal parts.

    laurent: exponent -> CxElem.  principal: pole location z -> tuple of
    CxElem, entry j-1 holding the coefficient of (1 - z^-1 q)^(-j).
    """

    __slots__ = ("algebra", "cx", "laurent", "principal")

    def __init__(self, algebra: Algebra, laurent: dict[int, CxElem],
                 principal: dict[CScalar, tuple[CxElem, ...]]):
        self.algebra = algebra
        self.cx = CxAlgebra(algebra)
        self.laurent = {n: c for n, c in laurent.items() if not c.is_zero()}
        clean: dict[CScalar, tuple[CxElem, ...]] = {}
        for loc, parts in principal.items():
            trimmed = list(parts)
            while trimmed and trimmed[-1].is_zero():
                trimmed.pop()
            if trimmed:
                clean[loc] = tuple(trimmed)
        self.principal = clean

    # -- constructors -----------------------------------------------------------

    @staticmethod
    def zero(algebra: Algebra) -> "RationalLoop":
        return RationalLoop(algebra, {}, {})

    @staticmethod
    def from_laurent(algebra: Algebra, data: dict[int, AlgElem | CxElem]) -> "RationalLoop":
        cx = CxAlgebra(algebra)
        lau = {n: (c if isinstance(c, CxElem) else cx.from_real(c))
               for n, c in data.items()}
        return RationalLoop(algebra, lau, {})

    @staticmethod
    def from_scalar_laurent(algebra: Algebra, data: dict[int, GradedPoly]) -> "RationalLoop":
        cx = CxAlgebra(algebra)
        return RationalLoop(algebra, {n: cx.from_real(algebra.from_scalar(c))
                                      for n, c in data.items()}, {})

    @staticmethod
    def principal_part(algebra: Algebra, location: CScalar,
                       coeffs: Iterable[AlgElem | CxElem]) -> "RationalLoop":
        if not location.is_unit():
            raise PoleConfigError("pole location must be an invertible scalar")
        cx = CxAlgebra(algebra)
        parts = tuple(c if isinstance(c, CxElem) else cx.from_real(c) for c in coeffs)
        return RationalLoop(algebra, {}, {location: parts})

    @staticmethod
    def from_fraction(algebra: Algebra, num: dict[int, AlgElem | CxElem],
                      factors: list[tuple[CScalar, int]]) -> "RationalLoop":
        """num(q) / prod (1 - lam q)^mult, canonicalized.

        Unit lam contribute a pole at 1/lam; nilpotent lam make the factor a
        unit of the truncated Laurent ring and are expanded away.
        """
        cx = CxAlgebra(algebra)
        work = {n: (c if isinstance(c, CxElem) else cx.from_real(c))
                for n, c in num.items()}
        unit_factors: dict[CScalar, int] = {}
        for lam, mult in factors:
            if mult < 0:
                raise PoleConfigError("factor multiplicities must be >= 0")
            if mult == 0 or lam.is_zero():
                if lam.is_zero() and mult > 0:
                    raise PoleConfigError("zero scalar cannot appear in a pole factor")
                continue
            if lam.is_unit():
                unit_factors[lam] = unit_factors.get(lam, 0) + mult
            elif lam.is_nilpotent():
                inv = _nilpotent_factor_inverse(cx, lam)
                for _ in range(mult):
                    work = _laurent_mul(cx, work, inv)
            else:
                raise PoleConfigError("pole factor scalar is neither unit nor nilpotent")
        return _partial_fractions(algebra, work, unit_factors)

    # -- inspection ----------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.laurent and not self.principal

    def is_laurent(self) -> bool:
        return not self.principal

    def is_real(self) -> bool:
        return (all(c.is_real() for c in self.laurent.values())
                and all(loc.is_real() and all(c.is_real() for c in parts)
                        for loc, parts in self.principal.items()))

    def value_at_zero(self) -> CxElem:
        if any(n < 0 for n in self.laurent):
            raise PoleConfigError("loop has a pole at q = 0")
        out = self.laurent.get(0, self.cx.zero())
        for parts in self.principal.values():
            for c in parts:
                out = self.cx.add(out, c)
        return out

    def value_at_infinity(self) -> CxElem:
        if any(n > 0 for n in self.laurent):
            raise PoleConfigError("loop has a pole at q = infinity")
        return self.laurent.get(0, self.cx.zero())

    # -- arithmetic ------------------------------------------------------------------

    def _check(self, other: "RationalLoop"):
        if self.algebra is not other.algebra and self.algebra.ring != other.algebra.ring:
            raise PoleConfigError("loops over different algebras")

    def __add__(self, other: "RationalLoop") -> "RationalLoop":
        self._check(other)
        lau = dict(self.laurent)
        for n, c in other.laurent.items():
            lau[n] = self.cx.add(lau.get(n, self.cx.zero()), c)
        pp: dict[CScalar, list[CxElem]] = {loc: list(parts)
                                           for loc, parts in self.principal.items()}
        for loc, parts in other.principal.items():
            cur = pp.setdefault(loc, [])
            for j, c in enumerate(parts):
                while len(cur) <= j:
                    cur.append(self.cx.zero())
                cur[j] = self.cx.add(cur[j], c)
        return RationalLoop(self.algebra, lau,
                            {loc: tuple(parts) for loc, parts in pp.items()})

    def __neg__(self) -> "RationalLoop":
        return RationalLoop(self.algebra,
                            {n: self.cx.neg(c) for n, c in self.laurent.items()},
                            {loc: tuple(self.cx.neg(c) for c in parts)
                             for loc, parts in self.principal.items()})

    def __sub__(self, other: "RationalLoop") -> "RationalLoop":
        return self + (-other)

    def scale_elem(self, w: CxElem) -> "RationalLoop":
        return RationalLoop(self.algebra,
                            {n: self.cx.mul(w, c) for n, c in self.laurent.items()},
                            {loc: tuple(self.cx.mul(w, c) for c in parts)
                             for loc, parts in self.principal.items()})

    def scale_scalar(self, s: CScalar) -> "RationalLoop":
        return RationalLoop(self.algebra,
                            {n: self.cx.scalar_mul(s, c) for n, c in self.laurent.items()},
                            {loc: tuple(self.cx.scalar_mul(s, c) for c in parts)
                             for loc, parts in self.principal.items()})

    def __mul__(self, other: "RationalLoop") -> "RationalLoop":
        self._check(other)
        na, fa = self._to_fraction()
        nb, fb = other._to_fraction()
        num = _laurent_mul(self.cx, na, nb)
        factors: dict[CScalar, int] = dict(fa)
        for lam, m in fb.items():
            factors[lam] = factors.get(lam, 0) + m
        return RationalLoop.from_fraction(self.algebra, num,
                                          [(lam, m) for lam, m in factors.items()])

    def _to_fraction(self) -> tuple[dict[int, CxElem], dict[CScalar, int]]:
        """Rewrite as num / prod (1 - z^-1 q)^mult over the declared poles."""
        factors = {loc: len(parts) for loc, parts in self.principal.items()}
        den: dict[int, CxElem] = {0: self.cx.one()}
        lams = {loc: loc.inverse() for loc in factors}
        for loc, mult in factors.items():
            for _ in range(mult):
                den = _linear_factor_mul(self.cx, den, lams[loc])
        num = _laurent_mul(self.cx, self.laurent or {}, den) if self.laurent else {}
        for loc, parts in self.principal.items():
            for j, c in enumerate(parts, start=1):
                if c.is_zero():
                    continue
                partial = {0: c}
                for other_loc, mult in factors.items():
                    reps = mult - j if other_loc == loc else mult
                    for _ in range(reps):
                        partial = _linear_factor_mul(self.cx, partial, lams[other_loc])
                for n, v in partial.items():
                    num[n] = self.cx.add(num.get(n, self.cx.zero()), v)
        num = {n: c for n, c in num.items() if not c.is_zero()}
        fac = {loc.inverse(): mult for loc, mult in factors.items()}
        return num, fac

    def substitute_q_inverse(self) -> "RationalLoop":
        """The loop q -> 1/q; poles move to their inverse locations."""
        num, factors = self._to_fraction()
        # num(1/q) / prod (1 - lam / q)^m: multiply through by q^sum(m)
        total = sum(factors.values())
        new_num: dict[int, CxElem] = {}
        for n, c in num.items():
            new_num[total - n] = c
        new_factors: list[tuple[CScalar, int]] = []
        scale = CScalar.rational(self.algebra.ring, 1)
        for lam, m in factors.items():
            # (q - lam) = (-lam)(1 - q/lam)
            new_factors.append((lam.inverse(), m))
            scale = scale * ((-lam) ** m)
        inv_scale = scale.inverse()
        new_num = {n: self.cx.scalar_mul(inv_scale, c) for n, c in new_num.items()}
        return RationalLoop.from_fraction(self.algebra, new_num, new_factors)

    def map_coefficients(self, scalar_map, target_algebra: Algebra) -> "RationalLoop":
        """Apply a coefficient-ring map to every scalar (for degenerations
        such as y -> 0).  Pole locations are mapped as well and re-merged."""
        cx = CxAlgebra(target_algebra)

        def map_elem(c: CxElem) -> CxElem:
            return CxElem(tuple(scalar_map(x) for x in c.re),
                          tuple(scalar_map(x) for x in c.im))

        num, factors = self._to_fraction()
        new_num = {n: map_elem(c) for n, c in num.items()}
        new_factors = [(CScalar(scalar_map(lam.re), scalar_map(lam.im)), m)
                       for lam, m in factors.items()]
        return RationalLoop.from_fraction(target_algebra, new_num, new_factors)

    # -- equality / serialization ------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, RationalLoop)
                and self.algebra.ring == other.algebra.ring
                and self.laurent == other.laurent and self.principal == other.principal)

    def _sorted_poles(self):
        return sorted(self.principal.items(), key=lambda kv: kv[0].render())

    def render(self) -> str:
        chunks = []
        for n in sorted(self.laurent):
            c = self.laurent[n]
            body = _render_cx(c)
            mono = "" if n == 0 else ("q" if n == 1 else f"q^{n}")
            chunks.append(f"{body}*{mono}" if mono else body)
        for loc, parts in self._sorted_poles():
            for j, c in enumerate(parts, start=1):
                if c.is_zero():
                    continue
                chunks.append(f"{_render_cx(c)}/(1 - ({loc.render()})^-1 q)^{j}")
        return " + ".join(chunks) if chunks else "0"

    def to_json(self) -> dict:
        lau = sorted(self.laurent.items())
        return {"laurent": {"exponents": [n for n, _ in lau],
                            "coefficients": [c.to_json() for _, c in lau]},
                "poles": [{"location": loc.to_json(), "multiplicity": len(parts),
                           "coefficients": [c.to_json() for c in parts]}
                          for loc, parts in self._sorted_poles()]}

    @staticmethod
    def from_json(obj: dict, algebra: Algebra) -> "RationalLoop":
        lau = {n: CxElem.from_json(c)
               for n, c in zip(obj["laurent"]["exponents"],
                               obj["laurent"]["coefficients"])}
        pp = {CScalar.from_json(p["location"]):
              tuple(CxElem.from_json(c) for c in p["coefficients"])
              for p in obj["poles"]}
        return RationalLoop(algebra, lau, pp)


def _render_cx(c: CxElem) -> str:
    re = "(" + ", ".join(x.render() for x in c.re) + ")"
    if c.is_real():
        return re
    im = "(" + ", ".join(x.render() for x in c.im) + ")"
    return f"{re}+i{im}"


# -- Laurent-dict helpers over CxElem ---------------------------------------------------

def _laurent_mul(cx: CxAlgebra, a: dict[int, CxElem], b: dict[int, CxElem]) -> dict[int, CxElem]:
    out: dict[int, CxElem] = {}
    for i, ca in a.items():
        for j, cb in b.items():
            prod = cx.mul(ca, cb)
            if prod.is_zero():
                continue
            key = i + j
            out[key] = cx.add(out.get(key, cx.zero()), prod)
    return {n: c for n, c in out.items() if not c.is_zero()}


def _linear_factor_mul(cx: CxAlgebra, a: dict[int, CxElem], lam: CScalar) -> dict[int, CxElem]:
    """Multiply by (1 - lam q)."""
    out = dict(a)
    for n, c in a.items():
        shifted = cx.scalar_mul(-lam, c)
        key = n + 1
        out[key] = cx.add(out.get(key, cx.zero()), shifted) if key in out else shifted
    return {n: c for n, c in out.items() if not c.is_zero()}


def _nilpotent_factor_inverse(cx: CxAlgebra, lam: CScalar) -> dict[int, CxElem]:
    """(1 - lam q)^-1 = sum lam^k q^k, finite by nilpotency."""
    ring = lam.ring
    out: dict[int, CxElem] = {}
    power = CScalar.rational(ring, 1)
    for k in range(0, ring.truncation + 2):
        if power.is_zero():
            break
        out[k] = cx.from_scalar(power)
        power = power * lam
    return out


def _separation(a: CScalar, b: CScalar) -> CScalar:
    d = a - b
    if not d.is_unit():
        raise PoleConfigError("pole locations are not separable")
    return d


def _partial_fractions(algebra: Algebra, num: dict[int, CxElem],
                       unit_factors: dict[CScalar, int]) -> RationalLoop:
    """Canonicalize num / prod (1 - lam q)^mult with all lam units."""
    cx = CxAlgebra(algebra)
    ring = algebra.ring
    if not num:
        return RationalLoop.zero(algebra)
    locs = {lam: lam.inverse() for lam in unit_factors}
    loc_list = list(unit_factors.items())
    for i in range(len(loc_list)):
        for j in range(i + 1, len(loc_list)):
            _separation(locs[loc_list[i][0]], locs[loc_list[j][0]])
    principal: dict[CScalar, tuple[CxElem, ...]] = {}
    for lam, mult in loc_list:
        zeta = locs[lam]
        # expand num(q) * prod_{other} (1 - mu q)^(-m) in w = 1 - zeta^-1 q,
        # through w^(mult-1); the w^t coefficient feeds (1 - z^-1 q)^(t - mult)
        coeffs = _expand_at_pole(cx, num, zeta, mult)
        for mu, m in loc_list:
            if mu == lam:
                continue
            factor = _expand_factor_inverse(ring, mu, zeta, m, mult)
            coeffs = _wseries_mul(cx, coeffs, factor, mult)
        principal[zeta] = tuple(reversed(coeffs))
    # Laurent part by exact division of the corrected numerator
    den: dict[int, CxElem] = {0: cx.one()}
    lead_scalar = CScalar.rational(ring, 1)
    for lam, mult in loc_list:
        for _ in range(mult):
            den = _linear_factor_mul(cx, den, lam)
        lead_scalar = lead_scalar * ((-lam) ** mult)
    residual = dict(num)
    for lam, mult in loc_list:
        zeta = locs[lam]
        parts = principal[zeta]
        for j, c in enumerate(parts, start=1):
            if c.is_zero():
                continue
            partial = {0: c}
            for mu, m in loc_list:
                reps = m - j if mu == lam else m
                for _ in range(reps):
                    partial = _linear_factor_mul(cx, partial, mu)
            for n, v in partial.items():
                residual[n] = cx.sub(residual.get(n, cx.zero()), v)
    residual = {n: c for n, c in residual.items() if not c.is_zero()}
    laurent = _laurent_divide_exact(cx, residual, den, lead_scalar)
    return RationalLoop(algebra, laurent, principal)


def _expand_at_pole(cx: CxAlgebra, num: dict[int, CxElem], zeta: CScalar,
                    order: int) -> list[CxElem]:
    """Coefficients of num(q) in powers of w = 1 - zeta^-1 q, i.e. q = zeta(1 - w),
    through w^(order-1)."""
    out = [cx.zero() for _ in range(order)]
    for n, c in num.items():
        zn = zeta ** n
        base = cx.scalar_mul(zn, c)
        for t in range(order):
            coeff = binomial(n, t) * Fraction((-1) ** t)
            if coeff == 0:
                continue
            term = CxElem(tuple(x.scale(coeff) for x in base.re),
                          tuple(x.scale(coeff) for x in base.im))
            out[t] = cx.add(out[t], term)
    return out


def _expand_factor_inverse(ring: Ring, mu: CScalar, zeta: CScalar,
                           mult: int, order: int) -> list[CScalar]:
    """Coefficients of (1 - mu q)^(-mult) in powers of w = 1 - zeta^-1 q."""
    # 1 - mu q = (1 - mu zeta) + mu zeta w = A (1 + (mu zeta / A) w)
    a = _separation(CScalar.rational(ring, 1), mu * zeta)
    ainv = a.inverse()
    ratio = mu * zeta * ainv
    lead = ainv ** mult
    out = []
    for t in range(order):
        coeff = binomial(-mult, t)
        out.append(lead * (ratio ** t).scale(coeff))
    return out


def _wseries_mul(cx: CxAlgebra, a: list[CxElem], b: list[CScalar],
                 order: int) -> list[CxElem]:
    out = [cx.zero() for _ in range(order)]
    for i, ca in enumerate(a):
        if ca.is_zero():
            continue
        for j, sb in enumerate(b):
            if i + j >= order:
                break
            out[i + j] = cx.add(out[i + j], cx.scalar_mul(sb, ca))
    return out


def _laurent_divide_exact(cx: CxAlgebra, num: dict[int, CxElem],
                          den: dict[int, CxElem], lead_scalar: CScalar
                          ) -> dict[int, CxElem]:
    """Exact division of Laurent polynomials; raises if a remainder is left.

    The denominator's top coefficient must be lead_scalar times the unit.
    """
    if not num:
        return {}
    out: dict[int, CxElem] = {}
    work = dict(num)
    dtop = max(den)
    qmin = min(num) - min(den)
    inv = lead_scalar.inverse()
    while work:
        ntop = max(work)
        if ntop - dtop < qmin:
            raise PoleConfigError("denominator does not divide the numerator")
        c = work[ntop]
        q_exp = ntop - dtop
        factor = cx.scalar_mul(inv, c)
        out[q_exp] = cx.add(out.get(q_exp, cx.zero()), factor)
        for dn, dc in den.items():
            prod = cx.mul(factor, dc)
            if prod.is_zero():
                continue
            key = dn + q_exp
            cur = cx.sub(work.get(key, cx.zero()), prod)
            if cur.is_zero():
                work.pop(key, None)
            else:
                work[key] = cur
        if ntop in work:
            raise PoleConfigError("division step failed to cancel the top term")
    return out


# -- residues ---------------------------------------------------------------------

def residue(f: RationalLoop, pole) -> CxElem:
    """Exact residue of f dq at 'zero', 'infinity', or ('at', location).

    Residues at declared poles come from the canonical form; at an undeclared
    location the residue is zero provided the location separates cleanly from
    every declared pole (otherwise the question is ill-posed y-adically).
    """
    cx = f.cx
    if pole == "zero":
        return f.laurent.get(-1, cx.zero())
    if pole == "infinity":
        out = cx.neg(f.laurent.get(-1, cx.zero()))
        for loc, parts in f.principal.items():
            out = cx.add(out, cx.scalar_mul(loc, parts[0]))
        return out
    if isinstance(pole, tuple) and len(pole) == 2 and pole[0] == "at":
        loc = pole[1]
        if not isinstance(loc, CScalar) or not loc.is_unit():
            raise UndeclaredPoleError("residue location must be an invertible scalar")
        for stored, parts in f.principal.items():
            if stored == loc:
                return cx.scalar_mul(-loc, parts[0])
        for stored in f.principal:
            if not (stored - loc).is_unit():
                raise UndeclaredPoleError(
                    "location is not separable from a declared pole")
        return cx.zero()
    raise UndeclaredPoleError(f"unknown pole specification {pole!r}")


def _residue_dlog_zero(f: RationalLoop) -> CxElem:
    """Residue at 0 of f dq/q: the q^0 coefficient of the expansion at 0
    (principal parts all evaluate to their coefficients there)."""
    cx = f.cx
    out = f.laurent.get(0, cx.zero())
    for parts in f.principal.values():
        for c in parts:
            out = cx.add(out, c)
    return out


def _residue_dlog_infinity(f: RationalLoop) -> CxElem:
    """Residue at infinity of f dq/q: minus the q^0 coefficient of the
    expansion at infinity, where principal parts vanish."""
    cx = f.cx
    return cx.neg(f.laurent.get(0, cx.zero()))


def total_residue(f: RationalLoop) -> CxElem:
    """Sum of residues of f dq over all poles including infinity."""
    cx = f.cx
    out = cx.add(residue(f, "zero"), residue(f, "infinity"))
    for loc in f.principal:
        out = cx.add(out, residue(f, ("at", loc)))
    return out


# -- the symplectic form ---------------------------------------------------------------

@dataclass(frozen=True)
class PairingConfig:
    """Twist class W (multiplied under chi), overall scale, and the Adams
    index of the loop-space component the inputs live in.

    With index r the inputs are understood through their pre-Adams
    presentations: the returned value is r Psi^r(pairing), matching
    (Psi^r a, Psi^r b)^(r) = r Psi^r(a, b).
    """

    twist: tuple = ()            # AlgElem; empty tuple means the unit
    scale: GradedPoly | None = None
    adams_index: int = 1

    def twist_elem(self, algebra: Algebra) -> AlgElem:
        return self.twist if self.twist else algebra.one()

    def scale_poly(self, ring: Ring) -> GradedPoly:
        return self.scale if self.scale is not None else ring.one()


def omega(f: RationalLoop, g: RationalLoop,
          cfg: PairingConfig | None = None) -> GradedPoly:
    """Omega(f, g) = -Res_{0, inf} (f(q), g(1/q)) dq/q with the configured
    twist, scale, and Adams index."""
    cfg = cfg or PairingConfig()
    f._check(g)
    algebra = f.algebra
    h = f * g.substitute_q_inverse()
    w = cfg.twist_elem(algebra)
    h = h.scale_elem(h.cx.from_real(w))
    chi_loop = _chi_loop(h)
    s = chi_loop.cx.add(_residue_dlog_zero(chi_loop), _residue_dlog_infinity(chi_loop))
    paired = chi_loop.cx.chi(s)      # chi on the point model is the identity
    if not paired.is_real():
        raise PoleConfigError("pairing value is not real")
    value = -paired.re
    value = value * cfg.scale_poly(algebra.ring)
    r = cfg.adams_index
    if r != 1:
        value = adams_on_coefficient(r, value).scale(r)
    return value


def _chi_loop(f: RationalLoop) -> RationalLoop:
    """Apply the counit coefficientwise, landing in the point model."""
    from .kring import builtin_model
    point = builtin_model("point", ring=f.algebra.ring)
    cx = CxAlgebra(point)

    def chi_elem(c: CxElem) -> CxElem:
        return CxElem((f.algebra.chi(c.re),), (f.algebra.chi(c.im),))

    return RationalLoop(point, {n: chi_elem(c) for n, c in f.laurent.items()},
                        {loc: tuple(chi_elem(c) for c in parts)
                         for loc, parts in f.principal.items()})


def hirzebruch_pairing_config(algebra: Algebra, tangent: SplitBundle,
                              cls: MultClass) -> PairingConfig:
    """Pairing twisted by the class of the tangent bundle, scaled by 1/t0."""
    from .kring import eval_class
    w = eval_class(cls, algebra, tangent, mode="adams_exponential")
    return PairingConfig(twist=w, scale=cls.t0.inverse(), adams_index=1)


# -- polarization ------------------------------------------------------------------------

@dataclass(frozen=True)
class Polarization:
    """Negative-space description: Laurent polynomials are always the positive
    space; the negative space is constraint-shaped, f(inf) = m f(0), with
    m = 0 the standard polarization, or induced by a two-variable kernel."""

    kind: str                      # "standard" | "constraint" | "kernel"
    multiplier: GradedPoly | None = None
    kernel: "Kernel | None" = None

    @staticmethod
    def standard() -> "Polarization":
        return Polarization(kind="standard")

    @staticmethod
    def constraint(multiplier: GradedPoly) -> "Polarization":
        return Polarization(kind="constraint", multiplier=multiplier)

    @staticmethod
    def from_kernel(kernel: "Kernel") -> "Polarization":
        return Polarization(kind="kernel", kernel=kernel)


def project(f: RationalLoop, pol: Polarization | None = None
            ) -> tuple[RationalLoop, RationalLoop]:
    """Split f = plus + minus with plus a Laurent polynomial and minus in the
    polarization's negative space; the decomposition is unique."""
    pol = pol or Polarization.standard()
    algebra = f.algebra
    cx = f.cx
    if pol.kind == "standard":
        plus = RationalLoop(algebra, dict(f.laurent), {})
        minus = RationalLoop(algebra, {}, dict(f.principal))
        return plus, minus
    if pol.kind == "constraint":
        m = pol.multiplier
        one_minus_m = m.ring.one() - m
        if not one_minus_m.is_unit():
            raise PoleConfigError("constraint multiplier must keep 1 - m invertible")
        total = cx.zero()
        for parts in f.principal.values():
            for c in parts:
                total = cx.add(total, c)
        const = cx.scalar_mul(CScalar.real(m * one_minus_m.inverse()), total)
        minus = RationalLoop(algebra, {0: const}, dict(f.principal))
        plus = f - minus
        if not plus.is_laurent():
            raise PoleConfigError("projection failed to produce a Laurent part")
        return plus, minus
    if pol.kind == "kernel":
        body = RationalLoop(algebra, {}, dict(f.principal))
        minus = tensor_polarization_map(pol.kernel, body)
        if minus.principal != f.principal:
            raise PoleConfigError("kernel does not fix the principal parts")
        plus = f - minus
        if not plus.is_laurent():
            raise PoleConfigError("projection failed to produce a Laurent part")
        return plus, minus
    raise ValueError(f"unknown polarization kind {pol.kind!r}")


def in_negative_space(f: RationalLoop, pol: Polarization | None = None) -> bool:
    plus, _ = project(f, pol)
    return plus.is_zero()


def hirzebruch_negative_space_check(f: RationalLoop,
                                    multiplier: GradedPoly | None = None) -> bool:
    """True iff f(inf) = m f(0) with both values finite; m defaults to y."""
    ring = f.algebra.ring
    m = multiplier if multiplier is not None else ring.gen("y")
    v0 = f.value_at_zero()
    vinf = f.value_at_infinity()
    target = f.cx.scalar_mul(CScalar.real(m), v0)
    return vinf == target


# -- polarization-change kernels --------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    """Two-variable kernel sum_m A_m(q) B_m(x) (q - x)^(-e_m), with A and B
    Laurent polynomials over the scalars.  The polarization map pairs it
    against f in q by residues, with x interpreted near infinity."""

    terms: tuple[tuple[tuple[tuple[int, CScalar], ...],
                       tuple[tuple[int, CScalar], ...], int], ...]

    @staticmethod
    def canonical(ring: Ring) -> "Kernel":
        one = CScalar.rational(ring, 1)
        # 1/(1 - x/q) = q/(q - x)
        return Kernel(terms=((((1, one),), ((0, one),), 1),))

    @staticmethod
    def hirzebruch(ring: Ring) -> "Kernel":
        one = CScalar.rational(ring, 1)
        t0inv = CScalar.real((ring.one() - ring.gen("y")).inverse())
        # (1/(1-y)) (1 - y x/q) / (1 - x/q) = 1/(1-y) + x/(q - x)
        return Kernel(terms=((((0, t0inv),), ((0, one),), 0),
                             (((0, one),), ((1, one),), 1)))

    def map_scalars(self, fn) -> "Kernel":
        def conv(pairs):
            return tuple((d, CScalar(fn(s.re), fn(s.im))) for d, s in pairs)
        return Kernel(terms=tuple((conv(a), conv(b), e) for a, b, e in self.terms))


def tensor_polarization_map(kernel: Kernel, f: RationalLoop) -> RationalLoop:
    """Apply the polarization kernel to f in the standard negative space.

    Equals CALIBRATION_SIGN times -Res_{0,inf} f(q) T(q, x) dq/q with the
    mixed factor expanded near x = infinity, which collapses to residues at
    the finite nonzero poles of f; the output is a rational loop in x.
    """
    if f.laurent:
        raise PoleConfigError("input must lie in the standard negative space")
    algebra = f.algebra
    ring = algebra.ring
    cx = f.cx
    out = RationalLoop.zero(algebra)
    sign = CScalar.rational(ring, CALIBRATION_SIGN)
    for a_pairs, b_pairs, e in kernel.terms:
        for zeta, parts in f.principal.items():
            for j, coeff in enumerate(parts, start=1):
                if coeff.is_zero():
                    continue
                # eps-expansion of A(q)/q at q = zeta(1 + eps), to eps^(j-1)
                a_series = [CScalar.rational(ring, 0) for _ in range(j)]
                for d, s in a_pairs:
                    zpow = zeta ** (d - 1)
                    for t in range(j):
                        a_series[t] = a_series[t] + (s * zpow).scale(binomial(d - 1, t))
                base = cx.scalar_mul(sign * (zeta.scale(Fraction((-1) ** j))), coeff)
                if e == 0:
                    res = cx.scalar_mul(a_series[j - 1], base)
                    term_loop = RationalLoop(algebra, {0: res}, {})
                else:
                    # (q - x)^(-e) = sum_i C(e+i-1, i) (-1)^i z^(i-e-i)... with
                    # (z - x)^(-e-i) = z^(-e-i) (1 - z^-1 x)^(-e-i)
                    term_loop = RationalLoop.zero(algebra)
                    for i in range(0, j):
                        t = j - 1 - i
                        if a_series[t].is_zero():
                            continue
                        k_scalar = (zeta ** (-e)).scale(
                            Fraction((-1) ** i) * binomial(e + i - 1, i))
                        scal = a_series[t] * k_scalar
                        if scal.is_zero():
                            continue
                        pp = [cx.zero()] * (e + i)
                        pp[e + i - 1] = cx.scalar_mul(scal, base)
                        term_loop = term_loop + RationalLoop(
                            algebra, {}, {zeta: tuple(pp)})
                # multiply by B(x)
                for d, s in b_pairs:
                    piece = term_loop.scale_scalar(s)
                    if d != 0:
                        piece = piece * RationalLoop(
                            algebra, {d: cx.one()}, {})
                    out = out + piece
    return out


# -- dilaton shifts ------------------------------------------------------------------------

def dilaton_shift(name: str, algebra: Algebra) -> RationalLoop:
    """The shift vector: 1 - q, or its image (1 - q)/(1 - y q) after the
    chi_{-y} twist (a Laurent polynomial once y is nilpotent)."""
    ring = algebra.ring
    one = ring.one()
    if name == "standard":
        return RationalLoop.from_scalar_laurent(algebra, {0: one, 1: -one})
    if name == "hirzebruch":
        y = ring.gen("y")
        cx = CxAlgebra(algebra)
        num = {0: cx.from_real(algebra.one()),
               1: cx.from_real(algebra.from_scalar(-one))}
        return RationalLoop.from_fraction(algebra, num, [(CScalar.real(y), 1)])
    raise ValueError(f"unknown dilaton shift {name!r}")


# -- geometric-sum twisting exponents ----------------------------------------------------------

@dataclass(frozen=True)
class GeomExponent:
    """sum_k coeff_k / (1 - q^(-k)): the logarithm of a twisting operator,
    with algebra-valued coefficients, in geometric-sum form."""

    terms: tuple[tuple[int, AlgElem], ...]

    def is_zero(self) -> bool:
        return not self.terms

    def to_loop(self, algebra: Algebra) -> RationalLoop:
        """Partial-fraction form; needs every k-th root of unity exact, so
        k must divide 4."""
        ring = algebra.ring
        cx = CxAlgebra(algebra)
        out = RationalLoop.zero(algebra)
        for k, coeff in self.terms:
            if k not in (1, 2, 4):
                raise UnsupportedInputError(
                    f"poles at {k}-th roots of unity are not representable")
            celem = cx.from_real(coeff)
            # 1/(1 - q^-k) = 1 - (1/k) sum_{z^k = 1} 1/(1 - z^-1 q)
            out = out + RationalLoop(algebra, {0: celem}, {})
            for p in range(k):
                z = root_of_unity(ring, k, p)
                part = cx.scalar_mul(CScalar.rational(ring, Fraction(-1, k)), celem)
                out = out + RationalLoop(algebra, {}, {z: (part,)})
        return out

    def expand_at_one(self, order: int, ring: Ring) -> list[Series]:
        """Laurent expansion under q = e^x, one series per basis coordinate."""
        if not self.terms:
            return []
        rank = len(self.terms[0][1])
        out: list[Series] = []
        for coord in range(rank):
            total = Series.zero(ring, "x", order)
            for k, coeff in self.terms:
                c = coeff[coord]
                if c.is_zero():
                    continue
                num = {0: c}
                den = {0: ring.one(), -k: -ring.one()}
                total = total + expand_ratio_at(num, den, ring.one(), order, ring)
            out.append(total)
        return out


def tw_mult_operator(cls: MultClass, algebra: Algebra, bundle: SplitBundle,
                     order: int = 8) -> tuple[GeomExponent, list[Series]]:
    """Exponent of the multiplication operator induced by twisting with a
    multiplicative class: sum_k (c_k / k)(sum_i a_i^k - rank) / (1 - q^(-k)),
    from summing the class of line^k q^(-km) geometrically over m >= 0.
    Returns the exponent and its Laurent expansion at q = e^x."""
    ring = algebra.ring
    terms = []
    vrank = bundle.virtual_rank()
    for k, ck in enumerate(cls.c, start=1):
        if ck.is_zero():
            continue
        acc = algebra.scalar_mul(ring.scalar(-vrank), algebra.one())
        for line, mult, sign in bundle.lines:
            powed = algebra.power(line, k)
            acc = algebra.add(acc, algebra.scalar_mul(ring.scalar(sign * mult), powed))
        if algebra.is_zero_elem(acc):
            continue
        coeff = algebra.scalar_mul(ck.scale(Fraction(1, k)), acc)
        if not algebra.is_zero_elem(coeff):
            terms.append((k, coeff))
    exponent = GeomExponent(terms=tuple(terms))
    return exponent, exponent.expand_at_one(order, ring)


# -- expansion of real loops at a root of unity ------------------------------------------------

def expand_loop_at_root_of_unity(f: RationalLoop, zeta: GradedPoly,
                                 order: int) -> list[Series]:
    """Laurent expansion of a real-coefficient loop under q = zeta e^x,
    one series per basis coordinate."""
    if not f.is_real():
        raise UnsupportedInputError("expansion requires real coefficients")
    num, factors = f._to_fraction()
    ring = f.algebra.ring
    rank = f.algebra.rank
    out = []
    den: dict[int, GradedPoly] = {0: ring.one()}
    for lam, m in factors.items():
        if not lam.is_real():
            raise UnsupportedInputError("expansion requires real pole locations")
        for _ in range(m):
            new: dict[int, GradedPoly] = dict(den)
            for n, c in den.items():
                key = n + 1
                add = -(lam.re * c)
                new[key] = new.get(key, ring.zero()) + add
            den = {n: c for n, c in new.items() if not c.is_zero()}
    for coord in range(rank):
        num_coord = {n: c.re[coord] for n, c in num.items() if not c.re[coord].is_zero()}
        if not num_coord:
            out.append(Series.zero(ring, "x", order))
            continue
        out.append(expand_ratio_at(num_coord, den, zeta, order, ring))
    return out
