"""Exact graded coefficient rings.

The coefficient ring is a free commutative Q-algebra on weighted generators,
truncated at a fixed total weight D.  Conventions: a generator named ``p<n>``
(the class of a projective space of complex dimension n) has weight n, the
deformation parameter ``y`` has weight 1.  Truncation at weight D is a ring
homomorphism and doubles as the adic completion: every element with no
weight-0 constant part is nilpotent, so the truncated ring is local and each
element is either a unit or nilpotent.

No floating point is used anywhere; coefficients are `fractions.Fraction`.
All values are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Mapping

Rational = Fraction


class RingMismatchError(ValueError):
    """Operands live in different rings (generators or truncation differ)."""


class MissingAssignmentError(ValueError):
    """A specialization map left some generator unassigned."""


class NotUnitError(ValueError):
    """Inversion was requested for a non-unit element."""


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text)


@dataclass(frozen=True)
class Ring:
    """A weighted polynomial ring Q[g_1, ..., g_m] truncated at total weight D."""

    generators: tuple[tuple[str, int], ...]
    truncation: int

    def __post_init__(self):
        seen = set()
        for name, weight in self.generators:
            if weight <= 0:
                raise ValueError(f"generator {name!r} must have positive weight")
            if name in seen:
                raise ValueError(f"duplicate generator {name!r}")
            seen.add(name)
        if self.truncation < 0:
            raise ValueError("truncation must be non-negative")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.generators)

    @property
    def weights(self) -> tuple[int, ...]:
        return tuple(weight for _, weight in self.generators)

    def index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.generators):
            if n == name:
                return i
        raise KeyError(f"no generator named {name!r}")

    def weight_of(self, exponents: tuple[int, ...]) -> int:
        return sum(e * w for e, w in zip(exponents, self.weights))

    def zero(self) -> "GradedPoly":
        return GradedPoly(self, {})

    def one(self) -> "GradedPoly":
        return self.scalar(1)

    def scalar(self, value) -> "GradedPoly":
        c = Fraction(value)
        if c == 0:
            return self.zero()
        return GradedPoly(self, {(0,) * len(self.generators): c})

    def gen(self, name: str, power: int = 1) -> "GradedPoly":
        i = self.index(name)
        exps = [0] * len(self.generators)
        exps[i] = power
        if self.weight_of(tuple(exps)) > self.truncation:
            return self.zero()
        return GradedPoly(self, {tuple(exps): Fraction(1)})

    def extend(self, extra: Iterable[tuple[str, int]], truncation: int | None = None) -> "Ring":
        return Ring(self.generators + tuple(extra),
                    self.truncation if truncation is None else truncation)

    def to_json(self) -> dict:
        return {"generators": [{"name": n, "weight": w} for n, w in self.generators],
                "truncation": self.truncation}

    @staticmethod
    def from_json(obj: dict) -> "Ring":
        gens = tuple((g["name"], g["weight"]) for g in obj["generators"])
        return Ring(gens, obj["truncation"])


def rational_ring(truncation: int = 0) -> Ring:
    """The plain rationals, as the ring with no generators."""
    return Ring((), truncation)


class GradedPoly:
    """Sparse polynomial over Q in the weighted generators of a Ring.

    Terms above the ring's truncation weight are never stored; zero
    coefficients are never stored.  Instances are immutable by convention.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring: Ring, terms: Mapping[tuple[int, ...], Fraction]):
        object.__setattr__(self, "ring", ring)
        clean = {}
        for exps, coeff in terms.items():
            if coeff == 0:
                continue
            if ring.weight_of(exps) > ring.truncation:
                continue
            clean[exps] = coeff
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("GradedPoly is immutable")

    # -- basic predicates -------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.ring.generators), Fraction(0))

    def is_unit(self) -> bool:
        """Units of the truncated local ring: nonzero constant part."""
        return self.constant_term() != 0

    def is_nilpotent(self) -> bool:
        return self.constant_term() == 0

    def min_weight(self) -> int:
        """Smallest weight among stored terms; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return min(self.ring.weight_of(e) for e in self.terms)

    def max_weight(self) -> int:
        if not self.terms:
            return 0
        return max(self.ring.weight_of(e) for e in self.terms)

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "GradedPoly"):
        if self.ring != other.ring:
            raise RingMismatchError("operands live in different rings")

    def __add__(self, other: "GradedPoly") -> "GradedPoly":
        self._check(other)
        out = dict(self.terms)
        for exps, coeff in other.terms.items():
            s = out.get(exps, Fraction(0)) + coeff
            if s == 0:
                out.pop(exps, None)
            else:
                out[exps] = s
        return GradedPoly(self.ring, out)

    def __neg__(self) -> "GradedPoly":
        return GradedPoly(self.ring, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "GradedPoly") -> "GradedPoly":
        return self + (-other)

    def __mul__(self, other) -> "GradedPoly":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check(other)
        ring = self.ring
        weights = ring.weights
        cap = ring.truncation
        wa = {e: sum(x * w for x, w in zip(e, weights)) for e in self.terms}
        wb = {e: sum(x * w for x, w in zip(e, weights)) for e in other.terms}
        out: dict[tuple[int, ...], Fraction] = {}
        for ea, ca in self.terms.items():
            da = wa[ea]
            for eb, cb in other.terms.items():
                if da + wb[eb] > cap:
                    continue
                key = tuple(x + y for x, y in zip(ea, eb))
                s = out.get(key, Fraction(0)) + ca * cb
                if s == 0:
                    out.pop(key, None)
                else:
                    out[key] = s
        return GradedPoly(ring, out)

    __rmul__ = __mul__

    def scale(self, value) -> "GradedPoly":
        c = Fraction(value)
        if c == 0:
            return self.ring.zero()
        return GradedPoly(self.ring, {e: c * t for e, t in self.terms.items()})

    def __pow__(self, n: int) -> "GradedPoly":
        if n < 0:
            return self.inverse() ** (-n)
        result = self.ring.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def inverse(self) -> "GradedPoly":
        """Inverse of a unit: geometric series in the nilpotent part."""
        c = self.constant_term()
        if c == 0:
            raise NotUnitError("cannot invert: zero constant part")
        n = self - self.ring.scalar(c)          # nilpotent part
        u = n.scale(Fraction(-1, 1) / c)
        result = self.ring.one()
        power = self.ring.one()
        for _ in range(self.ring.truncation):
            power = power * u
            if power.is_zero():
                break
            result = result + power
        return result.scale(Fraction(1) / c)

    def truncate(self, weight: int) -> "GradedPoly":
        """Drop all terms of weight exceeding the bound (within the ring)."""
        keep = {e: c for e, c in self.terms.items() if self.ring.weight_of(e) <= weight}
        return GradedPoly(self.ring, keep)

    def weight_part(self, weight: int) -> "GradedPoly":
        keep = {e: c for e, c in self.terms.items() if self.ring.weight_of(e) == weight}
        return GradedPoly(self.ring, keep)

    def coefficient(self, exponents: tuple[int, ...]) -> Fraction:
        return self.terms.get(tuple(exponents), Fraction(0))

    # -- ring maps ----------------------------------------------------------

    def specialize(self, phi: Mapping[str, "GradedPoly"], target: Ring) -> "GradedPoly":
        """Apply the ring homomorphism sending each generator to phi[name].

        Every generator of the source ring must be assigned, and each image
        must have weight at most the generator's own weight so that the
        homomorphism respects truncation.
        """
        images = []
        for name, weight in self.ring.generators:
            if name not in phi:
                raise MissingAssignmentError(f"no assignment for generator {name!r}")
            img = phi[name]
            if img.ring != target:
                raise RingMismatchError(f"image of {name!r} lives in the wrong ring")
            if img.max_weight() > weight:
                raise ValueError(f"image of {name!r} exceeds weight {weight}")
            images.append(img)
        return _eval_images(self, images, target)

    def substitute(self, phi: Mapping[str, "GradedPoly"], target: Ring) -> "GradedPoly":
        """Evaluate at nilpotent-or-heavier arguments.

        Dual-direction counterpart of specialize: every image must have
        minimal weight at least the generator's weight, so terms the source
        truncation discarded would land beyond the target truncation anyway
        (requires target truncation <= source truncation).
        """
        if target.truncation > self.ring.truncation:
            raise ValueError("substitution target cannot extend the truncation")
        images = []
        for name, weight in self.ring.generators:
            if name not in phi:
                raise MissingAssignmentError(f"no assignment for generator {name!r}")
            img = phi[name]
            if img.ring != target:
                raise RingMismatchError(f"image of {name!r} lives in the wrong ring")
            if not img.is_zero() and img.min_weight() < weight:
                raise ValueError(f"image of {name!r} is lighter than weight {weight}")
            images.append(img)
        return _eval_images(self, images, target)

    def promote(self, target: Ring) -> "GradedPoly":
        """Reinterpret in a ring containing the same-named generators."""
        phi = {name: target.gen(name) for name, _ in self.ring.generators}
        return self.specialize(phi, target)

    # -- ordering, equality, serialization ----------------------------------

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms in graded-lex order: by total weight, then by exponent vector."""
        return sorted(self.terms.items(), key=lambda item: (self.ring.weight_of(item[0]), item[0]))

    def __eq__(self, other) -> bool:
        return (isinstance(other, GradedPoly)
                and self.ring == other.ring and self.terms == other.terms)

    def __hash__(self):
        return hash((self.ring, frozenset(self.terms.items())))

    def __repr__(self):
        return f"GradedPoly({self.render()})"

    def render(self) -> str:
        """Canonical text form, terms in graded-lex order."""
        if not self.terms:
            return "0"
        parts = []
        for exps, coeff in self.sorted_terms():
            factors = []
            for (name, _), e in zip(self.ring.generators, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(coeff)
            if not factors:
                body = format_rational(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([format_rational(mag)] + factors)
            if not parts:
                parts.append(body if coeff > 0 else "-" + body)
            else:
                parts.append((" + " if coeff > 0 else " - ") + body)
        return "".join(parts)

    def to_json(self) -> dict:
        return {"generators": [{"name": n, "weight": w} for n, w in self.ring.generators],
                "truncation": self.ring.truncation,
                "terms": [{"exponents": list(e), "coeff": format_rational(c)}
                          for e, c in self.sorted_terms()]}

    @staticmethod
    def from_json(obj: dict) -> "GradedPoly":
        ring = Ring.from_json(obj)
        terms = {tuple(t["exponents"]): parse_rational(t["coeff"]) for t in obj["terms"]}
        return GradedPoly(ring, terms)


def _eval_images(poly: GradedPoly, images: list[GradedPoly], target: Ring) -> GradedPoly:
    """Evaluate a polynomial on images of its generators, caching powers."""
    pows: list[dict[int, GradedPoly]] = [{0: target.one()} for _ in images]

    def power(i: int, e: int) -> GradedPoly:
        cache = pows[i]
        if e not in cache:
            k = max(k0 for k0 in cache if k0 <= e)
            val = cache[k]
            while k < e:
                val = val * images[i]
                k += 1
                cache[k] = val
        return cache[e]

    out = target.zero()
    for exps, coeff in poly.terms.items():
        term = target.scalar(coeff)
        for i, e in enumerate(exps):
            if e and not term.is_zero():
                term = term * power(i, e)
        out = out + term
    return out


def poly_arith(op: str, a: GradedPoly, b: GradedPoly | None = None) -> GradedPoly:
    """Named dispatch over the ring operations (add, mul, neg, scalar_mul)."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "scalar_mul":
        # b must be a constant polynomial here
        if b is None or b.max_weight() != 0:
            raise ValueError("scalar_mul expects a constant")
        return a.scale(b.constant_term())
    raise ValueError(f"unknown operation {op!r}")


def binomial(n: int, k: int) -> Fraction:
    """C(n, k) for integer n (possibly negative), k >= 0, as a Fraction."""
    if k < 0:
        return Fraction(0)
    if n >= 0:
        return Fraction(comb(n, k)) if k <= n else Fraction(0)
    num = Fraction(1)
    for i in range(k):
        num *= Fraction(n - i)
    return num / factorial(k)


# -- canonical text parser ---------------------------------------------------

class PolyParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (column {position + 1})")
        self.position = position


def parse_poly(text: str, ring: Ring) -> GradedPoly:
    """Parse the canonical text rendering back into a polynomial.

    Grammar: poly := ['-'] term (('+'|'-') term)*;
             term := factor ('*' factor)*;
             factor := rational | generator ['^' int].
    """
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, "", len(text))

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_factor() -> GradedPoly:
        kind, value, at = take()
        if kind == "number":
            return ring.scalar(Fraction(value))
        if kind == "name":
            if value not in ring.names:
                raise PolyParseError(f"unknown generator {value!r}", at)
            power = 1
            if peek()[0] == "caret":
                take()
                kind2, value2, at2 = take()
                if kind2 != "number" or "/" in value2:
                    raise PolyParseError("expected integer exponent", at2)
                power = int(value2)
            return ring.gen(value, power)
        raise PolyParseError(f"unexpected token {value!r}", at)

    def parse_term() -> GradedPoly:
        result = parse_factor()
        while peek()[0] == "star":
            take()
            result = result * parse_factor()
        return result

    negate = False
    if peek()[0] == "minus":
        take()
        negate = True
    result = parse_term()
    if negate:
        result = -result
    while peek()[0] in ("plus", "minus"):
        kind, _, _ = take()
        term = parse_term()
        result = result + (term if kind == "plus" else -term)
    if pos != len(tokens):
        raise PolyParseError("trailing input", peek()[2])
    return result


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == "+":
            out.append(("plus", "+", i)); i += 1
        elif ch in "-−":
            out.append(("minus", "-", i)); i += 1
        elif ch in "*·":
            out.append(("star", "*", i)); i += 1
        elif ch == "^":
            out.append(("caret", "^", i)); i += 1
        elif ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            if j < len(text) and text[j] == "/":
                k = j + 1
                while k < len(text) and text[k].isdigit():
                    k += 1
                if k == j + 1:
                    raise PolyParseError("malformed rational", j)
                out.append(("number", text[i:k], i)); i = k
            else:
                out.append(("number", text[i:j], i)); i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            out.append(("name", text[i:j], i)); i = j
        else:
            raise PolyParseError(f"unexpected character {ch!r}", i)
    return out
