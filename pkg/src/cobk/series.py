"""Truncated power/Laurent series over a graded coefficient ring.

A Series stores coefficients for exponents ``lowest..order``.  ``order`` may
be None, meaning the series is exact: every unstored coefficient is genuinely
zero (a Laurent polynomial).  Operations track the guaranteed order
pessimistically and never silently extend precision.

Division and the exp/log/revert family may require an explicit target order
when the inputs are exact but the result is an honest infinite series.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial

from .rings import GradedPoly, Ring, RingMismatchError

INF = float("inf")


class NonUnitError(ValueError):
    """Division by a series whose leading coefficient is not invertible."""


class CompositionDomainError(ValueError):
    """Inner series of a composition has an invertible constant term."""


class ReversionError(ValueError):
    """Series cannot be reverted (wrong valuation or non-unit leading term)."""


class UnsupportedInputError(ValueError):
    """Input is not a rational expression the expansion engine can handle."""


class PrecisionError(ValueError):
    """A result order is needed but cannot be inferred from the inputs."""


class Series:
    """Dense truncated series in one formal variable over GradedPoly."""

    __slots__ = ("ring", "variable", "lowest", "coeffs", "order")

    def __init__(self, ring: Ring, variable: str, lowest: int,
                 coeffs: list[GradedPoly], order: int | None):
        # normalize: drop exact zeros at the low end; for exact series also at
        # the high end, so representations are canonical
        lo = lowest
        cs = list(coeffs)
        while cs and cs[0].is_zero():
            cs.pop(0)
            lo += 1
        if order is None:
            while cs and cs[-1].is_zero():
                cs.pop()
            if not cs:
                lo = 0
        else:
            if len(cs) != order - lo + 1:
                raise ValueError("coefficient list does not match declared span")
        object.__setattr__(self, "ring", ring)
        object.__setattr__(self, "variable", variable)
        object.__setattr__(self, "lowest", lo)
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "order", order)

    def __setattr__(self, name, value):
        raise AttributeError("Series is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_dict(ring: Ring, variable: str, data: dict[int, GradedPoly],
                  order: int | None) -> "Series":
        nz = {n: c for n, c in data.items() if not c.is_zero()}
        if order is not None:
            nz = {n: c for n, c in nz.items() if n <= order}
        if not nz:
            if order is None:
                return Series(ring, variable, 0, [], None)
            return Series(ring, variable, order + 1, [], order)
        lo = min(nz)
        hi = max(nz) if order is None else order
        coeffs = [nz.get(n, ring.zero()) for n in range(lo, hi + 1)]
        return Series(ring, variable, lo, coeffs, order)

    @staticmethod
    def zero(ring: Ring, variable: str, order: int | None = None) -> "Series":
        return Series.from_dict(ring, variable, {}, order)

    @staticmethod
    def monomial(ring: Ring, variable: str, exponent: int = 1,
                 coeff: GradedPoly | None = None) -> "Series":
        c = ring.one() if coeff is None else coeff
        return Series.from_dict(ring, variable, {exponent: c}, None)

    @staticmethod
    def constant(ring: Ring, variable: str, value: GradedPoly) -> "Series":
        return Series.from_dict(ring, variable, {0: value}, None)

    # -- inspection ----------------------------------------------------------

    def is_exact(self) -> bool:
        return self.order is None

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    @property
    def span_high(self) -> int:
        """Highest stored exponent."""
        if self.order is not None:
            return self.order
        return self.lowest + len(self.coeffs) - 1 if self.coeffs else self.lowest - 1

    def coefficient(self, n: int) -> GradedPoly:
        if self.order is not None and n > self.order:
            raise PrecisionError(f"coefficient of exponent {n} is beyond order {self.order}")
        if n < self.lowest or n > self.span_high:
            return self.ring.zero()
        return self.coeffs[n - self.lowest]

    def to_dict(self) -> dict[int, GradedPoly]:
        return {self.lowest + i: c for i, c in enumerate(self.coeffs) if not c.is_zero()}

    def _ord(self):
        return INF if self.order is None else self.order

    def _check(self, other: "Series"):
        if self.ring != other.ring:
            raise RingMismatchError("series over different coefficient rings")

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Series") -> "Series":
        self._check(other)
        order = min(self._ord(), other._ord())
        out = self.to_dict()
        for n, c in other.to_dict().items():
            out[n] = out.get(n, self.ring.zero()) + c
        if order is not INF:
            out = {n: c for n, c in out.items() if n <= order}
        return Series.from_dict(self.ring, self.variable, out,
                                None if order == INF else int(order))

    def __neg__(self) -> "Series":
        return Series(self.ring, self.variable, self.lowest,
                      [-c for c in self.coeffs], self.order)

    def __sub__(self, other: "Series") -> "Series":
        return self + (-other)

    def __mul__(self, other: "Series") -> "Series":
        self._check(other)
        order = min(self._ord() + other.lowest, other._ord() + self.lowest)
        out: dict[int, GradedPoly] = {}
        for i, a in self.to_dict().items():
            for j, b in other.to_dict().items():
                if i + j > order:
                    continue
                prod = a * b
                if prod.is_zero():
                    continue
                key = i + j
                out[key] = out.get(key, self.ring.zero()) + prod
        return Series.from_dict(self.ring, self.variable, out,
                                None if order == INF else int(order))

    def scale(self, value) -> "Series":
        if isinstance(value, GradedPoly):
            return Series(self.ring, self.variable, self.lowest,
                          [c * value for c in self.coeffs], self.order)
        return Series(self.ring, self.variable, self.lowest,
                      [c.scale(value) for c in self.coeffs], self.order)

    def shift(self, k: int) -> "Series":
        return Series(self.ring, self.variable, self.lowest + k, list(self.coeffs),
                      None if self.order is None else self.order + k)

    def truncate_order(self, new_order: int) -> "Series":
        if self.order is not None and new_order > self.order:
            raise PrecisionError("cannot extend a series beyond its guaranteed order")
        data = {n: c for n, c in self.to_dict().items() if n <= new_order}
        return Series.from_dict(self.ring, self.variable, data, new_order)

    def __pow__(self, n: int) -> "Series":
        if n < 0:
            return self.inverse() ** (-n)
        result = Series.monomial(self.ring, self.variable, 0)
        for _ in range(n):
            result = result * self
        return result

    # -- division ------------------------------------------------------------

    def _pivot(self) -> tuple[int, GradedPoly]:
        """Smallest exponent carrying a unit coefficient; everything below
        must be nilpotent."""
        for i, c in enumerate(self.coeffs):
            if c.is_unit():
                return self.lowest + i, c
            if not c.is_zero() and not c.is_nilpotent():
                break
        raise NonUnitError("series has no invertible leading coefficient")

    def inverse(self, order: int | None = None) -> "Series":
        if self.is_zero():
            raise NonUnitError("cannot invert the zero series")
        v, c = self._pivot()
        cinv = c.inverse()
        # write self = c q^v (1 + h); invert the (1 + h) factor geometrically
        h = {n - v: coeff * cinv for n, coeff in self.to_dict().items() if n != v}
        D = self.ring.truncation
        h_low = min(h) if h else 0
        terminating = all(p.is_nilpotent() for p in h.values())
        if self.order is None:
            if terminating:
                res_order = None
            elif order is None:
                raise PrecisionError("inverse of an exact non-terminating series "
                                     "requires an explicit order")
            else:
                res_order = order
        else:
            natural = self.order - 2 * v
            res_order = natural if order is None else min(order, natural)
        cap = None if res_order is None else res_order + v + (D * -h_low if h_low < 0 else 0)
        geom: dict[int, GradedPoly] = {0: self.ring.one()}
        power: dict[int, GradedPoly] = {0: self.ring.one()}
        neg_h = {n: -p for n, p in h.items()}
        limit = D * (1 + max(0, -h_low)) + (0 if cap is None else max(cap, 0)) \
            + len(self.coeffs) + 2
        for _ in range(limit):
            power = _dict_mul(self.ring, power, neg_h, cap)
            if not power:
                break
            for n, p in power.items():
                geom[n] = geom.get(n, self.ring.zero()) + p
        else:
            raise NonUnitError("series inverse does not terminate")
        out = {n - v: p * cinv for n, p in geom.items()}
        if res_order is not None:
            out = {n: p for n, p in out.items() if n <= res_order}
        return Series.from_dict(self.ring, self.variable, out, res_order)

    def div(self, other: "Series", order: int | None = None) -> "Series":
        self._check(other)
        if other.order is None:
            v, _ = other._pivot()
            tail_nilpotent = all(p.is_nilpotent()
                                 for n, p in other.to_dict().items() if n != v)
            if tail_nilpotent:
                inv = other.inverse()
            elif order is None:
                raise PrecisionError("division by an exact non-terminating series "
                                     "requires an explicit order")
            else:
                inv = other.inverse(order=order - self.lowest)
        else:
            inv = other.inverse()
        result = self * inv
        if order is not None and (result.order is None or result.order > order):
            result = result.truncate_order(order)
        return result

    # -- composition and friends ----------------------------------------------

    def compose(self, inner: "Series") -> "Series":
        """Substitute ``inner`` for the variable of ``self``.

        The inner series needs a nilpotent (or zero) constant term; the outer
        series must be a power series (no negative exponents).
        """
        self._check(inner)
        if self.lowest < 0:
            raise CompositionDomainError("outer series has negative exponents")
        if inner.lowest < 0:
            raise CompositionDomainError("inner series has negative exponents")
        g0 = inner.coefficient(0) if inner.lowest <= 0 <= inner.span_high else self.ring.zero()
        if inner.lowest == 0 and g0.is_unit():
            raise CompositionDomainError("inner series has a unit constant term")
        mixed = inner.lowest == 0 and not g0.is_zero()
        v = max(inner.lowest, 1)
        candidates = []
        if inner.order is not None:
            candidates.append(inner.order)
        if self.order is not None:
            if mixed:
                candidates.append(self.order - self.ring.truncation)
            else:
                candidates.append(v * (self.order + 1) - 1)
        cap = min(candidates) if candidates else None
        g = inner.to_dict()
        out: dict[int, GradedPoly] = {}
        power: dict[int, GradedPoly] = {0: self.ring.one()}
        kmax = self.span_high
        for k in range(0, kmax + 1):
            if k > 0:
                power = _dict_mul(self.ring, power, g, cap)
                if not power:
                    break
            fk = self.coefficient(k) if k >= self.lowest else self.ring.zero()
            if fk.is_zero():
                continue
            for n, p in power.items():
                term = p * fk
                if term.is_zero():
                    continue
                out[n] = out.get(n, self.ring.zero()) + term
        if cap is not None:
            out = {n: c for n, c in out.items() if n <= cap}
        return Series.from_dict(self.ring, inner.variable, out, cap)

    def map_coeffs(self, fn, target: Ring, variable: str | None = None) -> "Series":
        data = {n: fn(c) for n, c in self.to_dict().items()}
        return Series.from_dict(target, variable or self.variable, data, self.order)

    def rename(self, variable: str) -> "Series":
        return Series(self.ring, variable, self.lowest, list(self.coeffs), self.order)

    # -- equality / serialization ----------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, Series) and self.ring == other.ring
                and self.variable == other.variable and self.order == other.order
                and self.lowest == other.lowest and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.ring, self.variable, self.lowest, self.coeffs, self.order))

    def agrees_with(self, other: "Series", through: int) -> bool:
        """Coefficientwise equality for all exponents <= through."""
        lo = min(self.lowest, other.lowest)
        return all(self.coefficient(n) == other.coefficient(n)
                   for n in range(lo, through + 1))

    def render(self) -> str:
        if self.is_zero():
            body = "0"
        else:
            pieces = []
            for n, c in sorted(self.to_dict().items()):
                var = "" if n == 0 else (self.variable if n == 1 else f"{self.variable}^{n}")
                text = c.render()
                negative = False
                if len(c.terms) == 1 and text.startswith("-"):
                    negative = True
                    text = text[1:]
                elif "+" in text[1:] or "-" in text[1:]:
                    text = f"({text})"
                if var:
                    chunk = var if text == "1" else f"{text}*{var}"
                else:
                    chunk = text
                pieces.append((negative, chunk))
            first_neg, first = pieces[0]
            body = ("-" if first_neg else "") + first
            for neg, chunk in pieces[1:]:
                body += (" - " if neg else " + ") + chunk
        if self.order is not None:
            body += f" + O({self.variable}^{self.order + 1})"
        return body

    def __repr__(self):
        return f"Series({self.render()})"

    def to_json(self) -> dict:
        return {"variable": self.variable, "lowest": self.lowest, "order": self.order,
                "ring": self.ring.to_json(),
                "coefficients": [c.to_json() for c in self.coeffs]}

    @staticmethod
    def from_json(obj: dict) -> "Series":
        coeffs = [GradedPoly.from_json(c) for c in obj["coefficients"]]
        if "ring" in obj:
            ring = Ring.from_json(obj["ring"])
        elif coeffs:
            ring = coeffs[0].ring
        else:
            ring = Ring((), 0)
        return Series(ring, obj["variable"], obj["lowest"], coeffs, obj["order"])


def _dict_mul(ring: Ring, a: dict[int, GradedPoly], b: dict[int, GradedPoly],
              cap: int | None) -> dict[int, GradedPoly]:
    out: dict[int, GradedPoly] = {}
    for i, ca in a.items():
        for j, cb in b.items():
            n = i + j
            if cap is not None and n > cap:
                continue
            prod = ca * cb
            if prod.is_zero():
                continue
            out[n] = out.get(n, ring.zero()) + prod
    return {n: c for n, c in out.items() if not c.is_zero()}


def series_arith(op: str, a: Series, b: Series, order: int | None = None) -> Series:
    """Named dispatch: add, mul, div (div takes an optional target order)."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "div":
        return a.div(b, order=order)
    raise ValueError(f"unknown operation {op!r}")


def compose(f: Series, g: Series) -> Series:
    return f.compose(g)


# -- exp / log ---------------------------------------------------------------

def exp(f: Series, order: int | None = None) -> Series:
    """Exponential of a series with no weight-0 constant term."""
    if f.lowest < 0:
        raise CompositionDomainError("exp of a series with negative exponents")
    c = f.coefficient(0) if f.lowest <= 0 <= f.span_high else f.ring.zero()
    if c.is_unit():
        raise CompositionDomainError("exp requires a nilpotent constant term")
    fp = f - Series.constant(f.ring, f.variable, c)
    cap = _exp_log_cap(f, fp, order)
    # e^f = e^c * sum fp^k / k!
    series_part: dict[int, GradedPoly] = {0: f.ring.one()}
    power: dict[int, GradedPoly] = {0: f.ring.one()}
    fac = 1
    g = fp.to_dict()
    limit = (cap if cap is not None else 0) + f.ring.truncation + len(f.coeffs) + 2
    for k in range(1, max(limit, 1) + 1):
        power = _dict_mul(f.ring, power, g, cap)
        if not power:
            break
        fac *= k
        inv = Fraction(1, fac)
        for n, p in power.items():
            series_part[n] = series_part.get(n, f.ring.zero()) + p.scale(inv)
    else:
        raise PrecisionError("exp of an exact non-terminating series requires an order")
    expc = poly_exp(c)
    out = {n: p * expc for n, p in series_part.items()}
    if cap is not None:
        out = {n: p for n, p in out.items() if n <= cap}
    return Series.from_dict(f.ring, f.variable, out, cap)


def log(f: Series, order: int | None = None) -> Series:
    """Logarithm of a series with constant term 1 up to positive weight."""
    if f.lowest != 0:
        raise CompositionDomainError("log requires a unit constant term")
    c = f.coefficient(0)
    if c.constant_term() != 1:
        raise CompositionDomainError("log requires constant term 1 up to higher weight")
    h = f.scale(c.inverse()) - Series.monomial(f.ring, f.variable, 0)
    cap = _exp_log_cap(f, h, order)
    out: dict[int, GradedPoly] = {0: poly_log1p(c - f.ring.one())}
    power: dict[int, GradedPoly] = {0: f.ring.one()}
    g = h.to_dict()
    limit = (cap if cap is not None else 0) + f.ring.truncation + len(f.coeffs) + 2
    for k in range(1, limit + 1):
        power = _dict_mul(f.ring, power, g, cap)
        if not power:
            break
        sign = Fraction((-1) ** (k + 1), k)
        for n, p in power.items():
            out[n] = out.get(n, f.ring.zero()) + p.scale(sign)
    else:
        raise PrecisionError("log of an exact non-terminating series requires an order")
    if cap is not None:
        out = {n: c0 for n, c0 in out.items() if n <= cap}
    return Series.from_dict(f.ring, f.variable, out, cap)


def exp_log(op: str, f: Series, order: int | None = None) -> Series:
    if op == "exp":
        return exp(f, order)
    if op == "log":
        return log(f, order)
    raise ValueError(f"unknown operation {op!r}")


def _exp_log_cap(f: Series, tail: Series, order: int | None) -> int | None:
    if f.order is not None:
        return f.order if order is None else min(order, f.order)
    if order is not None:
        return order
    if all(c.is_nilpotent() for c in tail.to_dict().values()):
        return None
    raise PrecisionError("result order required for an exact non-terminating input")


def poly_exp(c: GradedPoly) -> GradedPoly:
    out = c.ring.one()
    power = c.ring.one()
    fac = 1
    for k in range(1, c.ring.truncation + 1):
        power = power * c
        if power.is_zero():
            break
        fac *= k
        out = out + power.scale(Fraction(1, fac))
    return out


def poly_log1p(n: GradedPoly) -> GradedPoly:
    out = n.ring.zero()
    power = n.ring.one()
    for k in range(1, n.ring.truncation + 1):
        power = power * n
        if power.is_zero():
            break
        out = out + power.scale(Fraction((-1) ** (k + 1), k))
    return out


# -- reversion ----------------------------------------------------------------

def revert(f: Series, order: int | None = None) -> Series:
    """Compositional inverse, by successive-coefficient solving.

    The result g satisfies compose(f, g) = identity to the guaranteed order;
    this is verified internally by back-substitution before returning.
    """
    if f.lowest != 1:
        raise ReversionError("reversion requires valuation exactly 1")
    f1 = f.coefficient(1)
    if not f1.is_unit():
        raise ReversionError("leading coefficient is not invertible")
    if f.order is None:
        if len(f.to_dict()) == 1:
            return Series.monomial(f.ring, f.variable, 1, f1.inverse())
        if order is None:
            raise PrecisionError("reversion of an exact series requires an order")
        target = order
    else:
        target = f.order if order is None else min(order, f.order)
    f1inv = f1.inverse()
    g: dict[int, GradedPoly] = {1: f1inv}
    fd = f.to_dict()
    for n in range(2, target + 1):
        acc: dict[int, GradedPoly] = {}
        power: dict[int, GradedPoly] = dict(g)
        for k in range(2, n + 1):
            power = _dict_mul(f.ring, power, g, n)
            if not power:
                break
            fk = fd.get(k)
            if fk is None:
                continue
            p = power.get(n)
            if p is None:
                continue
            acc[n] = acc.get(n, f.ring.zero()) + p * fk
        resid = acc.get(n, f.ring.zero())
        g[n] = -(resid * f1inv)
    result = Series.from_dict(f.ring, f.variable, g, target)
    check = f.compose(result)
    ident = Series.monomial(f.ring, result.variable, 1)
    through = check.order if check.order is not None else target
    if not check.agrees_with(ident, min(through, target)):
        raise ReversionError("internal back-substitution check failed")
    return result


# -- Bernoulli numbers ---------------------------------------------------------

class BernoulliCache:
    """B_0..B_N with the x/(e^x - 1) convention, so B_1 = -1/2.

    Extends on demand via the defining recurrence
    sum_{k=0}^{m} C(m+1, k) B_k = 0 for m >= 1.
    """

    def __init__(self):
        self._values: list[Fraction] = [Fraction(1)]

    def get(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError("Bernoulli index must be non-negative")
        while len(self._values) <= n:
            m = len(self._values)
            acc = sum(Fraction(comb(m + 1, k)) * self._values[k] for k in range(m))
            self._values.append(-acc / comb(m + 1, m))
        return self._values[n]

    def values(self, n: int) -> list[Fraction]:
        self.get(n)
        return list(self._values[: n + 1])


_BERNOULLI = BernoulliCache()


def bernoulli(n: int) -> Fraction:
    return _BERNOULLI.get(n)


# -- Laurent expansion at a root of unity ---------------------------------------

def expand_ratio_at(num: dict[int, GradedPoly], den: dict[int, GradedPoly],
                    zeta: GradedPoly, order: int, ring: Ring,
                    variable: str = "x") -> Series:
    """Laurent expansion in x of num(q)/den(q) under q = zeta * e^x.

    A zero of den at q = zeta of multiplicity m makes the result start at
    exponent -m.  Both num and den must be Laurent polynomials; zeta must be
    a unit of the coefficient ring.
    """
    if not zeta.is_unit():
        raise UnsupportedInputError("expansion point must be an invertible scalar")
    den = {n: c for n, c in den.items() if not c.is_zero()}
    num = {n: c for n, c in num.items() if not c.is_zero()}
    if not den:
        raise UnsupportedInputError("denominator is identically zero")
    spread = (max(den) - min(den)) if den else 0
    margin = spread + ring.truncation + 1
    target = order + 2 * margin + 1
    n_series = _substitute_exp(num, zeta, target, ring, variable)
    d_series = _substitute_exp(den, zeta, target, ring, variable)
    if d_series.is_zero():
        raise UnsupportedInputError("denominator vanishes to the computed order")
    return n_series.div(d_series, order=order)


def _substitute_exp(poly: dict[int, GradedPoly], zeta: GradedPoly, order: int,
                    ring: Ring, variable: str) -> Series:
    out: dict[int, GradedPoly] = {}
    zeta_inv = zeta.inverse()
    for n, c in poly.items():
        zn = zeta ** n if n >= 0 else zeta_inv ** (-n)
        base = c * zn
        fac = 1
        npow = 1
        for j in range(order + 1):
            if j > 0:
                fac *= j
                npow *= n
            if npow == 0 and j > 0:
                break
            term = base.scale(Fraction(npow, fac))
            if term.is_zero():
                continue
            out[j] = out.get(j, ring.zero()) + term
    return Series.from_dict(ring, variable, out, order)
