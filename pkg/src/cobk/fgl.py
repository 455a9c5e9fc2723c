"""The universal formal group law and its genus specializations.

The universal logarithm over the rational cobordism coefficient ring is
z(u) = u + sum_n p_n u^(n+1)/(n+1), with p_n the class of complex projective
n-space (weight n).  The exponential is its compositional inverse.  From the
exponential we derive the K-theoretic orientation series u(t) (t standing for
1 - 1/q), the generator families b_k, a_k, c_k, and the classical genus
specializations: additive (p_n -> 0), classical K (p_n -> 1), and the
chi_{-y} deformation (p_n -> 1 + y + ... + y^n, unit scale 1 - y).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from . import series as S
from .rings import GradedPoly, Ring
from .series import PrecisionError, Series


class InconsistentUnitScaleError(ValueError):
    """Orientation series does not have the leading behavior t0 demands."""


@dataclass(frozen=True)
class FormalGroupLaw:
    """Paired logarithm/exponential series, exact to ``order``.

    log is z(u) in the variable u; exp is u(z) in the variable z; both have
    zero constant term and leading coefficient 1, and compose to the identity
    through ``order``.
    """

    log: Series
    exp: Series
    order: int

    @property
    def ring(self) -> Ring:
        return self.log.ring

    def validate(self) -> None:
        ident = Series.monomial(self.ring, self.exp.variable, 1)
        if not self.log.compose(self.exp).agrees_with(ident, self.order):
            raise ValueError("log and exp do not compose to the identity")


def from_log(log: Series) -> FormalGroupLaw:
    if log.order is None:
        raise PrecisionError("formal group law needs a truncated logarithm")
    exp = S.revert(log).rename("z")
    return FormalGroupLaw(log=log, exp=exp, order=log.order)


def mishchenko_log(order: int, truncation: int) -> FormalGroupLaw:
    """Universal formal group law with logarithm z(u) = u + sum p_n u^(n+1)/(n+1)."""
    if order < 2:
        raise ValueError("order must be at least 2")
    n_gens = min(order - 1, truncation)
    ring = Ring(tuple((f"p{n}", n) for n in range(1, n_gens + 1)), truncation)
    coeffs = {1: ring.one()}
    for n in range(1, order):
        if n <= n_gens:
            coeffs[n + 1] = ring.gen(f"p{n}").scale(Fraction(1, n + 1))
    log = Series.from_dict(ring, "u", coeffs, order)
    return from_log(log)


# -- genus specializations ----------------------------------------------------

GENUS_NAMES = ("additive", "classical_K", "hirzebruch")


@dataclass(frozen=True)
class Genus:
    """A specialization of the cobordism coefficient ring: the images of the
    p_n generators, the target ring, and the unit scale of the associated
    unstable multiplicative class."""

    name: str
    source: Ring
    target: Ring
    phi: tuple[tuple[str, GradedPoly], ...]
    t0: GradedPoly

    def phi_map(self) -> dict[str, GradedPoly]:
        return dict(self.phi)


def _p_index(name: str) -> int | None:
    if name.startswith("p") and name[1:].isdigit():
        return int(name[1:])
    return None


def make_genus(name: str, source: Ring, truncation: int | None = None) -> Genus:
    if name not in GENUS_NAMES:
        raise ValueError(f"unknown genus {name!r}")
    D = source.truncation if truncation is None else truncation
    carried = tuple((g, w) for g, w in source.generators if _p_index(g) is None)
    if name == "hirzebruch":
        extra = (("y", 1),) if "y" not in [g for g, _ in carried] else ()
        target = Ring(carried + extra, D)
    else:
        target = Ring(carried, D)
    phi: dict[str, GradedPoly] = {}
    for gen, _ in source.generators:
        n = _p_index(gen)
        if n is None:
            phi[gen] = target.gen(gen)
        elif name == "additive":
            phi[gen] = target.zero()
        elif name == "classical_K":
            phi[gen] = target.one()
        else:
            y = target.gen("y")
            phi[gen] = sum((y ** p for p in range(1, n + 1)), target.one())
    if name == "hirzebruch":
        t0 = target.one() - target.gen("y")
    else:
        t0 = target.one()
    return Genus(name, source, target, tuple(sorted(phi.items())), t0)


def specialize_genus(name: str, obj, truncation: int | None = None):
    """Apply a coefficient specialization to a law, series, table, or element.

    Genera whose images carry weight-0 parts (classical K, the chi_{-y}
    deformation) need the source object fully resolved: a coefficient the
    weight truncation discarded would reappear at weight 0 after the map.
    """
    if isinstance(obj, FormalGroupLaw):
        if name != "additive" and obj.ring.truncation < obj.order - 1:
            raise PrecisionError(
                "specializing needs the law resolved to weight >= order - 1")
        genus = make_genus(name, obj.ring, truncation)
        phi = genus.phi_map()
        log = obj.log.map_coeffs(lambda c: c.specialize(phi, genus.target), genus.target)
        exp = obj.exp.map_coeffs(lambda c: c.specialize(phi, genus.target), genus.target)
        return FormalGroupLaw(log=log, exp=exp, order=obj.order)
    if isinstance(obj, Series):
        genus = make_genus(name, obj.ring, truncation)
        phi = genus.phi_map()
        return obj.map_coeffs(lambda c: c.specialize(phi, genus.target), genus.target)
    if isinstance(obj, GeneratorTable):
        if name != "additive" and obj.ring.truncation < obj.order - 1:
            raise PrecisionError(
                "specializing needs the table resolved to weight >= order - 1")
        genus = make_genus(name, obj.ring, truncation)
        phi = genus.phi_map()

        def f(c):
            return c.specialize(phi, genus.target)

        return GeneratorTable(
            b=tuple(f(x) for x in obj.b), a=tuple(f(x) for x in obj.a),
            c=tuple(f(x) for x in obj.c), t0=f(obj.t0), log_t0=f(obj.log_t0),
            order=obj.order)
    if isinstance(obj, GradedPoly):
        genus = make_genus(name, obj.ring, truncation)
        return obj.specialize(genus.phi_map(), genus.target)
    raise TypeError(f"cannot specialize object of type {type(obj).__name__}")


# -- the two-variable group law -------------------------------------------------

def group_law(fgl: FormalGroupLaw, degree: int | None = None) -> Series:
    """F(x1, x2) = exp(log(x1) + log(x2)) as a series in x1 over the ring
    extended by a weight-1 generator x2.

    The result is guaranteed jointly: all coefficients of x1^a x2^b with
    a + b <= degree are exact (with coefficient weight capped by the ring).
    """
    N = fgl.order if degree is None else degree
    base = fgl.ring
    d_flat = N + min(base.truncation, N - 1)
    if fgl.order < d_flat:
        raise PrecisionError(
            f"group law at degree {N} needs the law to order {d_flat}")
    flat = Ring((("x1", 1), ("x2", 1)) + base.generators, d_flat)
    x1 = flat.gen("x1")
    x2 = flat.gen("x2")
    promote = {g: flat.gen(g) for g, _ in base.generators}
    log_k = {k: c.specialize(promote, flat) for k, c in fgl.log.to_dict().items()}
    exp_k = {k: c.specialize(promote, flat) for k, c in fgl.exp.to_dict().items()}
    w = _eval_nilpotent(log_k, x1, d_flat) + _eval_nilpotent(log_k, x2, d_flat)
    f_flat = _eval_nilpotent(exp_k, w, d_flat)
    ring2 = Ring((("x2", 1),) + base.generators, d_flat)
    slices: dict[int, dict[tuple, Fraction]] = {}
    for exps, coeff in f_flat.terms.items():
        a = exps[0]
        rest = exps[1:]
        slices.setdefault(a, {})[rest] = coeff
    data = {a: GradedPoly(ring2, terms) for a, terms in slices.items()}
    return Series.from_dict(ring2, "x1", data, N)


def _eval_nilpotent(coeffs: dict[int, GradedPoly], arg: GradedPoly,
                    kmax: int) -> GradedPoly:
    """Evaluate sum coeffs[k] * arg^k for a nilpotent argument."""
    if arg.is_unit():
        raise ValueError("argument must be nilpotent")
    ring = arg.ring
    out = ring.zero()
    power = ring.one()
    for k in range(0, kmax + 1):
        if k > 0:
            power = power * arg
            if power.is_zero():
                break
        c = coeffs.get(k)
        if c is not None:
            out = out + c * power
    return out


def two_var_eval(law: Series, a: GradedPoly, b: GradedPoly) -> GradedPoly:
    """Evaluate a stored two-variable law F(x1, x2) on nilpotent elements."""
    target = a.ring
    if b.ring != target:
        raise ValueError("arguments must live in the same ring")
    phi = {}
    for g, _ in law.ring.generators:
        phi[g] = b if g == "x2" else target.gen(g)
    out = target.zero()
    power = target.one()
    for k in range(0, law.span_high + 1):
        if k > 0:
            power = power * a
            if power.is_zero():
                break
        ck = law.coefficient(k) if k >= law.lowest else law.ring.zero()
        if not ck.is_zero():
            out = out + ck.substitute(phi, target) * power
    return out


def fgl_inverse(fgl: FormalGroupLaw) -> Series:
    """The inverse series i(u) = exp(-log(u)), satisfying F(u, i(u)) = 0."""
    return fgl.exp.compose(-fgl.log)


# -- orientation and generator extraction ----------------------------------------

def orientation_series(fgl: FormalGroupLaw, t0: GradedPoly) -> Series:
    """u(t): the reversion of t = 1 - e^(-t0 z(u)), as a series in t.

    For the universal law with t0 = 1 this is the K-theoretic orientation
    written in t = 1 - 1/q; a unit t0 rescales the logarithm by 1/t0.
    """
    if not t0.is_unit():
        raise InconsistentUnitScaleError("unit scale t0 must be invertible")
    m = Series.monomial(fgl.ring, "u", 0) - S.exp(-(fgl.log.scale(t0)))
    return S.revert(m).rename("t")


@dataclass(frozen=True)
class GeneratorTable:
    """Generator families read off the orientation series.

    b_k: coefficients of t^(k+1) in u(t), k >= 1.
    a_k: coefficients of t^k in log(t/u(t)) - log(t0), k >= 1.
    c_k: the q^(-k) family, scaled so the class exponent is sum c_k Psi^k / k;
         index 0 holds c_0 = -sum_{k>=1} c_k.
    The constant log(t0) is recorded separately, never folded into c_0.
    """

    b: tuple[GradedPoly, ...]
    a: tuple[GradedPoly, ...]
    c: tuple[GradedPoly, ...]
    t0: GradedPoly
    log_t0: GradedPoly
    order: int

    @property
    def ring(self) -> Ring:
        return self.t0.ring

    def is_stable(self) -> bool:
        return self.t0 == self.ring.one()

    def to_json(self) -> dict:
        return {"order": self.order,
                "t0": self.t0.to_json(),
                "log_t0": self.log_t0.to_json(),
                "b": [x.to_json() for x in self.b],
                "a": [x.to_json() for x in self.a],
                "c": [x.to_json() for x in self.c]}

    @staticmethod
    def from_json(obj: dict) -> "GeneratorTable":
        load = GradedPoly.from_json
        return GeneratorTable(
            b=tuple(load(x) for x in obj["b"]), a=tuple(load(x) for x in obj["a"]),
            c=tuple(load(x) for x in obj["c"]), t0=load(obj["t0"]),
            log_t0=load(obj["log_t0"]), order=obj["order"])


def extract_generators(orientation: Series, t0: GradedPoly) -> GeneratorTable:
    """Read b_k, a_k, c_k off an orientation series u(t).

    c_k is obtained by rewriting sum a_k (1 - w)^k as a series in w = 1/q and
    scaling the w^k coefficient by k; c_0 is pinned by requiring the whole
    family to sum to zero.  Entries are exact up to weight (order - 1) of the
    supplied orientation.
    """
    ring = orientation.ring
    if orientation.lowest != 1:
        raise InconsistentUnitScaleError("orientation must vanish at t = 0")
    N = orientation.order if orientation.order is not None else orientation.span_high
    lead = orientation.coefficient(1)
    if lead != t0.inverse():
        raise InconsistentUnitScaleError(
            "leading coefficient of the orientation must be 1/t0")
    b = tuple(orientation.coefficient(k + 1) for k in range(1, N))
    t_mono = Series.monomial(ring, orientation.variable, 1)
    ratio = t_mono.div(orientation)
    log_ratio = S.log(ratio)
    log_t0 = log_ratio.coefficient(0)
    a = tuple(log_ratio.coefficient(k) for k in range(1, N))
    # rewrite sum_{k>=1} a_k (1-w)^k as sum_m s_m w^m, then scale: c_m = m s_m
    s = [ring.zero() for _ in range(N)]
    for k in range(1, N):
        ak = a[k - 1]
        if ak.is_zero():
            continue
        for m in range(0, min(k, N - 1) + 1):
            s[m] = s[m] + ak.scale(Fraction((-1) ** m * comb(k, m)))
    c = [ring.zero()] + [s[m].scale(m) for m in range(1, N)]
    total = ring.zero()
    for x in c[1:]:
        total = total + x
    c[0] = -total
    return GeneratorTable(b=b, a=a, c=tuple(c), t0=t0, log_t0=log_t0, order=N)


def reconstruct_orientation(table: GeneratorTable) -> Series:
    """u(t) = t/t0 + sum b_k t^(k+1); inverse of extract_generators on b."""
    ring = table.ring
    data = {1: table.t0.inverse()}
    for k, bk in enumerate(table.b, start=1):
        data[k + 1] = bk
    return Series.from_dict(ring, "t", data, table.order)
