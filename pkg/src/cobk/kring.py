"""Finite-rank Frobenius-algebra models of K-theory rings.

An Algebra packages a basis, structure constants, the Euler-characteristic
counit chi (pushforward to the point), and Adams operation tables.  Built-in
models cover the point and projective spaces; arbitrary models load from the
JSON description.  Multiplicative characteristic classes evaluate on split
bundles either line by line or through the Adams-exponential formula, and the
two routes are kept as mutual cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .rings import GradedPoly, NotUnitError, Ring
from .series import Series

AlgElem = tuple[GradedPoly, ...]


class DualityError(ValueError):
    """The pairing matrix is degenerate; no dual basis exists."""


class AdamsRangeError(ValueError):
    """Requested Adams operation is outside the stored range."""


class Algebra:
    """Commutative Frobenius algebra of finite rank over a graded ring.

    Elements are coordinate tuples over the basis.  All data is immutable
    after construction.
    """

    def __init__(self, ring: Ring, basis: tuple[str, ...],
                 structure: tuple[tuple[AlgElem, ...], ...],
                 unit: AlgElem, chi: tuple[GradedPoly, ...],
                 adams_tables: dict[int, tuple[AlgElem, ...]] | None = None,
                 adams_rule=None, name: str = "custom"):
        self.ring = ring
        self.basis = basis
        self.rank = len(basis)
        self.structure = structure
        self.unit = unit
        self.chi_table = chi
        self.adams_tables = dict(adams_tables or {})
        self._adams_rule = adams_rule      # optional generator of new tables
        self.name = name

    # -- element constructors -------------------------------------------------

    def zero(self) -> AlgElem:
        return tuple(self.ring.zero() for _ in range(self.rank))

    def one(self) -> AlgElem:
        return self.unit

    def from_scalar(self, c: GradedPoly) -> AlgElem:
        return tuple(c * u for u in self.unit)

    def basis_elem(self, i: int) -> AlgElem:
        return tuple(self.ring.one() if j == i else self.ring.zero()
                     for j in range(self.rank))

    # -- arithmetic -------------------------------------------------------------

    def add(self, a: AlgElem, b: AlgElem) -> AlgElem:
        return tuple(x + y for x, y in zip(a, b))

    def sub(self, a: AlgElem, b: AlgElem) -> AlgElem:
        return tuple(x - y for x, y in zip(a, b))

    def neg(self, a: AlgElem) -> AlgElem:
        return tuple(-x for x in a)

    def scalar_mul(self, c: GradedPoly, a: AlgElem) -> AlgElem:
        return tuple(c * x for x in a)

    def mul(self, a: AlgElem, b: AlgElem) -> AlgElem:
        out = [self.ring.zero()] * self.rank
        for i, ai in enumerate(a):
            if ai.is_zero():
                continue
            for j, bj in enumerate(b):
                if bj.is_zero():
                    continue
                coeff = ai * bj
                if coeff.is_zero():
                    continue
                for k, s in enumerate(self.structure[i][j]):
                    if not s.is_zero():
                        out[k] = out[k] + coeff * s
        return tuple(out)

    def power(self, a: AlgElem, n: int) -> AlgElem:
        if n < 0:
            return self.power(self.inverse(a), -n)
        result = self.unit
        for _ in range(n):
            result = self.mul(result, a)
        return result

    def is_zero_elem(self, a: AlgElem) -> bool:
        return all(x.is_zero() for x in a)

    def inverse(self, a: AlgElem) -> AlgElem:
        """Solve a * x = 1 by Gaussian elimination over the coefficient ring."""
        mat = [[self.ring.zero()] * self.rank for _ in range(self.rank)]
        for j in range(self.rank):
            col = self.mul(a, self.basis_elem(j))
            for i in range(self.rank):
                mat[i][j] = col[i]
        return tuple(_solve_linear(self.ring, mat, list(self.unit)))

    def exp_nilpotent(self, a: AlgElem) -> AlgElem:
        """exp of an element that is nilpotent in the truncated algebra."""
        out = self.unit
        power = self.unit
        fac = 1
        bound = self.ring.truncation + self.rank + 2
        for k in range(1, bound + 1):
            power = self.mul(power, a)
            if self.is_zero_elem(power):
                break
            fac *= k
            out = self.add(out, self.scalar_mul(self.ring.scalar(Fraction(1, fac)), power))
        else:
            raise ValueError("exp argument is not nilpotent")
        return out

    # -- Frobenius structure ------------------------------------------------------

    def chi(self, a: AlgElem) -> GradedPoly:
        out = self.ring.zero()
        for x, c in zip(a, self.chi_table):
            out = out + x * c
        return out

    def pairing(self, a: AlgElem, b: AlgElem) -> GradedPoly:
        return self.chi(self.mul(a, b))

    # -- Adams operations -----------------------------------------------------------

    def adams_table(self, r: int) -> tuple[AlgElem, ...]:
        if r == 1:
            return tuple(self.basis_elem(i) for i in range(self.rank))
        if r not in self.adams_tables:
            if self._adams_rule is None:
                raise AdamsRangeError(f"no Adams table stored for r = {r}")
            self.adams_tables[r] = self._adams_rule(r)
        return self.adams_tables[r]

    def adams(self, r: int, a: AlgElem) -> AlgElem:
        """Psi^r: the stored table on the basis, Psi^r(y) = y^r on coefficients."""
        if r < 1:
            raise AdamsRangeError("Adams index must be >= 1")
        table = self.adams_table(r)
        out = [self.ring.zero()] * self.rank
        for i, coeff in enumerate(a):
            if coeff.is_zero():
                continue
            mapped = adams_on_coefficient(r, coeff)
            for k, t in enumerate(table[i]):
                if not t.is_zero():
                    out[k] = out[k] + mapped * t
        return tuple(out)

    # -- serialization ------------------------------------------------------------

    def to_json(self) -> dict:
        return {"name": self.name,
                "ring": self.ring.to_json(),
                "basis": list(self.basis),
                "structure": [[[c.to_json() for c in self.structure[i][j]]
                               for j in range(self.rank)] for i in range(self.rank)],
                "unit": [c.to_json() for c in self.unit],
                "chi": [c.to_json() for c in self.chi_table],
                "adams": {str(r): [[c.to_json() for c in row] for row in tab]
                          for r, tab in sorted(self.adams_tables.items())}}

    @staticmethod
    def from_json(obj: dict) -> "Algebra":
        ring = Ring.from_json(obj["ring"])
        load = GradedPoly.from_json
        structure = tuple(tuple(tuple(load(c) for c in cell) for cell in row)
                          for row in obj["structure"])
        adams = {int(r): tuple(tuple(load(c) for c in row) for row in tab)
                 for r, tab in obj.get("adams", {}).items()}
        return Algebra(ring=ring, basis=tuple(obj["basis"]), structure=structure,
                       unit=tuple(load(c) for c in obj["unit"]),
                       chi=tuple(load(c) for c in obj["chi"]),
                       adams_tables=adams, name=obj.get("name", "custom"))


def adams_on_coefficient(r: int, coeff: GradedPoly) -> GradedPoly:
    """Psi^r on the coefficient ring: fixes rationals, sends y to y^r.

    Cobordism generators p_n have no stored Adams action and are rejected.
    """
    ring = coeff.ring
    out: dict[tuple[int, ...], Fraction] = {}
    names = ring.names
    for exps, c in coeff.terms.items():
        new = list(exps)
        for i, e in enumerate(exps):
            if e == 0:
                continue
            if names[i] == "y":
                new[i] = e * r
            else:
                raise AdamsRangeError(
                    f"no Adams action stored for coefficient generator {names[i]!r}")
        key = tuple(new)
        out[key] = out.get(key, Fraction(0)) + c
    return GradedPoly(ring, out)


def _solve_linear(ring: Ring, mat: list[list[GradedPoly]],
                  rhs: list[GradedPoly]) -> list[GradedPoly]:
    """Solve M x = rhs by Gauss-Jordan elimination with unit pivots."""
    n = len(rhs)
    m = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        pivot = None
        for row in range(col, n):
            if m[row][col].is_unit():
                pivot = row
                break
        if pivot is None:
            raise NotUnitError("linear system has no invertible pivot")
        m[col], m[pivot] = m[pivot], m[col]
        inv = m[col][col].inverse()
        m[col] = [x * inv for x in m[col]]
        for row in range(n):
            if row == col:
                continue
            factor = m[row][col]
            if factor.is_zero():
                continue
            m[row] = [a - factor * b for a, b in zip(m[row], m[col])]
    return [m[i][n] for i in range(n)]


def _invert_matrix(ring: Ring, mat: list[list[GradedPoly]]) -> list[list[GradedPoly]]:
    n = len(mat)
    cols = []
    for j in range(n):
        rhs = [ring.one() if i == j else ring.zero() for i in range(n)]
        try:
            cols.append(_solve_linear(ring, mat, rhs))
        except NotUnitError as exc:
            raise DualityError("pairing matrix is degenerate") from exc
    return [[cols[j][i] for j in range(n)] for i in range(n)]


# -- built-in models ---------------------------------------------------------------

def builtin_model(name: str, n: int | None = None, ring: Ring | None = None) -> Algebra:
    """'point', or 'proj' with n >= 1: K of complex projective n-space on the
    basis 1, L, ..., L^n with the single relation (L - 1)^(n+1) = 0."""
    if ring is None:
        ring = Ring((("y", 1),), 8)
    if name == "point":
        one = ring.one()
        return Algebra(ring=ring, basis=("1",),
                       structure=(((one,),),),
                       unit=(one,), chi=(one,),
                       adams_rule=lambda r: ((one,),),
                       name="point")
    if name == "proj":
        if n is None or n < 1:
            raise ValueError("proj model needs n >= 1")
        return _proj_model(n, ring)
    raise ValueError(f"unsupported model {name!r}")


def _reduce_power(m: int, n: int) -> list[Fraction]:
    """Coordinates of L^m on 1, L, ..., L^n modulo (L - 1)^(n+1), for m >= 0."""
    # repeatedly rewrite L^(n+1) = -sum_{i<=n} C(n+1,i)(-1)^(n+1-i) L^i
    coords = [Fraction(0)] * (n + 1)
    if m <= n:
        coords[m] = Fraction(1)
        return coords
    top = [Fraction(0)] * (n + 1)
    for i in range(n + 1):
        top[i] = Fraction(-((-1) ** (n + 1 - i)) * comb(n + 1, i))
    work = {m: Fraction(1)}
    while work:
        k = max(work)
        c = work.pop(k)
        if k <= n:
            coords[k] += c
            continue
        for i in range(n + 1):
            if top[i]:
                j = k - (n + 1) + i
                work[j] = work.get(j, Fraction(0)) + c * top[i]
    return coords


def _proj_model(n: int, ring: Ring) -> Algebra:
    basis = tuple("1" if k == 0 else f"L^{k}" if k > 1 else "L" for k in range(n + 1))
    reduce_cache: dict[int, list[Fraction]] = {}

    def red(m: int) -> AlgElem:
        if m not in reduce_cache:
            reduce_cache[m] = _reduce_power(m, n)
        return tuple(ring.scalar(c) for c in reduce_cache[m])

    structure = tuple(tuple(red(i + j) for j in range(n + 1)) for i in range(n + 1))
    chi = tuple(ring.scalar(comb(n + k, n)) for k in range(n + 1))
    unit = red(0)

    def adams_rule(r: int) -> tuple[AlgElem, ...]:
        return tuple(red(r * k) for k in range(n + 1))

    return Algebra(ring=ring, basis=basis, structure=structure, unit=unit,
                   chi=chi, adams_rule=adams_rule, name=f"proj({n})")


def change_basis(algebra: Algebra, matrix: list[list[GradedPoly]],
                 labels: tuple[str, ...] | None = None) -> Algebra:
    """Present the same algebra on the basis f_i = sum_j matrix[i][j] e_j."""
    ring = algebra.ring
    n = algebra.rank
    inv = _invert_matrix(ring, [row[:] for row in matrix])

    def to_new(elem: AlgElem) -> AlgElem:
        # coordinates transform by the inverse transpose
        return tuple(sum((inv[j][i] * elem[j] for j in range(n)), ring.zero())
                     for i in range(n))

    new_basis_elems = [tuple(matrix[i][j] for j in range(n)) for i in range(n)]
    structure = tuple(tuple(to_new(algebra.mul(new_basis_elems[i], new_basis_elems[j]))
                            for j in range(n)) for i in range(n))
    chi = tuple(algebra.chi(new_basis_elems[i]) for i in range(n))
    adams = {}
    for r in algebra.adams_tables:
        adams[r] = tuple(to_new(algebra.adams(r, new_basis_elems[i])) for i in range(n))
    rule = None
    if algebra._adams_rule is not None:
        def rule(r, _alg=algebra, _to_new=to_new, _elems=new_basis_elems):
            return tuple(_to_new(_alg.adams(r, e)) for e in _elems)
    return Algebra(ring=ring, basis=labels or tuple(f"f{i}" for i in range(n)),
                   structure=structure, unit=to_new(algebra.unit), chi=chi,
                   adams_tables=adams, adams_rule=rule,
                   name=algebra.name + "/rebased")


# -- pairing and dual bases -----------------------------------------------------------

def pairing_and_duals(algebra: Algebra,
                      twist: AlgElem | None = None
                      ) -> tuple[list[list[GradedPoly]], list[AlgElem]]:
    """Gram matrix G_ij = chi(e_i e_j W) and the dual basis with
    (e_i, dual_j) = delta_ij."""
    n = algebra.rank
    w = twist if twist is not None else algebra.unit
    gram = [[algebra.chi(algebra.mul(algebra.mul(algebra.basis_elem(i),
                                                 algebra.basis_elem(j)), w))
             for j in range(n)] for i in range(n)]
    ginv = _invert_matrix(algebra.ring, gram)
    duals = [tuple(ginv[i][j] for j in range(n)) for i in range(n)]
    return gram, duals


# -- Newton-polynomial Adams operations --------------------------------------------------

def newton_adams(algebra: Algebra, exterior_powers: list[AlgElem], r: int) -> AlgElem:
    """Psi^r from the exterior powers lambda^1..lambda^r via Newton's identity
    N_r = e_1 N_{r-1} - e_2 N_{r-2} + ... + (-1)^(r-1) r e_r."""
    if r < 1:
        raise AdamsRangeError("Adams index must be >= 1")
    if len(exterior_powers) < r:
        raise AdamsRangeError(f"need exterior powers up to lambda^{r}")
    newtons: list[AlgElem] = []
    for m in range(1, r + 1):
        acc = algebra.scalar_mul(algebra.ring.scalar((-1) ** (m - 1) * m),
                                 exterior_powers[m - 1])
        for i in range(1, m):
            term = algebra.mul(exterior_powers[i - 1], newtons[m - i - 1])
            acc = algebra.add(acc, algebra.scalar_mul(
                algebra.ring.scalar((-1) ** (i - 1)), term))
        newtons.append(acc)
    return newtons[r - 1]


def exterior_powers_of_split(algebra: Algebra, lines: list[AlgElem],
                             count: int) -> list[AlgElem]:
    """lambda^1..lambda^count of a sum of line bundles: elementary symmetric
    functions of the lines."""
    elems = [algebra.one()]
    for line in lines:
        new = [algebra.one()]
        for k in range(1, len(elems) + 1):
            prev = elems[k] if k < len(elems) else None
            term = algebra.mul(elems[k - 1], line)
            new.append(algebra.add(prev, term) if prev is not None else term)
        elems = new
    out = []
    for k in range(1, count + 1):
        out.append(elems[k] if k < len(elems) else algebra.zero())
    return out


# -- split bundles and multiplicative classes ----------------------------------------------

@dataclass(frozen=True)
class SplitBundle:
    """A virtual sum of line bundles: (line, multiplicity, sign) triples."""

    lines: tuple[tuple[AlgElem, int, int], ...]

    def __post_init__(self):
        for _, mult, sign in self.lines:
            if mult < 0 or sign not in (1, -1):
                raise ValueError("multiplicities must be >= 0 and signs +-1")

    def virtual_rank(self) -> int:
        return sum(sign * mult for _, mult, sign in self.lines)

    @staticmethod
    def of_lines(*lines: AlgElem) -> "SplitBundle":
        return SplitBundle(tuple((line, 1, 1) for line in lines))


def proj_tangent_bundle(algebra: Algebra, n: int) -> SplitBundle:
    """Euler-sequence surrogate for the tangent bundle of proj(n):
    (n+1) copies of L minus a trivial line."""
    L = algebra.basis_elem(1)
    return SplitBundle(((L, n + 1, 1), (algebra.one(), 1, -1)))


@dataclass(frozen=True)
class MultClass:
    """Multiplicative characteristic class with exponent sum_k (c_k / k) Psi^k
    applied through dual lines, and value t0 on a trivial line.

    ``orientation`` optionally carries the series u(t) the class came from,
    enabling the independent line-product evaluation route.
    """

    c: tuple[GradedPoly, ...]          # c_1, c_2, ...
    t0: GradedPoly
    orientation: Series | None = None

    @staticmethod
    def from_table(table) -> "MultClass":
        return MultClass(c=tuple(table.c[1:]), t0=table.t0,
                         orientation=None)

    @staticmethod
    def classical(ring: Ring, kmax: int) -> "MultClass":
        return MultClass(c=tuple(ring.zero() for _ in range(kmax)), t0=ring.one())

    @staticmethod
    def hirzebruch(ring: Ring, kmax: int) -> "MultClass":
        """c_k = -y^k, t0 = 1 - y: the class with value 1 - y L* on lines."""
        y = ring.gen("y")
        c = tuple(-(y ** k) for k in range(1, kmax + 1))
        den = Series.from_dict(ring, "t", {0: ring.one() - y, 1: y}, None)
        u = Series.monomial(ring, "t", 1).div(den, order=kmax + 1)
        return MultClass(c=c, t0=ring.one() - y, orientation=u)


def eval_class(cls: MultClass, algebra: Algebra, bundle: SplitBundle,
               mode: str = "adams_exponential") -> AlgElem:
    """Value of a multiplicative class on a split bundle.

    adams_exponential: t0^rank * exp(sum_{k>=1} (c_k / k) (Psi^k(L*) - 1)
    summed over lines); the rank operator occupies the k = 0 slot, so the
    exponent sees each line reduced by a trivial one, which keeps it nilpotent
    and the evaluation exact.  line_product: t0^rank times the product over
    lines of the orientation-derived value of t/(t0 u(t)) at 1 - 1/line; needs
    the class to carry its orientation series.  The two modes are mutual
    oracles.
    """
    if mode == "adams_exponential":
        exponent = algebra.zero()
        for line, mult, sign in bundle.lines:
            dual = algebra.inverse(line)
            power = algebra.one()
            for k, ck in enumerate(cls.c, start=1):
                power = algebra.mul(power, dual)
                if ck.is_zero():
                    continue
                coeff = ck.scale(Fraction(sign * mult, k))
                reduced = algebra.sub(power, algebra.one())
                exponent = algebra.add(exponent, algebra.scalar_mul(coeff, reduced))
        value = algebra.exp_nilpotent(exponent)
    elif mode == "line_product":
        if cls.orientation is None:
            raise ValueError("line_product mode needs the orientation series")
        ratio = Series.monomial(cls.orientation.ring, "t", 1).div(cls.orientation)
        stable = ratio.scale(cls.t0.inverse())     # t / (t0 u(t)): value 1 at t = 0
        value = algebra.one()
        for line, mult, sign in bundle.lines:
            t_elem = algebra.sub(algebra.one(), algebra.inverse(line))
            line_val = _eval_series_at_nilpotent(algebra, stable, t_elem)
            factor = algebra.power(line_val, sign * mult)
            value = algebra.mul(value, factor)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rank = bundle.virtual_rank()
    t0_rank = cls.t0 ** rank if rank >= 0 else cls.t0.inverse() ** (-rank)
    return algebra.scalar_mul(t0_rank, value)


def _eval_series_at_nilpotent(algebra: Algebra, s: Series, arg: AlgElem) -> AlgElem:
    out = algebra.zero()
    power = algebra.one()
    for k in range(0, s.span_high + 1):
        if k > 0:
            power = algebra.mul(power, arg)
            if algebra.is_zero_elem(power):
                break
        ck = s.coefficient(k) if k >= s.lowest else s.ring.zero()
        if not ck.is_zero():
            out = algebra.add(out, algebra.scalar_mul(ck, power))
    return out


def pushforward_chi(algebra: Algebra, v: AlgElem) -> GradedPoly:
    """Euler-characteristic pushforward: the stored counit, extended linearly."""
    return algebra.chi(v)


def chi_y_genus(n: int, ring: Ring) -> GradedPoly:
    """chi_{-y} genus of proj(n) through the class pushforward.

    The tangent bundle enters via its Euler-sequence surrogate (n+1)L - 1;
    the -1 line contributes the single unit-scale division of the naive
    (n+1)L pushforward.
    """
    model = builtin_model("proj", n, ring)
    cls = MultClass.hirzebruch(ring, ring.truncation)
    tangent = proj_tangent_bundle(model, n)
    value = eval_class(cls, model, tangent, mode="adams_exponential")
    return pushforward_chi(model, value)
