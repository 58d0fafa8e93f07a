"""
Short Weierstrass curves over F_{p^2} and its towers.

Points may carry coordinates in a tower field while their parent curve keeps
its F_{p^2} coefficients; the group law works on mixed arithmetic.
"""

import logging
import random
from typing import Dict, List, Optional, Tuple, Union

from sympy import factorint

from . import config
from .arith import (
    FieldCtx,
    Fp2Elem,
    Poly,
    TowerElem,
    TowerField,
    factor_squarefree,
    legendre,
)
from .exceptions import NotOnCurveError, OracleLimitError, SingularCurveError, TorsionError

logger = logging.getLogger(__name__)

# A list of scaling parameters u realizing (x, y) -> (u^2 x, u^3 y).
IsoClassOfMaps = List[Fp2Elem]


class Curve:
    """The curve y^2 = x^3 + a x + b over F_{p^2}."""

    def __init__(self, a, b, ctx: Optional[FieldCtx] = None, trace: Optional[int] = None):
        """
        Args:
            a: Weierstrass coefficient (field element or int)
            b: Weierstrass coefficient (field element or int)
            ctx: Field context, required when a and b are plain ints
            trace: Known Frobenius trace over F_{p^2}, if any
        """
        if ctx is None:
            ctx = a.ctx if isinstance(a, Fp2Elem) else b.ctx
        self.ctx = ctx
        self.a = ctx(a)
        self.b = ctx(b)
        self.trace = trace
        if self.discriminant().is_zero():
            raise SingularCurveError(f"singular curve a={self.a}, b={self.b}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Curve) and self.ctx == other.ctx and self.a == other.a and self.b == other.b

    def __hash__(self) -> int:
        return hash((self.a, self.b))

    def __repr__(self) -> str:
        return f"Curve(a={self.a}, b={self.b}, p={self.ctx.p})"

    @property
    def p(self) -> int:
        return self.ctx.p

    def discriminant(self) -> Fp2Elem:
        return self.a * self.a * self.a * 4 + self.b * self.b * 27

    def j_invariant(self) -> Fp2Elem:
        a3 = self.a * self.a * self.a * 4
        return a3 * 1728 / (a3 + self.b * self.b * 27)

    def rhs(self, x):
        return x * x * x + self.a * x + self.b

    def f_poly(self) -> Poly:
        ctx = self.ctx
        return Poly([self.b, self.a, ctx.zero, ctx.one], ctx)

    def conjugate(self) -> "Curve":
        return Curve(self.a.conj(), self.b.conj(), self.ctx, trace=self.trace)

    def quadratic_twist(self, delta: Optional[Fp2Elem] = None) -> "Curve":
        delta = delta if delta is not None else self.ctx.nonsquare
        trace = -self.trace if self.trace is not None else None
        return Curve(delta * delta * self.a, delta * delta * delta * self.b, self.ctx, trace=trace)

    def scaled(self, u: Fp2Elem) -> "Curve":
        """Codomain of tau_u: (x, y) -> (u^2 x, u^3 y)."""
        u2 = u * u
        return Curve(u2 * u2 * self.a, u2 * u2 * u2 * self.b, self.ctx, trace=self.trace)

    @property
    def infinity(self) -> "Point":
        return Point(None, None, self)

    def point(self, x, y) -> "Point":
        P = Point(x, y, self)
        if not self.contains(P):
            raise NotOnCurveError(f"({x}, {y}) is not on {self}")
        return P

    def contains(self, P: "Point") -> bool:
        if P.is_infinity():
            return True
        return P.y * P.y == self.rhs(P.x)

    def lift_x(self, x) -> Optional["Point"]:
        y = self.rhs(x).sqrt()
        if y is None:
            return None
        return Point(x, y, self)

    def random_point(self, rng: random.Random, field: Optional[Union[FieldCtx, TowerField]] = None) -> "Point":
        """Random affine point with coordinates in ``field`` (default F_{p^2})."""
        field = field or self.ctx
        while True:
            x = field.random_element(rng)
            y = self.rhs(x).sqrt()
            if y is None:
                continue
            if rng.getrandbits(1):
                y = -y
            return Point(x, y, self)

    def two_torsion(self) -> List["Point"]:
        """F_{p^2}-rational points of order 2, by canonical x."""
        return [Point(r, self.ctx.zero, self) for r in self.f_poly().roots()]

    def frobenius_trace(self) -> int:
        """Trace over F_{p^2}: the stored hint, otherwise the point-count oracle."""
        if self.trace is None:
            self.trace = self.ctx.order + 1 - point_count(self)
        return self.trace

    def with_trace(self, trace: Optional[int]) -> "Curve":
        return Curve(self.a, self.b, self.ctx, trace=trace)

    def to_json(self) -> Dict:
        return {"p": hex(self.ctx.p), "delta": self.ctx.delta, "a": self.a.to_hex(), "b": self.b.to_hex()}

    @classmethod
    def from_json(cls, data: Dict, ctx: Optional[FieldCtx] = None) -> "Curve":
        ctx = ctx or FieldCtx(int(data["p"], 16), data.get("delta"))
        return cls(ctx.from_hex(data["a"]), ctx.from_hex(data["b"]), ctx)


class Point:
    """Affine point, or the point at infinity when x is None."""

    __slots__ = ("x", "y", "curve")

    def __init__(self, x, y, curve: Curve):
        self.x = x
        self.y = y
        self.curve = curve

    def is_infinity(self) -> bool:
        return self.x is None

    def __repr__(self) -> str:
        if self.is_infinity():
            return "Point(inf)"
        return f"Point({self.x}, {self.y})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        if self.is_infinity() or other.is_infinity():
            return self.is_infinity() and other.is_infinity()
        return self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        if self.is_infinity():
            return hash(None)
        return hash((self.x.key(), self.y.key()))

    def key(self) -> Tuple:
        if self.is_infinity():
            return ()
        return (self.x.key(), self.y.key())

    def __neg__(self) -> "Point":
        if self.is_infinity():
            return self
        return Point(self.x, -self.y, self.curve)

    def __add__(self, other: "Point") -> "Point":
        return add(self, other)

    def __sub__(self, other: "Point") -> "Point":
        return add(self, -other)

    def __mul__(self, n: int) -> "Point":
        return scalar_mul(n, self)

    __rmul__ = __mul__

    def frobenius(self) -> "Point":
        """Coordinate-wise p-th power (lands on the conjugate curve)."""
        conj = self.curve.conjugate()
        if self.is_infinity():
            return conj.infinity
        return Point(self.x.frobenius(), self.y.frobenius(), conj)

    def on(self, curve: Curve) -> "Point":
        return Point(self.x, self.y, curve)


def add(P: Point, Q: Point) -> Point:
    """Chord-tangent addition."""
    if P.curve != Q.curve:
        raise NotOnCurveError("points lie on different curves")
    if P.is_infinity():
        return Q
    if Q.is_infinity():
        return P
    if P.x == Q.x:
        if (P.y + Q.y).is_zero():
            return P.curve.infinity
        lam = (P.x * P.x * 3 + P.curve.a) / (P.y * 2)
    else:
        lam = (Q.y - P.y) / (Q.x - P.x)
    x3 = lam * lam - P.x - Q.x
    y3 = lam * (P.x - x3) - P.y
    return Point(x3, y3, P.curve)


def scalar_mul(n: int, P: Point) -> Point:
    n = int(n)
    if n < 0:
        return scalar_mul(-n, -P)
    result = P.curve.infinity
    addend = P
    while n:
        if n & 1:
            result = add(result, addend)
        addend = add(addend, addend)
        n >>= 1
    return result


def j_invariant(E: Curve) -> Fp2Elem:
    return E.j_invariant()


def conjugate_curve(E: Curve) -> Curve:
    return E.conjugate()


def quadratic_twist(E: Curve) -> Curve:
    return E.quadratic_twist()


def apply_iso(u, P: Point, target: Curve) -> Point:
    """tau_u: (x, y) -> (u^2 x, u^3 y), landing on ``target``."""
    if P.is_infinity():
        return target.infinity
    u2 = u * u
    return Point(P.x * u2, P.y * u2 * u, target)


def curve_from_j(ctx: FieldCtx, j) -> Curve:
    """A fixed model with the given j-invariant."""
    j = ctx(j)
    if j.is_zero():
        return Curve(0, 1, ctx)
    if j == 1728:
        return Curve(1, 0, ctx)
    c = -j + 1728
    return Curve(j * c * 3, j * c * c * 2, ctx)


def twists(E: Curve) -> List[Curve]:
    """All twists of E over F_{p^2}: six at j=0, four at j=1728, two otherwise."""
    ctx = E.ctx
    if E.a.is_zero():
        g = ctx.sextic_generator
        return [Curve(ctx.zero, E.b * g ** k, ctx) for k in range(6)]
    if E.b.is_zero():
        g = ctx.nonsquare
        return [Curve(E.a * g ** k, ctx.zero, ctx) for k in range(4)]
    return [Curve(E.a, E.b, ctx), E.quadratic_twist()]


def isomorphisms(E: Curve, E2: Curve) -> IsoClassOfMaps:
    """All u in F_{p^2} with u^4 a = a2 and u^6 b = b2, canonically sorted."""
    ctx = E.ctx
    if E.j_invariant() != E2.j_invariant():
        return []
    if E.a.is_zero():
        c, n = E2.b / E.b, 6
    elif E.b.is_zero():
        c, n = E2.a / E.a, 4
    else:
        c, n = (E2.b * E.a) / (E2.a * E.b), 2
    poly = Poly([-c] + [ctx.zero] * (n - 1) + [ctx.one], ctx)
    out = []
    for u in poly.roots():
        u2 = u * u
        if u2 * u2 * E.a == E2.a and u2 * u2 * u2 * E.b == E2.b:
            out.append(u)
    return out


def division_polynomials(E: Curve, n: int, modulus: Optional[Poly] = None) -> Dict[int, Poly]:
    """
    Division polynomials up to index n.

    Odd k maps to psi_k(x); even k maps to h_k(x) = psi_k / (2y).  With a
    modulus, every entry is reduced modulo it.
    """
    ctx = E.ctx
    a, b = E.a, E.b

    def red(g: Poly) -> Poly:
        return g % modulus if modulus is not None else g

    f = E.f_poly()
    psi: Dict[int, Poly] = {
        0: Poly([], ctx),
        1: Poly([ctx.one], ctx),
        2: Poly([ctx.one], ctx),
        3: red(Poly([-a * a, b * 12, a * 6, ctx.zero, ctx(3)], ctx)),
        4: red(Poly([-(a * a * a) - b * b * 8, -a * b * 4, -a * a * 5, b * 20, a * 5, ctx.zero, ctx.one], ctx) * 2),
    }
    f2x16 = red(f * f * 16)
    for k in range(5, n + 1):
        m = k // 2
        if k % 2 == 1:
            if m % 2 == 0:
                psi[k] = red(f2x16 * psi[m + 2] * psi[m] ** 3 - psi[m - 1] * psi[m + 1] ** 3)
            else:
                psi[k] = red(psi[m + 2] * psi[m] ** 3 - f2x16 * psi[m - 1] * psi[m + 1] ** 3)
        else:
            psi[k] = red(psi[m] * (psi[m + 2] * psi[m - 1] ** 2 - psi[m - 2] * psi[m + 1] ** 2))
    return {k: v for k, v in psi.items() if k <= n}


def torsion_xpoly(E: Curve, m: int) -> Poly:
    """Polynomial whose roots are the x-coordinates of E[m] minus infinity."""
    psi = division_polynomials(E, m)
    if m % 2 == 1:
        return psi[m].monic()
    return (E.f_poly() * psi[m]).monic()


def multiple_x(k: int, x, fx, psi: Dict[int, object]):
    """x([k]P) from x(P), f(x(P)) and division polynomial values at x(P)."""
    if k == 1:
        return x
    if k % 2 == 1:
        return x - fx * psi[k - 1] * psi[k + 1] * 4 / (psi[k] * psi[k])
    return x - psi[k - 1] * psi[k + 1] / (fx * psi[k] * psi[k] * 4)


def cyclic_kernels(E: Curve, ell: int, rng: Optional[random.Random] = None) -> List[Poly]:
    """
    Kernel polynomials of all F_{p^2}-rational cyclic subgroups of prime order ell.

    Works without towers of fixed degree: psi_ell is factored and each
    irreducible factor g yields the subgroup through a root of g, computed in
    F_{p^2}[z]/(g).
    """
    ctx = E.ctx
    rng = rng or random.Random(ell)
    if ell == 2:
        return [Poly([-r, ctx.one], ctx) for r in E.f_poly().roots()]
    half = (ell - 1) // 2
    psi = division_polynomials(E, ell + 1)
    kernels: List[Poly] = []
    for g in factor_squarefree(psi[ell].monic(), rng):
        if any((K % g).is_zero() for K in kernels):
            continue
        A = TowerField(ctx, g)
        z = A.gen
        fz = E.rhs(z)
        vals = {k: psi[k](z) for k in range(0, half + 2)}
        xs = [multiple_x(k, z, fz, vals) for k in range(1, half + 1)]
        K = Poly([A.one], A)
        for xk in xs:
            K = K * Poly([-xk, A.one], A)
        if not all(c.in_base() for c in K.coeffs):
            continue
        kernels.append(Poly([c.descend() for c in K.coeffs], ctx))
    return sorted(kernels, key=lambda K: K.key())


def point_count(E: Curve) -> int:
    """#E(F_{p^2}) by exhaustive character sum or baby-step giant-step."""
    p = E.ctx.p
    if p <= config.get("oracle.max_exhaustive_p", 256):
        total = E.ctx.order + 1
        for x in E.ctx.elements():
            v = E.rhs(x)
            if not v.is_zero():
                total += legendre(v.norm(), p)
        return total
    if p > config.get("oracle.max_p", 1 << 30):
        raise OracleLimitError(f"p={p} is too large for the point-count oracle")
    return _bsgs_count(E)


def _bsgs_count(E: Curve) -> int:
    p, q = E.ctx.p, E.ctx.order
    lo, hi = q + 1 - 2 * p, q + 1 + 2 * p
    rng = random.Random(p)
    candidates = None
    for _ in range(32):
        P = E.random_point(rng)
        found = set(_bsgs_multiples(P, lo, hi))
        candidates = found if candidates is None else candidates & found
        if len(candidates) == 1:
            return candidates.pop()
    raise OracleLimitError("baby-step giant-step did not isolate the group order")


def _bsgs_multiples(P: Point, lo: int, hi: int) -> List[int]:
    """All N in [lo, hi] with [N]P = O."""
    width = hi - lo
    m = 1
    while m * m <= width:
        m += 1
    baby: Dict[Tuple, List[int]] = {}
    R = P.curve.infinity
    for j in range(m):
        baby.setdefault(R.key(), []).append(j)
        R = R + P
    step = -scalar_mul(m, P)
    G = -scalar_mul(lo, P)
    out = []
    for i in range(m + 1):
        for j in baby.get(G.key(), []):
            k = i * m + j
            if k <= width:
                out.append(lo + k)
        G = G + step
    return out


def is_supersingular_oracle(E: Curve) -> bool:
    """Ground truth: supersingular iff the F_{p^2} trace is divisible by p."""
    return (E.ctx.order + 1 - point_count(E)) % E.ctx.p == 0


def has_exponent(E: Curve, n: int, rng: random.Random, samples: int = 3, attempts: int = 16) -> bool:
    """Probabilistic check that [n] kills E(F_{p^2}), with samples not killed by 6."""
    good = 0
    for _ in range(attempts):
        P = E.random_point(rng)
        if not scalar_mul(n, P).is_infinity():
            return False
        if not scalar_mul(6, P).is_infinity():
            good += 1
            if good >= samples:
                return True
    return False


def supersingular_model(ctx: FieldCtx, j, eps: int, rng: Optional[random.Random] = None) -> Optional[Curve]:
    """
    The twist with j-invariant j whose group is (Z/(p+eps))^2, or None.

    None means j is not supersingular (no twist has exponent p + eps).
    """
    rng = rng or random.Random(ctx.p)
    for C in twists(curve_from_j(ctx, j)):
        if has_exponent(C, ctx.p + eps, rng):
            return C.with_trace(-2 * eps * ctx.p)
    return None


def extension_order(E: Curve, r: int) -> int:
    """#E(F_{p^{2r}}) from the trace over F_{p^2}."""
    q = E.ctx.order
    t = E.frobenius_trace()
    t_prev, t_cur = 2, t
    for _ in range(r - 1):
        t_prev, t_cur = t_cur, t * t_cur - q * t_prev
    return q ** r + 1 - t_cur


def _point_of_order(E: Curve, m: int, N: int, field, rng: random.Random) -> Optional[Point]:
    primes = factorint(m)
    L = 1
    for ell in primes:
        while N % (L * ell) == 0 and (N // L) % ell == 0:
            L *= ell
    cof = N // L
    P = scalar_mul(L // m, scalar_mul(cof, E.random_point(rng, field)))
    if not scalar_mul(m, P).is_infinity():
        return None
    if any(scalar_mul(m // ell, P).is_infinity() for ell in primes):
        return None
    return P


def _independent(P: Point, Q: Point, m: int) -> bool:
    for ell in factorint(m):
        P1 = scalar_mul(m // ell, P)
        Q1 = scalar_mul(m // ell, Q)
        R = P1.curve.infinity
        for _ in range(ell):
            if R == Q1:
                return False
            R = R + P1
    return True


def torsion_field_degree(E: Curve, m: int) -> Optional[int]:
    """Smallest r <= r_max with m^2 dividing #E(F_{p^{2r}}), or None."""
    for r in range(1, E.ctx.r_max + 1):
        if extension_order(E, r) % (m * m) == 0:
            return r
    return None


def torsion_basis(E: Curve, m: int, rng: Optional[random.Random] = None, tries: int = 64) -> Tuple[Point, Point]:
    """
    Two points generating E[m], over the smallest sufficient tower.

    Raises:
        TorsionError: If E[m] is not rational over a tower of degree <= r_max
    """
    rng = rng or random.Random(m)
    if m == 2:
        T = E.two_torsion()
        if len(T) == 3:
            return T[0], T[1]
    for r in range(1, E.ctx.r_max + 1):
        N = extension_order(E, r)
        if N % (m * m):
            continue
        field = E.ctx.tower(r)
        P = None
        for _ in range(tries):
            P = _point_of_order(E, m, N, field, rng)
            if P is not None:
                break
        if P is None:
            continue
        for _ in range(tries):
            Q = _point_of_order(E, m, N, field, rng)
            if Q is not None and _independent(P, Q, m):
                logger.debug("E[%d] basis over tower degree %d", m, r)
                return P, Q
    raise TorsionError(f"E[{m}] is not rational over towers of degree <= {E.ctx.r_max}")
