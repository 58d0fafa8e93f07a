"""
Prime-field, quadratic-extension and small-tower arithmetic.

F_{p^2} is represented as F_p[X]/(X^2 - delta) with delta a quadratic
nonresidue.  Towers F_{p^{2r}} are F_{p^2}[Y]/(g_r) for a deterministic
irreducible g_r.  Univariate polynomials (``Poly``) work over either.
"""

import logging
import random
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import gmpy2
from sympy import factorint

from . import config
from .exceptions import ArithmeticDomainError

logger = logging.getLogger(__name__)


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a/p) for an odd prime p."""
    return int(gmpy2.legendre(a % p, p))


def sqrt_mod(a: int, p: int) -> Optional[int]:
    """
    Square root modulo an odd prime (Tonelli-Shanks).

    Returns the smaller of the two roots, or None if a is a nonresidue.
    """
    a %= p
    if a == 0:
        return 0
    if legendre(a, p) != 1:
        return None
    if p % 4 == 3:
        r = int(gmpy2.powmod(a, (p + 1) // 4, p))
    else:
        q, s = p - 1, 0
        while q % 2 == 0:
            q //= 2
            s += 1
        z = 2
        while legendre(z, p) != -1:
            z += 1
        m = s
        c = int(gmpy2.powmod(z, q, p))
        t = int(gmpy2.powmod(a, q, p))
        r = int(gmpy2.powmod(a, (q + 1) // 2, p))
        while t != 1:
            i, t2 = 0, t
            while t2 != 1:
                t2 = t2 * t2 % p
                i += 1
            b = int(gmpy2.powmod(c, 1 << (m - i - 1), p))
            m = i
            c = b * b % p
            t = t * c % p
            r = r * b % p
    return min(r, p - r)


def int_to_hex(x: int, p: int) -> str:
    """Fixed-width lowercase big-endian hex encoding of an F_p element."""
    width = 2 * ((p.bit_length() + 7) // 8)
    return format(int(x) % p, "0{}x".format(width))


class FieldCtx:
    """Context for F_{p^2} = F_p(sqrt(delta)) and its small towers."""

    def __init__(self, p: int, delta: Optional[int] = None, r_max: Optional[int] = None):
        """
        Initialize the field context.

        Args:
            p: Prime characteristic, p > 3
            delta: Quadratic nonresidue mod p. If None, the smallest positive one is used
            r_max: Largest tower degree over F_{p^2}. If None, taken from configuration
        """
        p = int(p)
        if p <= 3 or not gmpy2.is_prime(p):
            raise ArithmeticDomainError(f"p must be a prime > 3, got {p}")
        if delta is None:
            delta = 2
            while legendre(delta, p) != -1:
                delta += 1
        delta = int(delta) % p
        if legendre(delta, p) != -1:
            raise ArithmeticDomainError(f"delta={delta} is not a quadratic nonresidue mod {p}")
        self.p = p
        self.delta = delta
        self.r_max = int(r_max if r_max is not None else config.get("r_max", 6))
        self.order = p * p
        self.degree = 1
        self.zero = Fp2Elem(0, 0, self)
        self.one = Fp2Elem(1, 0, self)
        self._towers: Dict[int, "TowerField"] = {}
        self._nonsquare: Optional["Fp2Elem"] = None
        self._noncube: Optional["Fp2Elem"] = None

    def __call__(self, a=0, b: int = 0) -> "Fp2Elem":
        if isinstance(a, Fp2Elem):
            if a.ctx != self:
                raise ArithmeticDomainError("element belongs to a different field")
            return a
        return Fp2Elem(int(a), int(b), self)

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldCtx) and self.p == other.p and self.delta == other.delta

    def __hash__(self) -> int:
        return hash((self.p, self.delta))

    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, delta={self.delta})"

    @property
    def base(self) -> "FieldCtx":
        return self

    @property
    def characteristic(self) -> int:
        return self.p

    @property
    def sqrt_delta(self) -> "Fp2Elem":
        return Fp2Elem(0, 1, self)

    @property
    def nonsquare(self) -> "Fp2Elem":
        """Smallest nonsquare of F_{p^2} under the canonical element order."""
        if self._nonsquare is None:
            for x in self.elements():
                if not x.is_zero() and not x.is_square():
                    self._nonsquare = x
                    break
        return self._nonsquare

    @property
    def sextic_generator(self) -> "Fp2Elem":
        """Smallest element that is neither a square nor a cube."""
        if self._noncube is None:
            q = self.order
            for x in self.elements():
                if x.is_zero() or x.is_square():
                    continue
                if x ** ((q - 1) // 3) != self.one:
                    self._noncube = x
                    break
        return self._noncube

    def elements(self) -> Iterator["Fp2Elem"]:
        """Iterate F_{p^2} in canonical order (a first, then b)."""
        for a in range(self.p):
            for b in range(self.p):
                yield Fp2Elem(a, b, self)

    def random_element(self, rng: random.Random) -> "Fp2Elem":
        return Fp2Elem(rng.randrange(self.p), rng.randrange(self.p), self)

    def from_hex(self, value: Sequence[str]) -> "Fp2Elem":
        return Fp2Elem(int(value[0], 16), int(value[1], 16), self)

    def tower(self, r: int) -> Union["FieldCtx", "TowerField"]:
        """The field F_{p^{2r}} as a tower over F_{p^2}; r=1 gives this context."""
        if r == 1:
            return self
        if r > self.r_max:
            raise ArithmeticDomainError(f"tower degree {r} exceeds r_max={self.r_max}")
        if r not in self._towers:
            self._towers[r] = TowerField(self, find_tower_modulus(self, r))
        return self._towers[r]

    @property
    def tower_moduli(self) -> List["Poly"]:
        return [self.tower(r).modulus for r in range(2, self.r_max + 1)]


class Fp2Elem:
    """Element a + b*sqrt(delta) of F_{p^2}."""

    __slots__ = ("a", "b", "ctx")

    def __init__(self, a: int, b: int, ctx: FieldCtx):
        self.a = a % ctx.p
        self.b = b % ctx.p
        self.ctx = ctx

    def _coerce(self, other):
        if isinstance(other, Fp2Elem):
            return other
        if isinstance(other, int):
            return Fp2Elem(other, 0, self.ctx)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Fp2Elem(self.a + o.a, self.b + o.b, self.ctx)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Fp2Elem(self.a - o.a, self.b - o.b, self.ctx)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Fp2Elem(o.a - self.a, o.b - self.b, self.ctx)

    def __neg__(self):
        return Fp2Elem(-self.a, -self.b, self.ctx)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        p = self.ctx.p
        return Fp2Elem(
            (self.a * o.a + self.ctx.delta * self.b * o.b) % p,
            (self.a * o.b + self.b * o.a) % p,
            self.ctx,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Fp2Elem":
        n = self.norm()
        if n == 0:
            raise ArithmeticDomainError("inverse of zero")
        ni = int(gmpy2.invert(n, self.ctx.p))
        return Fp2Elem(self.a * ni, -self.b * ni, self.ctx)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        n = int(n)
        base = self
        if n < 0:
            base, n = self.inverse(), -n
        result = self.ctx.one
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Fp2Elem):
            return self.a == other.a and self.b == other.b and self.ctx.p == other.ctx.p
        if isinstance(other, int):
            return self.b == 0 and self.a == other % self.ctx.p
        return NotImplemented

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self) -> int:
        return hash((self.a, self.b, self.ctx.p))

    def __bool__(self) -> bool:
        return bool(self.a or self.b)

    def __repr__(self) -> str:
        if self.b == 0:
            return f"{self.a}"
        return f"{self.a}+{self.b}*s"

    def key(self) -> Tuple[int, int]:
        """Sort key of the canonical total order."""
        return (self.a, self.b)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def in_base(self) -> bool:
        return self.b == 0

    def conj(self) -> "Fp2Elem":
        return Fp2Elem(self.a, -self.b, self.ctx)

    frobenius = conj

    def norm(self) -> int:
        return (self.a * self.a - self.ctx.delta * self.b * self.b) % self.ctx.p

    def trace(self) -> int:
        return (2 * self.a) % self.ctx.p

    def is_square(self) -> bool:
        return self.is_zero() or legendre(self.norm(), self.ctx.p) == 1

    def sqrt(self) -> Optional["Fp2Elem"]:
        ctx, p = self.ctx, self.ctx.p
        if self.is_zero():
            return self
        if self.b == 0:
            r = sqrt_mod(self.a, p)
            if r is not None:
                return canonical_sign(Fp2Elem(r, 0, ctx))
            r = sqrt_mod(self.a * int(gmpy2.invert(ctx.delta, p)), p)
            return canonical_sign(Fp2Elem(0, r, ctx))
        n = sqrt_mod(self.norm(), p)
        if n is None:
            return None
        half = int(gmpy2.invert(2, p))
        for cand in (n, p - n):
            c = (self.a + cand) * half % p
            if c and legendre(c, p) == 1:
                x0 = sqrt_mod(c, p)
                y0 = self.b * int(gmpy2.invert(2 * x0, p)) % p
                return canonical_sign(Fp2Elem(x0, y0, ctx))
        raise ArithmeticDomainError("square root failed for a square element")

    def descend(self) -> "Fp2Elem":
        return self

    def to_hex(self) -> List[str]:
        return [int_to_hex(self.a, self.ctx.p), int_to_hex(self.b, self.ctx.p)]


def canonical_sign(x):
    """Return whichever of x, -x comes first in the canonical order."""
    y = -x
    return x if x.key() <= y.key() else y


def conj(x: Fp2Elem) -> Fp2Elem:
    """The p-th power Frobenius on F_{p^2}."""
    return x.conj()


def sqrt(x) -> Optional[Union[Fp2Elem, "TowerElem"]]:
    """Canonical square root, or None for a nonsquare."""
    return x.sqrt()


class TowerField:
    """The field F_{p^2}[Y]/(modulus) for an irreducible monic modulus."""

    def __init__(self, ctx: FieldCtx, modulus: "Poly"):
        if modulus.degree() < 1 or modulus.lc() != ctx.one:
            raise ArithmeticDomainError("tower modulus must be monic and nonconstant")
        self.base = ctx
        self.ctx = ctx
        self.modulus = modulus
        self.degree = modulus.degree()
        self.order = ctx.order ** self.degree
        self.characteristic = ctx.p
        self._mod = [modulus.coeffs[i] for i in range(self.degree)]
        self.zero = TowerElem(tuple([ctx.zero] * self.degree), self)
        self.one = self(ctx.one)
        self._nonresidue: Optional["TowerElem"] = None

    def __call__(self, value) -> "TowerElem":
        if isinstance(value, TowerElem):
            if value.field is not self:
                raise ArithmeticDomainError("element belongs to a different tower")
            return value
        if isinstance(value, Poly):
            value = value % self.modulus
            coeffs = list(value.coeffs) + [self.ctx.zero] * (self.degree - len(value.coeffs))
            return TowerElem(tuple(coeffs), self)
        if isinstance(value, (list, tuple)):
            coeffs = [self.ctx(c) for c in value]
            coeffs += [self.ctx.zero] * (self.degree - len(coeffs))
            return TowerElem(tuple(coeffs[:self.degree]), self)
        c = self.ctx(value)
        return TowerElem((c,) + tuple([self.ctx.zero] * (self.degree - 1)), self)

    def __repr__(self) -> str:
        return f"TowerField(p={self.ctx.p}, degree={self.degree})"

    @property
    def gen(self) -> "TowerElem":
        if self.degree == 1:
            return self(-self._mod[0])
        return self([0, 1])

    def random_element(self, rng: random.Random) -> "TowerElem":
        return TowerElem(tuple(self.ctx.random_element(rng) for _ in range(self.degree)), self)

    def _reduce(self, prod: List[Fp2Elem]) -> Tuple[Fp2Elem, ...]:
        r = self.degree
        for i in range(len(prod) - 1, r - 1, -1):
            t = prod[i]
            if t:
                for j in range(r):
                    prod[i - r + j] = prod[i - r + j] - t * self._mod[j]
        out = prod[:r]
        out += [self.ctx.zero] * (r - len(out))
        return tuple(out)

    def nonresidue(self) -> "TowerElem":
        """Deterministic quadratic nonresidue, searched in enumeration order."""
        if self._nonresidue is None:
            e = (self.order - 1) // 2
            k = 1
            while True:
                coeffs, n = [], k
                for _ in range(self.degree):
                    coeffs.append(self.ctx(n % self.ctx.p, (n // self.ctx.p) % self.ctx.p))
                    n //= self.ctx.order
                x = TowerElem(tuple(coeffs), self)
                if not x.is_zero() and x ** e != self.one:
                    self._nonresidue = x
                    break
                k += 1
        return self._nonresidue


class TowerElem:
    """Element of a tower field, coefficients over F_{p^2} in powers of Y."""

    __slots__ = ("c", "field")

    def __init__(self, c: Tuple[Fp2Elem, ...], field: TowerField):
        self.c = c
        self.field = field

    def _coerce(self, other):
        if isinstance(other, TowerElem):
            return other
        if isinstance(other, (int, Fp2Elem)):
            return self.field(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return TowerElem(tuple(x + y for x, y in zip(self.c, o.c)), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return TowerElem(tuple(x - y for x, y in zip(self.c, o.c)), self.field)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return TowerElem(tuple(-x for x in self.c), self.field)

    def __mul__(self, other):
        if isinstance(other, (int, Fp2Elem)):
            return TowerElem(tuple(x * other for x in self.c), self.field)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        zero = self.field.ctx.zero
        prod = [zero] * (2 * self.field.degree - 1)
        for i, x in enumerate(self.c):
            if not x:
                continue
            for j, y in enumerate(o.c):
                if y:
                    prod[i + j] = prod[i + j] + x * y
        return TowerElem(self.field._reduce(prod), self.field)

    __rmul__ = __mul__

    def to_poly(self) -> "Poly":
        return Poly(list(self.c), self.field.ctx)

    def inverse(self) -> "TowerElem":
        if self.is_zero():
            raise ArithmeticDomainError("inverse of zero")
        g, s, _ = self.to_poly().xgcd(self.field.modulus)
        if g.degree() != 0:
            raise ArithmeticDomainError("tower modulus is not irreducible")
        return self.field(s * g.coeffs[0].inverse())

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        n = int(n)
        base = self
        if n < 0:
            base, n = self.inverse(), -n
        result = self.field.one
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.c == o.c

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self) -> int:
        return hash(self.c)

    def __bool__(self) -> bool:
        return any(self.c)

    def __repr__(self) -> str:
        return "T(" + ", ".join(repr(x) for x in self.c) + ")"

    def key(self) -> Tuple:
        return tuple(x.key() for x in self.c)

    def is_zero(self) -> bool:
        return not any(self.c)

    def in_base(self) -> bool:
        return not any(self.c[1:])

    def descend(self) -> Fp2Elem:
        if not self.in_base():
            raise ArithmeticDomainError("element does not lie in F_{p^2}")
        return self.c[0]

    def frobenius(self) -> "TowerElem":
        return self ** self.field.ctx.p

    def is_square(self) -> bool:
        return self.is_zero() or self ** ((self.field.order - 1) // 2) == self.field.one

    def sqrt(self) -> Optional["TowerElem"]:
        if self.is_zero():
            return self
        field = self.field
        q = field.order
        if self ** ((q - 1) // 2) != field.one:
            return None
        t, s = q - 1, 0
        while t % 2 == 0:
            t //= 2
            s += 1
        z = field.nonresidue()
        m = s
        c = z ** t
        tt = self ** t
        r = self ** ((t + 1) // 2)
        while tt != field.one:
            i, t2 = 0, tt
            while t2 != field.one:
                t2 = t2 * t2
                i += 1
            b = c ** (1 << (m - i - 1))
            m = i
            c = b * b
            tt = tt * c
            r = r * b
        return canonical_sign(r)


Scalar = Union[Fp2Elem, TowerElem]


class Poly:
    """Univariate polynomial, coefficients lowest degree first."""

    __slots__ = ("coeffs", "field")

    def __init__(self, coeffs: Sequence, field):
        self.field = field
        cs = [field(c) if isinstance(c, int) else c for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = cs

    @classmethod
    def x(cls, field) -> "Poly":
        return cls([field.zero, field.one], field)

    @classmethod
    def constant(cls, c, field) -> "Poly":
        return cls([c], field)

    @classmethod
    def from_roots(cls, roots: Sequence, field) -> "Poly":
        result = cls([field.one], field)
        for r in roots:
            result = result * cls([-r, field.one], field)
        return result

    def degree(self) -> int:
        return len(self.coeffs) - 1

    def lc(self):
        return self.coeffs[-1] if self.coeffs else self.field.zero

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, i: int):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else self.field.zero

    def __repr__(self) -> str:
        return "Poly(" + repr(self.coeffs) + ")"

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fp2Elem, TowerElem)):
            return self == Poly([other], self.field)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self.coeffs))

    def key(self) -> Tuple:
        return (self.degree(),) + tuple(c.key() for c in self.coeffs)

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly([other], self.field)

    def __add__(self, other) -> "Poly":
        o = self._lift(other)
        n = max(len(self.coeffs), len(o.coeffs))
        return Poly([self[i] + o[i] for i in range(n)], self.field)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly([-c for c in self.coeffs], self.field)

    def __sub__(self, other) -> "Poly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Poly":
        return self._lift(other) - self

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return Poly([c * other for c in self.coeffs], self.field)
        if not self.coeffs or not other.coeffs:
            return Poly([], self.field)
        prod = [self.field.zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(other.coeffs):
                if b:
                    prod[i + j] = prod[i + j] + a * b
        return Poly(prod, self.field)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        result = Poly([self.field.one], self.field)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __divmod__(self, other: "Poly") -> Tuple["Poly", "Poly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0:
            return Poly([], self.field), Poly(rem, self.field)
        inv_lc = other.lc().inverse()
        quo = [self.field.zero] * (dq + 1)
        n = len(other.coeffs)
        for i in range(dq, -1, -1):
            t = rem[i + n - 1] * inv_lc
            quo[i] = t
            if t:
                for j in range(n):
                    rem[i + j] = rem[i + j] - t * other.coeffs[j]
        return Poly(quo, self.field), Poly(rem[:n - 1], self.field)

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def exact_div(self, other: "Poly") -> "Poly":
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ArithmeticDomainError("polynomial division is not exact")
        return q

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        inv = self.lc().inverse()
        return Poly([c * inv for c in self.coeffs], self.field)

    def derivative(self) -> "Poly":
        return Poly([c * i for i, c in enumerate(self.coeffs)][1:], self.field)

    def __call__(self, x):
        acc = self.field.zero
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def compose(self, g: "Poly") -> "Poly":
        acc = Poly([], self.field)
        for c in reversed(self.coeffs):
            acc = acc * g + c
        return acc

    def map_coeffs(self, fn) -> "Poly":
        return Poly([fn(c) for c in self.coeffs], self.field)

    def conj(self) -> "Poly":
        return self.map_coeffs(lambda c: c.conj())

    def gcd(self, other: "Poly") -> "Poly":
        return poly_gcd(self, other)

    def xgcd(self, other: "Poly") -> Tuple["Poly", "Poly", "Poly"]:
        """Return (g, s, t) with g = s*self + t*other (g not normalized)."""
        one = Poly([self.field.one], self.field)
        zero = Poly([], self.field)
        r0, r1, s0, s1, t0, t1 = self, other, one, zero, zero, one
        while not r1.is_zero():
            q, r = divmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, s0 - q * s1
            t0, t1 = t1, t0 - q * t1
        return r0, s0, t0

    def inverse_mod(self, modulus: "Poly") -> "Poly":
        g, s, _ = self.xgcd(modulus)
        if g.degree() != 0:
            raise ArithmeticDomainError("polynomial is not invertible modulo the modulus")
        return (s * g.coeffs[0].inverse()) % modulus

    def powmod(self, e: int, modulus: "Poly") -> "Poly":
        return poly_powmod(self, e, modulus)

    def sqfree(self) -> "Poly":
        """Radical f / gcd(f, f') (valid while deg f < characteristic)."""
        if self.degree() <= 0:
            return self.monic()
        g = poly_gcd(self, self.derivative())
        return self.exact_div(g).monic() if g.degree() > 0 else self.monic()

    def roots(self, multiplicity: bool = False, rng: Optional[random.Random] = None):
        """Roots in the coefficient field, sorted canonically."""
        return poly_roots(self, multiplicity=multiplicity, rng=rng)


def poly_gcd(f: Poly, g: Poly) -> Poly:
    """Monic greatest common divisor."""
    if f.is_zero() and g.is_zero():
        raise ArithmeticDomainError("gcd of two zero polynomials")
    while not g.is_zero():
        f, g = g, f % g
    return f.monic()


def poly_powmod(base: Poly, exp: int, modulus: Poly) -> Poly:
    """base^exp mod modulus by square-and-multiply."""
    if modulus.degree() < 1:
        raise ArithmeticDomainError("poly_powmod needs a nonconstant modulus")
    result = Poly([base.field.one], base.field)
    b = base % modulus
    e = int(exp)
    while e:
        if e & 1:
            result = (result * b) % modulus
        b = (b * b) % modulus
        e >>= 1
    return result


def _split_linear(g: Poly, rng: random.Random) -> List:
    """Roots of a monic product of distinct linear factors (Cantor-Zassenhaus)."""
    field = g.field
    if g.degree() == 0:
        return []
    if g.degree() == 1:
        return [-g.coeffs[0] * g.coeffs[1].inverse()]
    e = (field.order - 1) // 2
    while True:
        a = field.random_element(rng)
        h = poly_powmod(Poly([a, field.one], field), e, g) - 1
        if h.is_zero():
            continue
        d = poly_gcd(g, h)
        if 0 < d.degree() < g.degree():
            return _split_linear(d, rng) + _split_linear(g.exact_div(d), rng)


def poly_roots(f: Poly, multiplicity: bool = False, rng: Optional[random.Random] = None):
    if f.is_zero():
        raise ArithmeticDomainError("roots of the zero polynomial")
    rng = rng or random.Random(0)
    field = f.field
    f = f.monic()
    if f.degree() < 1:
        return []
    x = Poly.x(field)
    g = poly_gcd(f, poly_powmod(x, field.order, f) - x) if f.degree() > 1 else f
    roots = sorted(_split_linear(g, rng), key=lambda r: r.key())
    if not multiplicity:
        return roots
    out = []
    for r in roots:
        lin = Poly([-r, field.one], field)
        m, h = 0, f
        while True:
            q, rem = divmod(h, lin)
            if not rem.is_zero():
                break
            h, m = q, m + 1
        out.append((r, m))
    return out


def is_irreducible(f: Poly) -> bool:
    """Rabin's irreducibility test over the coefficient field."""
    n = f.degree()
    if n < 1:
        return False
    if n == 1:
        return True
    field = f.field
    f = f.monic()
    x = Poly.x(field)
    q = field.order
    for r in sorted(factorint(n)):
        h = _frobenius_power(x, q, n // r, f) - x
        if poly_gcd(f, h).degree() != 0:
            return False
    return (_frobenius_power(x, q, n, f) - x) % f == Poly([], field)


def _frobenius_power(h: Poly, q: int, k: int, modulus: Poly) -> Poly:
    for _ in range(k):
        h = poly_powmod(h, q, modulus)
    return h


def distinct_degree_factorization(f: Poly) -> List[Tuple[Poly, int]]:
    """Split a monic squarefree f into products of equal-degree irreducibles."""
    field = f.field
    x = Poly.x(field)
    out = []
    f = f.monic()
    h = x
    i = 1
    while f.degree() >= 2 * i:
        h = poly_powmod(h, field.order, f)
        g = poly_gcd(f, h - x)
        if g.degree() > 0:
            out.append((g, i))
            f = f.exact_div(g)
            h = h % f if f.degree() > 0 else h
        i += 1
    if f.degree() > 0:
        out.append((f.monic(), f.degree()))
    return out


def equal_degree_split(f: Poly, e: int, rng: random.Random) -> List[Poly]:
    """Irreducible factors of a monic f whose factors all have degree e."""
    if f.degree() <= e:
        return [f.monic()]
    field = f.field
    exp = (field.order ** e - 1) // 2
    n = f.degree()
    while True:
        a = Poly([field.random_element(rng) for _ in range(n)], field)
        if a.degree() < 1:
            continue
        h = poly_powmod(a, exp, f) - 1
        if h.is_zero():
            continue
        g = poly_gcd(f, h)
        if 0 < g.degree() < n:
            return equal_degree_split(g, e, rng) + equal_degree_split(f.exact_div(g), e, rng)


def factor_squarefree(f: Poly, rng: Optional[random.Random] = None) -> List[Poly]:
    """Monic irreducible factors of a squarefree polynomial, canonically sorted."""
    rng = rng or random.Random(0)
    factors = []
    for g, e in distinct_degree_factorization(f):
        factors.extend(equal_degree_split(g, e, rng))
    return sorted(factors, key=lambda g: g.key())


def find_tower_modulus(ctx: FieldCtx, r: int) -> Poly:
    """First irreducible Y^r - c in enumeration order, then a dense search."""
    one = ctx.one
    for k in range(1, ctx.order):
        c = Fp2Elem(k % ctx.p, k // ctx.p, ctx)
        g = Poly([-c] + [ctx.zero] * (r - 1) + [one], ctx)
        if is_irreducible(g):
            logger.debug("tower degree %d over p=%d: modulus Y^%d - %r", r, ctx.p, r, c)
            return g
        if k > 4 * ctx.p:
            break
    for k in range(1, ctx.order):
        c = Fp2Elem(k % ctx.p, k // ctx.p, ctx)
        for j in range(1, r):
            coeffs = [c] + [ctx.zero] * (r - 1) + [one]
            coeffs[j] = one
            g = Poly(coeffs, ctx)
            if is_irreducible(g):
                logger.debug("tower degree %d over p=%d: dense modulus %r", r, ctx.p, g)
                return g
    raise ArithmeticDomainError(f"no irreducible polynomial of degree {r} found")


def power_sums(f: Poly, count: int) -> List:
    """Power sums s_0..s_{count-1} of the roots of a monic f."""
    field = f.field
    f = f.monic()
    n = f.degree()
    e = [field.one] + [f[n - k] * (-1) ** k for k in range(1, n + 1)]
    s = [field(n)]
    for k in range(1, count):
        acc = field.zero
        for i in range(1, min(k, n + 1)):
            term = e[i] * s[k - i]
            acc = acc + term if i % 2 == 1 else acc - term
        if k <= n:
            term = e[k] * k
            acc = acc + term if k % 2 == 1 else acc - term
        s.append(acc)
    return s[:count]


def poly_from_power_sums(sums: Sequence, field) -> Poly:
    """Monic polynomial whose roots have power sums sums[1..n] (Newton identities)."""
    n = len(sums) - 1
    e = [field.one]
    for k in range(1, n + 1):
        acc = field.zero
        for i in range(1, k + 1):
            term = e[k - i] * sums[i]
            acc = acc + term if i % 2 == 1 else acc - term
        e.append(acc * field(k).inverse())
    return Poly([e[n - i] * (-1) ** (n - i) for i in range(n + 1)], field)


def algebra_traces(theta: Poly, modulus: Poly, count: int) -> List:
    """Traces of theta^k, k = 0..count, in F[z]/(modulus)."""
    field = modulus.field
    n = modulus.degree()
    s = power_sums(modulus, n)
    out = [field(n)]
    power = Poly([field.one], field)
    for _ in range(count):
        power = (power * theta) % modulus
        acc = field.zero
        for i, c in enumerate(power.coeffs):
            acc = acc + c * s[i]
        out.append(acc)
    return out


def charpoly_mod(theta: Poly, modulus: Poly) -> Poly:
    """Characteristic polynomial of multiplication by theta on F[z]/(modulus)."""
    field = modulus.field
    n = modulus.degree()
    if n <= 0:
        return Poly([field.one], field)
    return poly_from_power_sums(algebra_traces(theta, modulus, n), field)
