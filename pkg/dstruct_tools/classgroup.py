"""
Class groups of imaginary quadratic orders via reduced binary quadratic forms.

Only meant for small discriminants (|D| up to about 10^7): every reduced
form is enumerated and the group structure is read off from element orders.
"""

import logging
from typing import Dict, List, Optional

import gmpy2
from sympy import factorint

from .exceptions import ParameterError

logger = logging.getLogger(__name__)


class BinaryQF(tuple):
    """Primitive positive definite form a x^2 + b x y + c y^2."""

    def __new__(cls, a: int, b: int, c: int):
        return tuple.__new__(cls, (int(a), int(b), int(c)))

    @property
    def a(self) -> int:
        return self[0]

    @property
    def b(self) -> int:
        return self[1]

    @property
    def c(self) -> int:
        return self[2]

    def discriminant(self) -> int:
        a, b, c = self
        return b * b - 4 * a * c

    @classmethod
    def identity_for_discriminant(cls, D: int) -> "BinaryQF":
        k = D % 2
        return cls(1, k, (k - D) // 4)

    @classmethod
    def from_ab(cls, a: int, b: int, D: int) -> "BinaryQF":
        num = b * b - D
        if num % (4 * a):
            raise ParameterError(f"no form ({a}, {b}, *) of discriminant {D}")
        return cls(a, b, num // (4 * a)).reduced()

    def normalized(self) -> "BinaryQF":
        a, b, c = self
        if -a < b <= a:
            return self
        r = (a - b) // (2 * a)
        b, c = b + 2 * r * a, a * r * r + b * r + c
        return BinaryQF(a, b, c)

    def reduced(self) -> "BinaryQF":
        a, b, c = self.normalized()
        while a > c or (a == c and b < 0):
            s = (c + b) // (c + c)
            a, b, c = c, -b + 2 * s * c, c * s * s - b * s + a
        return BinaryQF(a, b, c).normalized()

    def is_reduced(self) -> bool:
        a, b, c = self
        return -a < b <= a <= c and not (a == c and b < 0)

    def inverse(self) -> "BinaryQF":
        a, b, c = self
        return BinaryQF(a, -b, c).reduced()

    def compose(self, other: "BinaryQF") -> "BinaryQF":
        """Gaussian composition followed by reduction."""
        D = self.discriminant()
        if other.discriminant() != D:
            raise ParameterError("cannot compose forms of different discriminants")
        (a1, b1, c1), (a2, b2, c2) = self, other
        if a1 > a2:
            (a1, b1, c1), (a2, b2, c2) = (a2, b2, c2), (a1, b1, c1)
        s = (b1 + b2) // 2
        n = b2 - s
        if a2 % a1 == 0:
            y1, d = 0, a1
        else:
            d, u, _ = (int(v) for v in gmpy2.gcdext(a2, a1))
            y1 = u
        if s % d == 0:
            y2, x2, d1 = -1, 0, d
        else:
            d1, x2, y2 = (int(v) for v in gmpy2.gcdext(s, d))
            y2 = -y2
        v1, v2 = a1 // d1, a2 // d1
        r = (y1 * y2 * n - x2 * c2) % v1
        b3 = b2 + 2 * v2 * r
        a3 = v1 * v2
        c3 = (b3 * b3 - D) // (4 * a3)
        return BinaryQF(a3, b3, c3).reduced()

    __mul__ = compose

    def __pow__(self, n: int) -> "BinaryQF":
        if n < 0:
            return self.inverse() ** (-n)
        result = BinaryQF.identity_for_discriminant(self.discriminant())
        base = self.reduced()
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result


def reduced_forms(D: int) -> List[BinaryQF]:
    """All primitive reduced forms of discriminant D < 0."""
    if D >= 0 or D % 4 not in (0, 1):
        raise ParameterError(f"{D} is not a negative discriminant")
    forms = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            if (b - D) % 2:
                continue
            num = b * b - D
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if gmpy2.gcd(gmpy2.gcd(a, b), c) != 1:
                continue
            forms.append(BinaryQF(a, b, c))
        a += 1
    return forms


class ClassGroupSmall:
    """Class group of discriminant D with forms and element orders."""

    def __init__(self, D: int):
        self.discriminant = D
        self.forms = reduced_forms(D)
        self.identity = BinaryQF.identity_for_discriminant(D).reduced()
        self._index: Dict[BinaryQF, int] = {f: i for i, f in enumerate(self.forms)}
        self._orders: Optional[Dict[BinaryQF, int]] = None

    @property
    def h(self) -> int:
        return len(self.forms)

    def __len__(self) -> int:
        return len(self.forms)

    def __contains__(self, f: BinaryQF) -> bool:
        return f in self._index

    def compose(self, f: BinaryQF, g: BinaryQF) -> BinaryQF:
        return f * g

    def order(self, f: BinaryQF) -> int:
        f = f.reduced()
        n, g = 1, f
        while g != self.identity:
            g = g * f
            n += 1
            if n > self.h:
                raise ParameterError("element order exceeds the class number")
        return n

    def orders(self) -> Dict[BinaryQF, int]:
        if self._orders is None:
            self._orders = {f: self.order(f) for f in self.forms}
        return self._orders

    def invariant_factors(self) -> List[int]:
        """Invariant factors n_1 | n_2 | ... with product h (empty for the trivial group)."""
        orders = list(self.orders().values())
        per_prime: Dict[int, List[int]] = {}
        for q in factorint(self.h):
            counts = [1]
            k = 1
            while True:
                c = sum(1 for o in orders if q ** k % o == 0)
                counts.append(c)
                if c == counts[-2]:
                    break
                k += 1
            # number of cyclic factors of order >= q^k is log_q(counts[k] / counts[k-1])
            ranks = []
            for k in range(1, len(counts)):
                ratio = counts[k] // counts[k - 1]
                r = 0
                while ratio > 1:
                    ratio //= q
                    r += 1
                ranks.append(r)
            exps = []
            for k, r in enumerate(ranks, 1):
                nxt = ranks[k] if k < len(ranks) else 0
                exps.extend([k] * (r - nxt))
            per_prime[q] = sorted(exps, reverse=True)
        width = max((len(v) for v in per_prime.values()), default=0)
        factors = []
        for i in range(width):
            n = 1
            for q, exps in per_prime.items():
                if i < len(exps):
                    n *= q ** exps[i]
            factors.append(n)
        return sorted(factors)

    def is_cyclic(self) -> bool:
        return len(self.invariant_factors()) <= 1

    def to_json(self) -> Dict:
        return {
            "discriminant": self.discriminant,
            "h": self.h,
            "invariants": self.invariant_factors(),
            "forms": [list(f) for f in self.forms],
        }


_cache: Dict[int, ClassGroupSmall] = {}


def class_group_oracle(disc: int) -> ClassGroupSmall:
    """
    Class group of the order of discriminant disc.

    Raises:
        ParameterError: If disc is not a negative discriminant
    """
    if disc not in _cache:
        _cache[disc] = ClassGroupSmall(disc)
    return _cache[disc]


def class_number(disc: int) -> int:
    return class_group_oracle(disc).h


def fundamental_discriminant(d: int, p: int) -> int:
    """Discriminant of the maximal order of Q(sqrt(-dp)) for squarefree dp."""
    D = -d * p
    return D if D % 4 == 1 else 4 * D


def ideal_form(D: int, ell: int, lam: int) -> BinaryQF:
    """
    Form attached to the ideal above ell selected by the eigenvalue lam.

    For odd D the ideal is (ell, sqrt(D) - lam) with b = lam (mod ell), b odd;
    for even D it is (ell, sqrt(D/4) - lam) with b = 2 lam (mod 2 ell).  The
    split prime 2 (D = 1 mod 8) uses lam = (1 + b)/2 (mod 2).
    """
    if D % 2:
        if ell == 2:
            for b in (1, -1, 3, -3):
                if (b * b - D) % 8 == 0 and ((1 + b) // 2) % 2 == lam % 2:
                    return BinaryQF.from_ab(2, b, D)
            raise ParameterError(f"2 does not split for discriminant {D}")
        b = lam % ell
        if b % 2 == 0:
            b += ell
        return BinaryQF.from_ab(ell, b, D)
    b = (2 * lam) % (2 * ell)
    return BinaryQF.from_ab(ell, b, D)


def kronecker(D: int, ell: int) -> int:
    return int(gmpy2.kronecker(D, ell))
