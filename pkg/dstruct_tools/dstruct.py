"""
(d, eps)-structures: a curve E over F_{p^2} with a d-isogeny psi: E -> E^(p)
satisfying dual(psi) = eps * conj(psi).
"""

import enum
import itertools
import logging
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from sympy import factorint

from . import config
from .arith import FieldCtx, Fp2Elem, Poly, canonical_sign
from .curve import (
    Curve,
    Point,
    cyclic_kernels,
    isomorphisms,
    scalar_mul,
    supersingular_model,
)
from .exceptions import ArithmeticDomainError, EncodingError, EnumerationLimitError, IsogenyError, SingularCurveError, StructureError
from .isogeny import Isogeny, conj_isogeny, composite_kernel, isomorphism, sample_points, scale_kernel
from .modpoly import ModularPolyTable, default_table, modular_neighbors

logger = logging.getLogger(__name__)


class PrimitivityClass(str, enum.Enum):
    """Crater (Max) or floor (Sub) of the 2-isogeny volcano."""

    MAX = "Max"
    SUB = "Sub"


class DStructure:
    """A (d, eps)-structure (E, psi)."""

    def __init__(self, E: Curve, psi: Isogeny, d: int, eps: int):
        self.E = E
        self.psi = psi
        self.d = d
        self.eps = eps

    @property
    def ctx(self) -> FieldCtx:
        return self.E.ctx

    @property
    def p(self) -> int:
        return self.E.ctx.p

    def __repr__(self) -> str:
        return f"DStructure(d={self.d}, eps={self.eps}, j={self.E.j_invariant()}, alpha={self.psi.alpha})"

    def j(self) -> Fp2Elem:
        return self.E.j_invariant()

    def mu(self, P: Point) -> Point:
        """The endomorphism pi_p after psi."""
        return mu(self, P)

    def negate(self) -> "DStructure":
        return negate(self)

    def conjugate(self) -> "DStructure":
        return conjugate(self)

    def twist(self) -> "DStructure":
        return twist(self)

    def to_json(self) -> Dict:
        return {
            "d": self.d,
            "eps": self.eps,
            "curve": self.E.to_json(),
            "kernel": [c.to_hex() for c in self.psi.kernel.coeffs],
            "alpha": self.psi.alpha.to_hex(),
        }


def _check_points(E: Curve, rng: random.Random, count: int = 4) -> List[Point]:
    return [E.random_point(rng) for _ in range(count)]


def mu(S: DStructure, P: Point) -> Point:
    return S.psi(P).frobenius()


def _determine_eps(E: Curve, psi: Isogeny, d: int, rng: random.Random) -> int:
    """eps with conj(psi) after psi equal to eps*[d], checked pointwise."""
    bar = conj_isogeny(psi)
    plus = minus = True
    decided = 0
    for P in sample_points(E, rng, count=8):
        image = bar(psi(P))
        dP = scalar_mul(d, P)
        plus = plus and image == dP
        minus = minus and image == -dP
        if not plus and not minus:
            break
        if dP != -dP:
            decided += 1
            if decided >= 4:
                break
    if plus and not minus:
        return 1
    if minus and not plus:
        return -1
    if plus and minus:
        raise StructureError("sample points do not separate the two signs")
    raise StructureError("conj(psi) after psi is neither [d] nor -[d]")


def verify(E: Curve, psi: Isogeny, d: Optional[int] = None, rng: Optional[random.Random] = None) -> DStructure:
    """
    Check that (E, psi) is a (d, eps)-structure and determine eps.

    Raises:
        StructureError: If the codomain is not the conjugate curve, or the sign test fails
    """
    rng = rng or random.Random(0)
    d = psi.degree if d is None else d
    if psi.degree != d:
        raise StructureError(f"isogeny has degree {psi.degree}, expected {d}")
    if psi.domain != E:
        raise StructureError("isogeny domain is not the curve")
    if d % E.ctx.p == 0 or any(e > 1 for e in factorint(d).values()):
        raise StructureError(f"degree {d} must be squarefree and prime to p")
    if psi.codomain != E.conjugate():
        raise StructureError("isogeny codomain is not the conjugate curve")
    eps = _determine_eps(E, psi, d, rng)
    return DStructure(E, psi, d, eps)


def negate(S: DStructure) -> DStructure:
    return DStructure(S.E, S.psi.negate(), S.d, S.eps)


def conjugate(S: DStructure) -> DStructure:
    return DStructure(S.E.conjugate(), conj_isogeny(S.psi), S.d, S.eps)


def twist(S: DStructure) -> DStructure:
    """The quadratic twist, a (d, -eps)-structure."""
    ctx = S.ctx
    delta = ctx.nonsquare
    Et = S.E.quadratic_twist(delta)
    kernel = scale_kernel(S.psi.kernel, delta)
    alpha = S.psi.alpha * delta ** ((ctx.p - 1) // 2)
    psi = Isogeny(Et, kernel, alpha)
    if psi.codomain != Et.conjugate():
        raise StructureError("twisted isogeny does not land on the conjugate curve")
    return DStructure(Et, psi, S.d, -S.eps)


def orbit(S: DStructure) -> List[DStructure]:
    """[S, -S, conj S, -conj S] in bit order (sign, conj)."""
    C = conjugate(S)
    return [S, negate(S), C, negate(C)]


def isomorphism_scalars(S1: DStructure, S2: DStructure) -> List[Fp2Elem]:
    """All u with psi2 after tau_u equal to tau_{u^p} after psi1."""
    if S1.d != S2.d:
        return []
    out = []
    for u in isomorphisms(S1.E, S2.E):
        if scale_kernel(S2.psi.kernel, u.inverse() ** 2) != S1.psi.kernel:
            continue
        if S2.psi.alpha * u == u.conj() * S1.psi.alpha:
            out.append(u)
    return out


def is_isomorphic(S1: DStructure, S2: DStructure) -> bool:
    return bool(isomorphism_scalars(S1, S2))


def primitivity(S: DStructure) -> PrimitivityClass:
    """Max iff mu fixes E[2] pointwise; always Max when -dp is not 1 mod 4."""
    if (-S.d * S.p) % 4 != 1:
        return PrimitivityClass.MAX
    two = S.E.two_torsion()
    if len(two) == 3 and all(mu(S, T) == T for T in two):
        return PrimitivityClass.MAX
    return PrimitivityClass.SUB


def mu_squared_check(S: DStructure, rng: Optional[random.Random] = None, count: int = 4) -> bool:
    """mu^2 = [-dp] on random points."""
    rng = rng or random.Random(1)
    for P in _check_points(S.E, rng, count):
        if mu(S, mu(S, P)) != scalar_mul(-S.d * S.p, P):
            return False
    return True


def trace_check(S: DStructure, rng: Optional[random.Random] = None) -> bool:
    """
    The p^2-Frobenius satisfies pi^2 - t pi + p^2 = 0 with t = -2 eps p only.

    Checked on a point over F_{p^4}.
    """
    rng = rng or random.Random(2)
    E, p = S.E, S.p
    tower = E.ctx.tower(2)
    q = p * p
    for _ in range(8):
        P = E.random_point(rng, tower)

        def frob(R: Point) -> Point:
            return R if R.is_infinity() else Point(R.x ** q, R.y ** q, E)

        pi1 = frob(P)
        pi2 = frob(pi1)
        base = pi2 + scalar_mul(q, P)
        good = base - scalar_mul(-2 * S.eps * p, pi1)
        bad = base - scalar_mul(2 * S.eps * p, pi1)
        if bad.is_infinity():
            continue
        return good.is_infinity()
    return False


# -- Hasegawa families ------------------------------------------------------


def _sqrt_or_fail(x: Fp2Elem) -> Fp2Elem:
    r = x.sqrt()
    if r is None:
        raise ArithmeticDomainError("square root missing in F_{p^2}")
    return r


def hasegawa_coefficients(ctx: FieldCtx, d: int, u) -> Tuple[Fp2Elem, Fp2Elem]:
    s = ctx.sqrt_delta * ctx(u)
    if d == 2:
        return (s * 3 - 5) * 6, (s * -9 + 7) * 8
    if d == 3:
        return (s * 4 + 5) * -3, (s * s * 2 + s * 14 + 11) * 2
    raise ValueError(f"no Hasegawa family for d={d}")


def hasegawa(ctx: FieldCtx, d: int, u: int, rng: Optional[random.Random] = None) -> DStructure:
    """
    The family member with parameter u in F_p.

    Raises:
        SingularCurveError: For the finitely many bad parameters
    """
    a, b = hasegawa_coefficients(ctx, d, u)
    E = Curve(a, b, ctx)
    root = 4 if d == 2 else 3
    alpha = _sqrt_or_fail(ctx(-d)).inverse()
    psi = Isogeny(E, Poly([ctx(-root), ctx.one], ctx), alpha)
    return verify(E, psi, d, rng)


def hasegawa2(ctx: FieldCtx, u: int) -> DStructure:
    return hasegawa(ctx, 2, u)


def hasegawa3(ctx: FieldCtx, u: int) -> DStructure:
    return hasegawa(ctx, 3, u)


def from_base_curve(E: Curve, sign: int = 1) -> DStructure:
    """The (1, 1)-structure (E, [sign]) for E defined over F_p."""
    if not (E.a.in_base() and E.b.in_base()):
        raise StructureError("curve is not defined over F_p")
    return verify(E, isomorphism(E, E.ctx(sign)), 1)


def chart_member(ctx: FieldCtx, d: int, eps: int, u: int) -> DStructure:
    """Hasegawa member for u, twisted when the family sign differs from eps."""
    S = hasegawa(ctx, d, u)
    return S if S.eps == eps else twist(S)


def hasegawa_parameters(ctx: FieldCtx, d: int, j: Fp2Elem) -> List[int]:
    """All u in F_p whose family curve has j-invariant j."""
    s = ctx.sqrt_delta
    if d == 2:
        A = Poly([ctx(-30), s * 18], ctx)
        B = Poly([ctx(56), s * -72], ctx)
    else:
        A = Poly([ctx(-15), s * -12], ctx)
        B = Poly([ctx(22), s * 28, ctx(4 * ctx.delta)], ctx)
    A3 = A * A * A * 4
    eq = A3 * j + B * B * j * 27 - A3 * 1728
    if eq.is_zero():
        return []
    return sorted({r.a for r in eq.roots() if r.in_base()})


# -- enumeration on a single curve ------------------------------------------


def subgroup_kernels(E: Curve, d: int, rng: Optional[random.Random] = None) -> List[Poly]:
    """Kernel polynomials of all cyclic subgroups of order d in E(F_{p^2})-bar that are rational."""
    ctx = E.ctx
    if d == 1:
        return [Poly([ctx.one], ctx)]
    per_prime = [cyclic_kernels(E, ell, rng) for ell in sorted(factorint(d))]
    out = []
    for combo in itertools.product(*per_prime):
        out.append(composite_kernel(E, list(combo), rng) if len(combo) > 1 else combo[0])
    return sorted(out, key=lambda K: K.key())


def structures_on_curve(E: Curve, d: int, eps: Optional[int] = None, rng: Optional[random.Random] = None) -> List[DStructure]:
    """All (d, eps)-structures with underlying curve exactly E."""
    rng = rng or random.Random(0)
    target = E.conjugate()
    jt = target.j_invariant()
    found = []
    for K in subgroup_kernels(E, d, rng):
        V = Isogeny(E, K)
        if V.codomain.j_invariant() != jt:
            continue
        for u in isomorphisms(V.codomain, target):
            psi = V.scaled(u)
            try:
                S = verify(E, psi, d, rng)
            except StructureError:
                continue
            if eps is None or S.eps == eps:
                found.append(S)
    found.sort(key=lambda S: (S.psi.kernel.key(), S.psi.alpha.key()))
    return found


def is_distinguished(j: Fp2Elem, d: int, table: Optional[ModularPolyTable] = None) -> bool:
    """Phi_d(j, j^p) = 0 (for d = 1: j in F_p)."""
    if d == 1:
        return j.in_base()
    table = table or default_table()
    return table.evaluate(d, j, j.conj()).is_zero()


# -- encodings --------------------------------------------------------------

KIND_ORDER = {"hasegawa": 0, "generic": 1, "explicit": 2}


@dataclass
class StructureEncoding:
    """Compressed form: a chart coordinate plus sign and conjugation bits."""

    kind: str
    d: int
    eps: int
    u: Optional[int] = None
    j: Optional[Fp2Elem] = None
    disc: int = 0
    sign_bit: int = 0
    conj_bit: int = 0
    explicit: Optional[Dict] = field(default=None)

    def sort_key(self) -> Tuple:
        if self.kind == "hasegawa":
            coord: Tuple = (self.u,)
        elif self.kind == "generic":
            coord = self.j.key() + (self.disc,)
        else:
            coord = (repr(sorted(self.explicit.items())),)
        return (KIND_ORDER[self.kind],) + coord + (self.sign_bit, self.conj_bit)

    def chart(self) -> str:
        """Chart coordinate without the bits."""
        if self.kind == "hasegawa":
            return f"u={self.u}"
        if self.kind == "generic":
            j = self.j
            coord = f"{j.a}" if j.b == 0 else f"{j.a}+{j.b}s"
            return f"j={coord}#{self.disc}"
        return "explicit"

    def to_json(self) -> Dict:
        out: Dict = {"d": self.d, "eps": self.eps, "kind": self.kind}
        if self.kind == "hasegawa":
            out["u"] = self.u
        elif self.kind == "generic":
            out["j"] = self.j.to_hex()
            out["disc"] = self.disc
        else:
            out["explicit"] = self.explicit
        out["sign_bit"] = self.sign_bit
        out["conj_bit"] = self.conj_bit
        return out

    @classmethod
    def from_json(cls, data: Dict, ctx: FieldCtx) -> "StructureEncoding":
        try:
            kind = data["kind"]
            if kind not in KIND_ORDER:
                raise EncodingError(f"unknown encoding kind {kind!r}")
            enc = cls(
                kind=kind,
                d=int(data["d"]),
                eps=int(data["eps"]),
                u=int(data["u"]) if kind == "hasegawa" else None,
                j=ctx.from_hex(data["j"]) if kind == "generic" else None,
                disc=int(data.get("disc", 0)),
                sign_bit=int(data.get("sign_bit", 0)),
                conj_bit=int(data.get("conj_bit", 0)),
                explicit=data.get("explicit") if kind == "explicit" else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EncodingError(f"malformed encoding: {e}") from e
        enc.check_fields(ctx.p)
        return enc

    def check_fields(self, p: int) -> None:
        """
        Reject coordinates and bits that no honest encoder produces.

        Raises:
            EncodingError: If a bit is not 0 or 1, or the chart coordinate is not the canonical one
        """
        for name in ("sign_bit", "conj_bit"):
            if getattr(self, name) not in (0, 1):
                raise EncodingError(f"{name} must be 0 or 1, got {getattr(self, name)!r}")
        if self.kind == "hasegawa" and not 0 <= self.u <= p // 2:
            raise EncodingError(f"u={self.u} is outside [0, {p // 2}]")
        if self.kind == "generic":
            if self.disc < 0:
                raise EncodingError(f"discriminator {self.disc} is negative")
            if self.j.conj().key() < self.j.key():
                raise EncodingError("generic chart expects the smaller of j and its conjugate")
        if self.kind == "explicit" and (self.sign_bit, self.conj_bit) != (0, 0):
            raise EncodingError("explicit encodings carry no orbit bits")

    def to_bytes(self, p: int) -> bytes:
        """Canonical byte string of the chart coordinate and bits."""
        width = (p.bit_length() + 7) // 8
        head = bytes([KIND_ORDER[self.kind], self.d & 0xFF, self.eps & 0xFF])
        bits = bytes([self.sign_bit, self.conj_bit])
        if self.kind == "hasegawa":
            return head + int(self.u).to_bytes(width, "big") + bits
        if self.kind == "generic":
            body = self.j.a.to_bytes(width, "big") + self.j.b.to_bytes(width, "big") + self.disc.to_bytes(2, "big")
            return head + body + bits
        raise EncodingError("explicit encodings have no canonical byte form")


_generic_cache: Dict[Tuple, Tuple[Curve, List[DStructure]]] = {}
_generic_lock = threading.Lock()


def _generic_candidates(ctx: FieldCtx, j: Fp2Elem, d: int, eps: int) -> Tuple[Curve, List[DStructure]]:
    """Reference model for j and its structures with canonical alpha sign."""
    key = (ctx, j.key(), d, eps)
    with _generic_lock:
        if key not in _generic_cache:
            B = supersingular_model(ctx, j, eps, random.Random(ctx.p))
            if B is None:
                raise EncodingError(f"j={j} has no supersingular model with eps={eps}")
            cands = [S for S in structures_on_curve(B, d, eps) if canonical_sign(S.psi.alpha) == S.psi.alpha]
            _generic_cache[key] = (B, cands)
        return _generic_cache[key]


def _bits_against(S: DStructure, R: DStructure) -> Optional[Tuple[int, int]]:
    for k, member in enumerate(orbit(R)):
        if is_isomorphic(S, member):
            return k & 1, k >> 1
    return None


def _encode_hasegawa(S: DStructure) -> Optional[StructureEncoding]:
    ctx, p = S.ctx, S.p
    for u in hasegawa_parameters(ctx, S.d, S.j()):
        ustar = min(u, (p - u) % p)
        try:
            R = chart_member(ctx, S.d, S.eps, ustar)
        except (SingularCurveError, StructureError, IsogenyError):
            continue
        bits = _bits_against(S, R)
        if bits is not None:
            return StructureEncoding("hasegawa", S.d, S.eps, u=ustar, sign_bit=bits[0], conj_bit=bits[1])
    return None


def _encode_generic(S: DStructure) -> StructureEncoding:
    ctx = S.ctx
    j = S.j()
    jc = j.conj()
    jstar = j if j.key() <= jc.key() else jc
    for conj_bit, T in ((0, S), (1, conjugate(S))):
        if T.j() != jstar:
            continue
        _, cands = _generic_candidates(ctx, jstar, S.d, S.eps)
        for disc, R in enumerate(cands):
            for sign_bit, member in ((0, R), (1, negate(R))):
                if is_isomorphic(T, member):
                    return StructureEncoding("generic", S.d, S.eps, j=jstar, disc=disc, sign_bit=sign_bit, conj_bit=conj_bit)
    raise EncodingError("structure matches no reference candidate")


def encode_explicit(S: DStructure) -> StructureEncoding:
    explicit = {
        "a": S.E.a.to_hex(),
        "b": S.E.b.to_hex(),
        "kernel": [c.to_hex() for c in S.psi.kernel.coeffs],
        "alpha": S.psi.alpha.to_hex(),
    }
    return StructureEncoding("explicit", S.d, S.eps, explicit=explicit)


def encode(S: DStructure, allow_explicit: bool = True) -> StructureEncoding:
    """
    Compressed encoding: Hasegawa chart for d in {2, 3}, otherwise the generic chart.

    Raises:
        EncodingError: If no chart applies and explicit output is disallowed
    """
    if S.d in (2, 3):
        enc = _encode_hasegawa(S)
        if enc is not None:
            return enc
    try:
        return _encode_generic(S)
    except EncodingError:
        if not allow_explicit:
            raise
        logger.debug("falling back to explicit encoding for %r", S)
        return encode_explicit(S)


def decode(enc: StructureEncoding, ctx: FieldCtx, check: bool = True) -> DStructure:
    """
    Rebuild a structure from its encoding.

    Raises:
        EncodingError: If the encoding does not describe a structure
    """
    enc.check_fields(ctx.p)
    try:
        if enc.kind == "hasegawa":
            R = chart_member(ctx, enc.d, enc.eps, enc.u)
        elif enc.kind == "generic":
            _, cands = _generic_candidates(ctx, enc.j, enc.d, enc.eps)
            if not 0 <= enc.disc < len(cands):
                raise EncodingError(f"discriminator {enc.disc} out of range")
            R = cands[enc.disc]
        else:
            data = enc.explicit or {}
            E = Curve(ctx.from_hex(data["a"]), ctx.from_hex(data["b"]), ctx)
            kernel = Poly([ctx.from_hex(c) for c in data["kernel"]], ctx)
            psi = Isogeny(E, kernel, ctx.from_hex(data["alpha"]))
            R = verify(E, psi, enc.d) if check else DStructure(E, psi, enc.d, enc.eps)
            if check and R.eps != enc.eps:
                raise EncodingError(f"structure has eps={R.eps}, encoding claims {enc.eps}")
    except (SingularCurveError, IsogenyError, StructureError, KeyError, TypeError) as e:
        raise EncodingError(f"cannot decode: {e}") from e
    return orbit(R)[enc.sign_bit + 2 * enc.conj_bit]


def canonical_encoding(S: DStructure) -> StructureEncoding:
    """Least encoding over the orbit {S, -S, conj S, -conj S}."""
    return min((encode(T) for T in orbit(S)), key=lambda e: e.sort_key())


def label(S: DStructure) -> str:
    """Orbit chart coordinate plus the bits placing S in its orbit."""
    rep = canonical_encoding(S)
    R = decode(rep, S.ctx, check=False)
    bits = _bits_against(S, R) or (rep.sign_bit, rep.conj_bit)
    return f"{rep.chart()}.{bits[0]}{bits[1]}"


# -- brute-force enumeration -----------------------------------------------


def supersingular_j_invariants(ctx: FieldCtx, table: Optional[ModularPolyTable] = None) -> List[Fp2Elem]:
    """All supersingular j in F_{p^2}, by breadth-first search in the 2-isogeny graph."""
    table = table or default_table()
    p = ctx.p
    seed = None
    if p % 3 == 2:
        seed = ctx.zero
    elif p % 4 == 3:
        seed = ctx(1728)
    else:
        rng = random.Random(p)
        for j in range(p):
            if supersingular_model(ctx, ctx(j), 1, rng) is not None:
                seed = ctx(j)
                break
    if seed is None:
        raise EnumerationLimitError(f"no supersingular j found in F_{p}")
    seen = {seed.key(): seed}
    frontier = [seed]
    while frontier:
        nxt = []
        for j in frontier:
            for n in modular_neighbors(j, 2, table):
                if n.key() not in seen:
                    seen[n.key()] = n
                    nxt.append(n)
        frontier = nxt
    return sorted(seen.values(), key=lambda j: j.key())


def _structures_at(ctx: FieldCtx, j: Fp2Elem, d: int, eps: int) -> List[DStructure]:
    E = supersingular_model(ctx, j, eps, random.Random(ctx.p))
    if E is None:
        return []
    return structures_on_curve(E, d, eps)


def dedupe(structures: List[DStructure]) -> List[DStructure]:
    """Isomorphism-class representatives, in input order."""
    reps: List[DStructure] = []
    by_j: Dict[Tuple, List[DStructure]] = {}
    for S in structures:
        bucket = by_j.setdefault(S.j().key(), [])
        if not any(is_isomorphic(S, R) for R in bucket):
            bucket.append(S)
            reps.append(S)
    return reps


def enumerate_all(
    d: int,
    eps: int,
    p: int,
    ctx: Optional[FieldCtx] = None,
    table: Optional[ModularPolyTable] = None,
    workers: int = 1,
) -> List[DStructure]:
    """
    Every (d, eps)-structure over F_{p^2} up to isomorphism.

    Raises:
        EnumerationLimitError: If p exceeds ``enumerate.max_p``
    """
    limit = config.get("enumerate.max_p", 400)
    if p > limit:
        raise EnumerationLimitError(f"p={p} exceeds the enumeration limit {limit}")
    ctx = ctx or FieldCtx(p)
    table = table or default_table()
    js = [j for j in supersingular_j_invariants(ctx, table) if is_distinguished(j, d, table)]
    logger.info("enumerating (%d,%d)-structures at p=%d over %d j-invariants", d, eps, p, len(js))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda j: _structures_at(ctx, j, d, eps), js))
    else:
        batches = [_structures_at(ctx, j, d, eps) for j in js]
    return dedupe([S for batch in batches for S in batch])


def structures_at_j(ctx: FieldCtx, j, d: int, eps: int) -> List[DStructure]:
    """Structures on the supersingular model with the given j, up to isomorphism."""
    return dedupe(_structures_at(ctx, ctx(j), d, eps))
