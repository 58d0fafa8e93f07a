"""
The class group action on (d, eps)-structures.

An ideal (ell, mu - lam) acts through the ell-isogeny whose kernel is the
lam-eigenspace of mu = pi_p after psi.  The structure is carried along by
pushing psi through that isogeny, so the result is again a (d, eps)-structure.
"""

import logging
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import factorint, isprime
from sympy.ntheory import n_order

from .arith import Poly, sqrt_mod
from .classgroup import (
    BinaryQF,
    ClassGroupSmall,
    class_group_oracle,
    fundamental_discriminant,
    ideal_form,
    kronecker,
)
from .curve import cyclic_kernels, division_polynomials, extension_order, scalar_mul, torsion_basis, torsion_xpoly
from .dstruct import DStructure, PrimitivityClass, is_isomorphic, primitivity, structures_on_curve, verify
from .exceptions import AmbiguousStructureError, NotSplitError, ParameterError, StructureError, TorsionError
from .isogeny import (
    Isogeny,
    compose,
    conj_isogeny,
    kernel_polynomial_from_point,
    push_kernel,
    sample_points,
    scaling_between,
)
from .modpoly import ModularPolyTable, default_table

logger = logging.getLogger(__name__)

__all__ = [
    "ExponentVector",
    "SplitIdeal",
    "act",
    "act_step",
    "act_modular",
    "act_velu",
    "act_vector",
    "class_group_oracle",
    "distinguished_neighbors",
    "floor_rotation",
    "ideal",
    "orbit_under",
    "push_structure",
    "ramified_involution",
    "ramified_step",
    "split_ideals",
    "structure_neighbors",
]


@dataclass(frozen=True)
class SplitIdeal:
    """
    The prime ideal (ell, mu - lam) of the maximal order of Q(sqrt(-dp)).

    For the split prime 2 (when -dp = 1 mod 8) lam is instead the eigenvalue
    of (1 + mu)/2 modulo 2.  Ramified ideals have kind "ramified".
    """

    ell: int
    lam: int
    kind: str = "split"

    def conjugate(self) -> "SplitIdeal":
        if self.kind == "ramified":
            return self
        if self.ell == 2:
            return SplitIdeal(2, 1 - self.lam)
        return SplitIdeal(self.ell, (-self.lam) % self.ell)

    def form(self, d: int, p: int) -> BinaryQF:
        """Reduced form of the ideal class."""
        return ideal_form(fundamental_discriminant(d, p), self.ell, self.lam)

    def to_json(self) -> Dict:
        return {"ell": self.ell, "lam": self.lam, "kind": self.kind}

    @classmethod
    def from_json(cls, data: Dict) -> "SplitIdeal":
        return cls(int(data["ell"]), int(data["lam"]), data.get("kind", "split"))


def split_ideals(d: int, p: int, ell: int) -> List[SplitIdeal]:
    """
    Prime ideals above ell that act on (d, eps)-structures.

    Empty when ell is inert.

    Raises:
        ParameterError: If ell is not a prime different from p
    """
    if not isprime(ell) or ell == p:
        raise ParameterError(f"ell={ell} must be a prime different from p")
    D = fundamental_discriminant(d, p)
    if d % ell == 0:
        return [SplitIdeal(ell, 0, "ramified")]
    if ell == 2:
        if D % 2 == 0:
            return [SplitIdeal(2, (d * p) % 2, "ramified")]
        if D % 8 == 1:
            return [SplitIdeal(2, 0), SplitIdeal(2, 1)]
        return []
    if kronecker(D, ell) != 1:
        return []
    lam = sqrt_mod((-d * p) % ell, ell)
    return [SplitIdeal(ell, lam), SplitIdeal(ell, ell - lam)]


def ideal(d: int, p: int, ell: int, lam: Optional[int] = None) -> SplitIdeal:
    """
    The ideal above ell with the given eigenvalue (default: the smaller one).

    Raises:
        NotSplitError: If ell is inert or lam is not an eigenvalue
    """
    ideals = split_ideals(d, p, ell)
    if not ideals:
        raise NotSplitError(f"{ell} is inert in Q(sqrt(-{d * p}))")
    if lam is None:
        return min(ideals, key=lambda I: I.lam)
    for I in ideals:
        if I.lam == lam % (2 if ell == 2 else ell):
            return I
    raise NotSplitError(f"{lam} is not an eigenvalue of mu modulo {ell}")


def class_group(d: int, p: int) -> ClassGroupSmall:
    return class_group_oracle(fundamental_discriminant(d, p))


def eigen_field_degree(S: DStructure, ell: int) -> int:
    """Degree r of the tower over F_{p^2} on which the mu-eigenspaces of E[ell] are rational."""
    return int(n_order((-S.eps * S.p) % ell, ell))


def _with_trace(S: DStructure):
    return S.E.with_trace(-2 * S.eps * S.p)


# -- pushing a structure through an isogeny ---------------------------------


def push_structure(S: DStructure, phi: Isogeny, rng: Optional[random.Random] = None) -> DStructure:
    """
    The structure (E', psi') with psi' after phi equal to conj(phi) after psi.

    ker(phi) must be mu-stable and meet ker(psi) trivially.

    Raises:
        StructureError: If psi' cannot be normalized onto the conjugate codomain
    """
    rng = rng or random.Random(0)
    E2 = phi.codomain
    V = Isogeny(E2, push_kernel(phi, S.psi.kernel))
    phibar = conj_isogeny(phi)
    for P in sample_points(S.E, rng):
        beta = scaling_between(phibar(S.psi(P)), V(phi(P)))
        if beta is None:
            continue
        psi2 = V.scaled(beta)
        if psi2.codomain != E2.conjugate():
            raise StructureError("pushed isogeny does not land on the conjugate curve")
        return DStructure(E2, psi2, S.d, S.eps)
    raise StructureError("could not normalize the pushed isogeny")


def _commutes(T: DStructure, S: DStructure, phi: Isogeny, rng: random.Random, count: int = 6) -> bool:
    phibar = conj_isogeny(phi)
    checked = 0
    for P in sample_points(S.E, rng):
        Q = phi(P)
        if Q.is_infinity():
            continue
        if T.psi(Q) != phibar(S.psi(P)):
            return False
        checked += 1
        if checked >= count:
            break
    return checked > 0


def _mu_stable(S: DStructure, kernel: Poly) -> bool:
    """True if x(mu(P)) is again a root of the kernel polynomial for every root x(P)."""
    N, M = S.psi.x_map()
    h = (N * M.inverse_mod(kernel)) % kernel
    theta = h.powmod(S.p, kernel)
    acc = Poly([], kernel.field)
    for c in reversed(kernel.coeffs):
        acc = (acc * theta + c) % kernel
    return acc.is_zero()


# -- odd split primes -------------------------------------------------------


def _eigen_kernel_velu(S: DStructure, I: SplitIdeal, r: int, rng: random.Random) -> Poly:
    E = _with_trace(S)
    ell, lam = I.ell, I.lam
    N = extension_order(E, r)
    if N % ell:
        raise TorsionError(f"E[{ell}] is not rational over the degree-{r} tower")
    cof = N
    while cof % ell == 0:
        cof //= ell
    field = E.ctx.tower(r)
    for _ in range(64):
        R = scalar_mul(cof, E.random_point(rng, field))
        if R.is_infinity():
            continue
        while not scalar_mul(ell, R).is_infinity():
            R = scalar_mul(ell, R)
        K = S.mu(R) + scalar_mul(lam, R)
        if not K.is_infinity():
            return kernel_polynomial_from_point(K)
    raise TorsionError(f"no point in the {lam}-eigenspace of E[{ell}]")


def _velu_step(I: SplitIdeal, S: DStructure, rng: random.Random) -> Tuple[Isogeny, DStructure]:
    r = eigen_field_degree(S, I.ell)
    if r > S.ctx.r_max:
        raise TorsionError(f"eigenspace for ell={I.ell} needs tower degree {r} > {S.ctx.r_max}")
    kernel = _eigen_kernel_velu(S, I, r, rng)
    phi = Isogeny(S.E, kernel)
    logger.debug("ell=%d lam=%d via Velu over tower degree %d", I.ell, I.lam, r)
    return phi, push_structure(S, phi, rng)


def act_velu(I: SplitIdeal, S: DStructure, rng: Optional[random.Random] = None) -> DStructure:
    """
    Act by an odd split ideal using an eigenpoint over a small tower.

    Raises:
        TorsionError: If the eigenspace needs a tower beyond ``r_max``
    """
    return _velu_step(I, S, rng or random.Random(0))[1]


def distinguished_neighbors(
    j, ell: int, d: int, table: Optional[ModularPolyTable] = None, prev=None
) -> List:
    """
    Roots of gcd(Phi_ell(j, X), Phi_d(X, X^p)): the ell-neighbours of j carrying a d-structure.
    """
    table = table or default_table()
    F = table.specialize(ell, j)
    G = F.gcd(table.frobenius_compose(d, F))
    roots = G.roots() if G.degree() > 0 else []
    if prev is not None:
        roots = [r for r in roots if r != prev]
    return roots


def _eigen_kernel_modular(S: DStructure, I: SplitIdeal) -> Poly:
    """
    Kernel polynomial of the lam-eigenspace without leaving F_{p^2}.

    Points of E[ell] with x(mu P) = x([n] P) are cut out of psi_ell first; the
    y-coordinate then separates the lam- and (-lam)-eigenspaces.
    """
    E, ctx, p = S.E, S.ctx, S.p
    ell, lam = I.ell, I.lam
    n, sign = lam % ell, 1
    if n % 2 == 0:
        n, sign = ell - n, -1
    L = division_polynomials(E, ell)[ell].monic()
    N, M = S.psi.x_map()
    h = (N * M.inverse_mod(L)) % L
    theta = h.powmod(p, L)
    x = Poly.x(ctx)
    f = E.f_poly()
    divs = division_polynomials(E, 2 * n + 1, modulus=L)
    if n == 1:
        xn = x
    else:
        num = f * divs[n - 1] * divs[n + 1] * 4
        xn = x - num * (divs[n] * divs[n]).inverse_mod(L)
    G = L.gcd((theta - xn) % L)
    if G.degree() < 1:
        raise StructureError(f"no mu-eigenvectors found in E[{ell}]")
    Xd = ((N.derivative() * M - N * M.derivative()) * (M * M).inverse_mod(G)) % G
    lhs = (Xd * S.psi.alpha).powmod(p, G) * f.powmod((p - 1) // 2, G)
    lhs = (lhs * divs[n].powmod(4, G)) % G
    rhs = divs[2 * n] % G
    D = G.gcd((lhs - rhs * sign) % G)
    if D.degree() != (ell - 1) // 2:
        raise StructureError(f"eigenspace kernel has degree {D.degree()}, expected {(ell - 1) // 2}")
    return D


def _modular_step(
    I: SplitIdeal, S: DStructure, table: ModularPolyTable, prev, rng: random.Random
) -> Tuple[Isogeny, DStructure]:
    candidates = distinguished_neighbors(S.j(), I.ell, S.d, table, prev)
    phi = Isogeny(S.E, _eigen_kernel_modular(S, I))
    j2 = phi.codomain.j_invariant()
    if j2 not in candidates:
        raise StructureError(f"eigenspace neighbour {j2} is not among the {len(candidates)} candidates")
    matches = [T for T in structures_on_curve(phi.codomain, S.d, S.eps, rng) if _commutes(T, S, phi, rng)]
    if len(matches) > 1:
        raise AmbiguousStructureError(f"{len(matches)} structures fit above j={j2}")
    if not matches:
        raise StructureError(f"no structure above j={j2} commutes with the isogeny")
    logger.debug("ell=%d lam=%d via modular polynomials", I.ell, I.lam)
    return phi, matches[0]


def act_modular(
    I: SplitIdeal,
    S: DStructure,
    table: Optional[ModularPolyTable] = None,
    prev=None,
    rng: Optional[random.Random] = None,
) -> DStructure:
    """
    Act by an odd split ideal using modular polynomials.

    The neighbour j-invariants come from the gcd with Phi_d(X, X^p); the
    structure at the chosen neighbour is the unique one making the square
    with the eigenspace isogeny commute.

    Raises:
        AmbiguousStructureError: If more than one structure fits
        StructureError: If none does
    """
    return _modular_step(I, S, table or default_table(), prev, rng or random.Random(0))[1]


# -- the prime 2 and ramified primes ----------------------------------------


def _two_kernel(S: DStructure, I: SplitIdeal, rng: random.Random) -> Poly:
    ctx = S.ctx
    if I.kind == "ramified":
        fixed = [T for T in S.E.two_torsion() if S.mu(T) == T]
        if len(fixed) != 1:
            raise StructureError(f"expected one mu-fixed 2-torsion point, found {len(fixed)}")
        return Poly([-fixed[0].x, ctx.one], ctx)
    if primitivity(S) != PrimitivityClass.MAX:
        raise NotSplitError("the split prime 2 only acts on Max structures")
    P1, P2 = torsion_basis(_with_trace(S), 4, rng)
    for Q in (P1, P2, P1 + P2):
        T = scalar_mul(2, Q)
        omega = Q + S.mu(Q)
        if (I.lam == 0 and omega.is_infinity()) or (I.lam == 1 and omega == T):
            return kernel_polynomial_from_point(T)
    raise StructureError("no 2-torsion point in the requested eigenspace")


def _two_step(I: SplitIdeal, S: DStructure, rng: random.Random) -> Tuple[Isogeny, DStructure]:
    phi = Isogeny(S.E, _two_kernel(S, I, rng))
    return phi, push_structure(S, phi, rng)


def ramified_step(S: DStructure, ell: int, rng: Optional[random.Random] = None) -> Tuple[Isogeny, DStructure]:
    """
    Act by the ramified ideal above a prime ell dividing d.

    Its kernel is ker(psi)[ell]; with psi = H after psi1 the new structure is
    conj(psi1) after H on the codomain of psi1.
    """
    rng = rng or random.Random(0)
    E, d = S.E, S.d
    if d % ell:
        raise ParameterError(f"{ell} does not divide d={d}")
    D = S.psi.kernel
    psi1 = Isogeny(E, D.gcd(torsion_xpoly(E, ell)))
    rest = d // ell
    DH = D.gcd(torsion_xpoly(E, rest)) if rest > 1 else Poly([E.ctx.one], E.ctx)
    H = Isogeny(psi1.codomain, push_kernel(psi1, DH))
    for P in sample_points(E, rng):
        beta = scaling_between(S.psi(P), H(psi1(P)))
        if beta is not None:
            H = H.scaled(beta)
            break
    else:
        raise StructureError("could not factor psi through its ell-part")
    new = compose(H, conj_isogeny(psi1), rng)
    T = verify(psi1.codomain, new, d, rng)
    if T.eps != S.eps:
        raise StructureError("ramified step changed the sign")
    return psi1, T


def ramified_involution(S: DStructure, rng: Optional[random.Random] = None) -> DStructure:
    """Product of the ramified ideals above d; the result is isomorphic to conj(S)."""
    for ell in sorted(factorint(S.d)):
        _, S = ramified_step(S, ell, rng)
    return S


def act_step(
    I: SplitIdeal,
    S: DStructure,
    prev=None,
    method: str = "auto",
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
) -> Tuple[Isogeny, DStructure]:
    """
    Apply the ideal I to S, returning the connecting isogeny with the result.

    Args:
        I: Ideal from ``split_ideals``
        S: Structure to act on
        prev: Previous j-invariant on a walk, excluded from modular candidates
        method: "velu", "modular" or "auto" (Velu whenever the tower degree is at most r_max)
        table: Modular polynomial table
        rng: Randomness for point sampling

    Raises:
        NotSplitError: If lam is not an eigenvalue of mu modulo ell
    """
    rng = rng or random.Random(0)
    if method not in ("auto", "velu", "modular"):
        raise ValueError(f"unknown action method {method!r}")
    ell = I.ell
    if S.d % ell == 0:
        return ramified_step(S, ell, rng)
    if ell == 2:
        return _two_step(I, S, rng)
    if (I.lam * I.lam + S.d * S.p) % ell:
        raise NotSplitError(f"{I.lam} is not an eigenvalue of mu modulo {ell}")
    if method == "auto":
        method = "velu" if eigen_field_degree(S, ell) <= S.ctx.r_max else "modular"
    if method == "velu":
        return _velu_step(I, S, rng)
    return _modular_step(I, S, table or default_table(), prev, rng)


def act(
    I: SplitIdeal,
    S: DStructure,
    prev=None,
    method: str = "auto",
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
) -> DStructure:
    """Apply the ideal I to S; see ``act_step``."""
    return act_step(I, S, prev, method, table, rng)[1]


@dataclass(frozen=True)
class ExponentVector:
    """Exponents e_i for the ideals above primes ell_i."""

    primes: Tuple[int, ...]
    exps: Tuple[int, ...]

    def __post_init__(self):
        if len(self.primes) != len(self.exps):
            raise ParameterError("primes and exponents differ in length")

    def norm_inf(self) -> int:
        return max((abs(e) for e in self.exps), default=0)

    def __add__(self, other: "ExponentVector") -> "ExponentVector":
        if self.primes != other.primes:
            raise ParameterError("exponent vectors over different primes")
        return ExponentVector(self.primes, tuple(a + b for a, b in zip(self.exps, other.exps)))

    def __neg__(self) -> "ExponentVector":
        return ExponentVector(self.primes, tuple(-e for e in self.exps))

    def to_json(self) -> Dict:
        return {"primes": list(self.primes), "exps": list(self.exps)}

    @classmethod
    def from_json(cls, data: Dict) -> "ExponentVector":
        return cls(tuple(int(x) for x in data["primes"]), tuple(int(x) for x in data["exps"]))


def act_vector(
    v: ExponentVector,
    S: DStructure,
    ideals: Optional[Sequence[SplitIdeal]] = None,
    method: str = "auto",
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
) -> DStructure:
    """
    Apply prod I_i^{e_i}; negative exponents use the conjugate ideal.

    Args:
        v: Exponent vector
        S: Starting structure
        ideals: The ideal chosen above each prime (default: smaller eigenvalue)
    """
    rng = rng or random.Random(0)
    if ideals is None:
        ideals = [ideal(S.d, S.p, ell) for ell in v.primes]
    if len(ideals) != len(v.exps):
        raise ParameterError("one ideal per exponent is required")
    for I, e in zip(ideals, v.exps):
        step = I if e > 0 else I.conjugate()
        for _ in range(abs(e)):
            S = act(step, S, method=method, table=table, rng=rng)
    return S


def floor_rotation(S: DStructure, rng: Optional[random.Random] = None) -> DStructure:
    """
    Cyclic rotation of the three Sub structures below one Max structure.

    Realized by the order-4 kernel E[4] intersected with ker(mu - 1); only
    defined when -dp = 5 mod 8.

    Raises:
        StructureError: For the wrong congruence or a Max input
    """
    rng = rng or random.Random(0)
    if (-S.d * S.p) % 8 != 5:
        raise StructureError("floor rotation needs -dp = 5 mod 8")
    if primitivity(S) != PrimitivityClass.SUB:
        raise StructureError("floor rotation acts on Sub structures")
    P1, P2 = torsion_basis(_with_trace(S), 4, rng)
    for a, b in ((1, 0), (0, 1), (1, 1), (1, 2), (2, 1), (1, 3)):
        Q = scalar_mul(a, P1) + scalar_mul(b, P2)
        if S.mu(Q) == Q:
            phi = Isogeny(S.E, kernel_polynomial_from_point(Q))
            return push_structure(S, phi, rng)
    raise StructureError("no cyclic 4-subgroup fixed by mu")


def structure_neighbors(
    S: DStructure, ell: int, rng: Optional[random.Random] = None
) -> List[Tuple[Isogeny, DStructure]]:
    """
    All ell-isogenies of structures out of S, with their targets.

    One per mu-stable cyclic subgroup of order ell.
    """
    rng = rng or random.Random(0)
    if S.d % ell == 0:
        return [ramified_step(S, ell, rng)]
    out = []
    for K in cyclic_kernels(S.E, ell, rng):
        if not _mu_stable(S, K):
            continue
        phi = Isogeny(S.E, K)
        out.append((phi, push_structure(S, phi, rng)))
    return out


def orbit_under(I: SplitIdeal, S: DStructure, limit: int, **kwargs) -> List[DStructure]:
    """Iterate I until the orbit closes (up to isomorphism) or ``limit`` steps."""
    seen = [S]
    T = S
    for _ in range(limit):
        T = act(I, T, **kwargs)
        if is_isomorphic(T, S):
            return seen
        seen.append(T)
    return seen


