"""
Navigating the supersingular isogeny graph through distinguished vertices.

A vertex is distinguished for d when its curve carries a (d, eps)-structure.
Random 2-walks reach such vertices after roughly sqrt(p/d) steps; from there
the class group action moves within the structure set until two walks meet.
"""

import logging
import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from sympy import primerange, sympify

from . import config
from .action import act_step, eigen_field_degree, ideal, split_ideals, structure_neighbors
from .arith import FieldCtx, Fp2Elem, Poly
from .classgroup import class_group_oracle, fundamental_discriminant, kronecker
from .curve import Curve, Point, cyclic_kernels, has_exponent, isomorphisms, supersingular_model
from .dstruct import (
    DStructure,
    PrimitivityClass,
    chart_member,
    encode,
    is_distinguished,
    primitivity,
    structures_at_j,
    structures_on_curve,
    supersingular_j_invariants,
)
from .exceptions import (
    ArithmeticDomainError,
    BudgetExceededError,
    IsogenyError,
    ModularPolynomialError,
    NoSeedError,
    NotSplitError,
    ParameterError,
    SingularCurveError,
    StructureError,
)
from .isogeny import Isogeny, conj_isogeny, dual, isomorphism, sample_points
from .modpoly import ModularPolyTable, default_table, modular_neighbors

logger = logging.getLogger(__name__)

__all__ = [
    "Crossroad",
    "HitRateReport",
    "IsogenyPath",
    "KappaEstimate",
    "ascend",
    "curve_eps",
    "delfs_galbraith",
    "find_crossroads",
    "hit_rate_experiment",
    "kappa_estimate",
    "phase2_ideals",
    "seed_vertex",
    "sidh_start_check",
    "structure_count",
    "walk_to_distinguished",
]


def jkey(j: Fp2Elem) -> Tuple[int, int]:
    """Key identifying j with its conjugate."""
    return min(j.key(), j.conj().key())


def curve_eps(E: Curve, rng: Optional[random.Random] = None) -> int:
    """
    Sign eps with E(F_{p^2}) of exponent p + eps.

    Raises:
        StructureError: If E has neither exponent (it is not supersingular)
    """
    p = E.ctx.p
    if E.trace in (-2 * p, 2 * p):
        return -E.trace // (2 * p)
    rng = rng or random.Random(p)
    for eps in (1, -1):
        if has_exponent(E, p + eps, rng):
            return eps
    raise StructureError(f"{E} has exponent neither p+1 nor p-1")


# -- paths ------------------------------------------------------------------


@dataclass
class IsogenyPath:
    """A chain of isogenies, each starting where the previous one ends."""

    start: Curve
    steps: List[Isogeny] = field(default_factory=list)

    @property
    def end(self) -> Curve:
        return self.steps[-1].codomain if self.steps else self.start

    @property
    def degree(self) -> int:
        return math.prod(phi.degree for phi in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def copy(self) -> "IsogenyPath":
        return IsogenyPath(self.start, list(self.steps))

    def append(self, phi: Isogeny) -> None:
        """
        Raises:
            IsogenyError: If phi does not start at the current end
        """
        if phi.domain != self.end:
            raise IsogenyError("step does not start at the end of the path")
        self.steps.append(phi)

    def extend(self, other: "IsogenyPath") -> None:
        for phi in other.steps:
            self.append(phi)

    def evaluate(self, P: Point) -> Point:
        for phi in self.steps:
            P = phi(P)
        return P

    def reversed(self, rng: Optional[random.Random] = None) -> "IsogenyPath":
        """The path back, made of the duals in reverse order."""
        rng = rng or random.Random(0)
        back = IsogenyPath(self.end)
        for phi in reversed(self.steps):
            back.append(dual(phi, rng))
        return back

    def verify(self, rng: Optional[random.Random] = None, count: int = 3) -> bool:
        """Chaining plus additivity of every step on random points."""
        rng = rng or random.Random(0)
        current = self.start
        for phi in self.steps:
            if phi.domain != current:
                return False
            points = list(sample_points(current, rng, count))[: 2 * count]
            for P, Q in zip(points[::2], points[1::2]):
                if phi(P + Q) != phi(P) + phi(Q):
                    return False
            current = phi.codomain
        return True

    def j_invariants(self) -> List[Fp2Elem]:
        return [self.start.j_invariant()] + [phi.codomain.j_invariant() for phi in self.steps]

    def to_json(self) -> Dict:
        return {
            "start": self.start.to_json(),
            "end": self.end.to_json(),
            "length": len(self.steps),
            "degree": self.degree,
            "degrees": [phi.degree for phi in self.steps],
            "j": [str(j) for j in self.j_invariants()],
            "steps": [phi.to_json() for phi in self.steps],
        }


class Budget:
    """Step and wall-clock limits shared by the phases of a search."""

    def __init__(self, max_steps: Optional[int] = None, max_seconds: Optional[float] = None):
        self.max_steps = max_steps
        self.max_seconds = max_seconds
        self.steps = 0
        self.started = time.monotonic()

    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def tick(self, partial: Callable[[], Dict]) -> None:
        self.steps += 1
        if self.max_steps is not None and self.steps > self.max_steps:
            raise BudgetExceededError(f"step budget of {self.max_steps} exhausted", partial())
        if self.max_seconds is not None and self.elapsed() > self.max_seconds:
            raise BudgetExceededError(f"time budget of {self.max_seconds}s exhausted", partial())


# -- crossroads and seeds ---------------------------------------------------


@dataclass
class Crossroad:
    """A j-invariant distinguished for two degrees at once."""

    j: Fp2Elem
    d1: int
    d2: int
    eps: int
    witnesses: Dict[int, List[DStructure]] = field(default_factory=dict)

    def to_json(self) -> Dict:
        return {
            "j": str(self.j),
            "j_hex": self.j.to_hex(),
            "d1": self.d1,
            "d2": self.d2,
            "eps": self.eps,
            "structures": {str(d): [encode(S).to_json() for S in found] for d, found in sorted(self.witnesses.items())},
        }


def _crossroad_candidates(d1: int, d2: int, ctx: FieldCtx, table: ModularPolyTable) -> List[Fp2Elem]:
    m = d1 * d2
    if table.available(m):
        diag = table.diagonal(m, ctx)
        return diag.roots() if not diag.is_zero() else []
    if ctx.p <= config.get("enumerate.max_p", 400):
        return supersingular_j_invariants(ctx, table)
    raise ModularPolynomialError(f"Phi_{m} is not tabulated and p={ctx.p} is too large to enumerate")


def find_crossroads(
    d1: int,
    d2: int,
    p: int,
    ctx: Optional[FieldCtx] = None,
    eps: int = 1,
    table: Optional[ModularPolyTable] = None,
) -> List[Crossroad]:
    """
    Curves carrying both a (d1, eps)- and a (d2, eps)-structure.

    Both structures give a cyclic endomorphism of degree d1 d2, so the
    candidates are the roots of Phi_{d1 d2}(X, X).

    Raises:
        ParameterError: If d1 and d2 are equal or share a factor
    """
    if d1 == d2 or math.gcd(d1, d2) != 1:
        raise ParameterError(f"crossroads need coprime distinct degrees, got {d1} and {d2}")
    ctx = ctx or FieldCtx(p)
    table = table or default_table()
    out = []
    for j in sorted(_crossroad_candidates(d1, d2, ctx, table), key=lambda j: j.key()):
        if not (is_distinguished(j, d1, table) and is_distinguished(j, d2, table)):
            continue
        w1 = structures_at_j(ctx, j, d1, eps)
        if not w1:
            continue
        w2 = structures_at_j(ctx, j, d2, eps)
        if w2:
            out.append(Crossroad(j, d1, d2, eps, {d1: w1, d2: w2}))
    logger.info("found %d (%d,%d)-crossroads at p=%d", len(out), d1, d2, p)
    return out


def _hasegawa_seed(d: int, eps: int, ctx: FieldCtx, rng: random.Random) -> Optional[DStructure]:
    p = ctx.p
    for u in range(p):
        try:
            S = chart_member(ctx, d, eps, u)
        except (SingularCurveError, StructureError, ArithmeticDomainError, IsogenyError):
            continue
        if has_exponent(S.E, p + eps, rng):
            logger.debug("seed from the degree-%d family at u=%d", d, u)
            return S
    return None


def _base_seed(eps: int, ctx: FieldCtx, rng: random.Random) -> Optional[DStructure]:
    p = ctx.p
    candidates = []
    if p % 3 == 2:
        candidates.append(0)
    if p % 4 == 3:
        candidates.append(1728)
    for j in candidates + list(range(p)):
        if supersingular_model(ctx, ctx(j), eps, rng) is None:
            continue
        found = structures_at_j(ctx, j, 1, eps)
        if found:
            return found[0]
    return None


def seed_vertex(
    d: int,
    eps: int,
    ctx: FieldCtx,
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
) -> DStructure:
    """
    Some (d, eps)-structure over ctx.

    Degrees 2 and 3 scan the explicit families, degree 1 starts from curves
    over F_p, other degrees go through crossroads with increasing partners.

    Raises:
        NoSeedError: If no structure is found
    """
    rng = rng or random.Random(ctx.p)
    table = table or default_table()
    S = None
    if d in (2, 3):
        S = _hasegawa_seed(d, eps, ctx, rng)
    elif d == 1:
        S = _base_seed(eps, ctx, rng)
    else:
        for d2 in [1] + list(primerange(2, 16)):
            if math.gcd(d, d2) != 1 or not table.available(d * d2):
                continue
            crossroads = find_crossroads(d, d2, ctx.p, ctx, eps, table)
            if crossroads:
                S = crossroads[0].witnesses[d][0]
                break
    if S is None:
        raise NoSeedError(f"no ({d},{eps})-structure found at p={ctx.p}")
    return S


# -- phase one: walking to a distinguished vertex ---------------------------


def _walk_step(C: Curve, back: Optional[Poly], ell: int, rng: random.Random) -> Tuple[Isogeny, Poly]:
    """A random non-backtracking ell-isogeny out of C and the backtrack kernel on its codomain."""
    kernels = cyclic_kernels(C, ell, rng)
    if len(kernels) < ell + 1:
        raise StructureError(f"{ell}-torsion is not rational; the curve is not on the walk graph")
    options = [K for K in kernels if back is None or K != back]
    phi = Isogeny(C, rng.choice(options))
    if ell == 2:
        other = next(K for K in kernels if K != phi.kernel)
        x = phi(C.point(-other[0], C.ctx.zero)).x
        return phi, Poly([-x, C.ctx.one], C.ctx)
    return phi, dual(phi, rng).kernel


def _default_walk_steps(p: int, d: int) -> int:
    return 20 * (math.isqrt(p // max(d, 1)) + 10)


def _landing(C: Curve, degrees: Sequence[int], eps: int, rng: random.Random, table: ModularPolyTable) -> Optional[DStructure]:
    for d in degrees:
        if is_distinguished(C.j_invariant(), d, table):
            found = structures_on_curve(C, d, eps, rng)
            if found:
                return found[0]
    return None


def walk_to_distinguished(
    E: Curve,
    degrees: Union[int, Iterable[int]],
    eps: Optional[int] = None,
    ell: int = 2,
    max_steps: Optional[int] = None,
    rng: Optional[random.Random] = None,
    table: Optional[ModularPolyTable] = None,
    budget: Optional[Budget] = None,
) -> Tuple[IsogenyPath, DStructure]:
    """
    Random non-backtracking ell-walk from E until some (d, eps)-structure with d in degrees is found.

    Degrees are tried in increasing order at every vertex and the first hit
    wins; the degree reached is the ``d`` of the returned structure.

    Returns:
        The path walked and a structure on its final curve

    Raises:
        BudgetExceededError: With the walked path in ``partial["path"]``
    """
    rng = rng or random.Random(0)
    table = table or default_table()
    degrees = sorted({degrees} if isinstance(degrees, int) else set(degrees))
    if not degrees:
        raise ParameterError("at least one degree is needed")
    eps = curve_eps(E, rng) if eps is None else eps
    if budget is None:
        budget = Budget(max_steps if max_steps is not None else _default_walk_steps(E.p, degrees[-1]))
    path = IsogenyPath(E)
    back = None
    C = E
    while True:
        S = _landing(C, degrees, eps, rng, table)
        if S is not None:
            logger.info("reached a (%d,%d)-structure after %d steps", S.d, eps, len(path))
            return path, S
        budget.tick(lambda: {"phase": "walk", "steps": len(path), "path": path})
        phi, back = _walk_step(C, back, ell, rng)
        path.append(phi)
        C = phi.codomain


# -- phase two: moving inside the structure set -----------------------------


def ascend(S: DStructure, rng: Optional[random.Random] = None) -> Tuple[Optional[Isogeny], DStructure]:
    """The ascending 2-isogeny from a Sub structure, or (None, S) for Max."""
    if primitivity(S) == PrimitivityClass.MAX:
        return None, S
    for phi, T in structure_neighbors(S, 2, rng):
        if primitivity(T) == PrimitivityClass.MAX:
            return phi, T
    raise StructureError("Sub structure without an ascending 2-isogeny")


def phase2_ideals(S: DStructure, count: Optional[int] = None) -> List:
    """Split ideals of small norm, those acting over a small tower first."""
    count = count or config.get("navigate.phase2_ideals", 3)
    primes = config.get("navigate.phase2_primes", [2, 3, 5, 7, 11, 13])
    usable = []
    for ell in primes:
        if ell == S.p or S.d % ell == 0:
            continue
        ideals = split_ideals(S.d, S.p, ell)
        if ideals and ideals[0].kind == "split":
            cheap = ell == 2 or eigen_field_degree(S, ell) <= S.ctx.r_max
            usable.append((not cheap, ell, ideal(S.d, S.p, ell)))
    usable.sort(key=lambda t: (t[0], t[1]))
    if not usable:
        raise NotSplitError(f"no small split primes for -{S.d * S.p}")
    return [I for _, _, I in usable[:count]]


@dataclass
class _Side:
    structure: DStructure
    path: IsogenyPath
    ideals: List
    visited: Dict[Tuple[int, int], Tuple[DStructure, IsogenyPath]] = field(default_factory=dict)

    def record(self) -> None:
        self.visited.setdefault(jkey(self.structure.j()), (self.structure, self.path.copy()))

    def step(self, rng: random.Random, table: ModularPolyTable) -> None:
        I = rng.choice(self.ideals)
        if rng.random() < 0.5:
            I = I.conjugate()
        phi, T = act_step(I, self.structure, table=table, rng=rng)
        self.path.append(phi)
        self.structure = T
        self.record()


def _ascend_along(path: IsogenyPath, S: DStructure, rng: random.Random) -> DStructure:
    phi, T = ascend(S, rng)
    if phi is not None:
        path.append(phi)
    return T


def _connector(X: DStructure, Y: DStructure) -> List[Isogeny]:
    """Isogenies from the curve of X to the curve of Y when their j agree up to conjugation."""
    CX, CY = X.E, Y.E
    steps = []
    if CX.j_invariant() == CY.j_invariant():
        if CX != CY:
            steps.append(isomorphism(CX, isomorphisms(CX, CY)[0]))
        return steps
    target = CY.conjugate()
    if CX != target:
        steps.append(isomorphism(CX, isomorphisms(CX, target)[0]))
    steps.append(conj_isogeny(Y.psi))
    return steps


def _switch_degree(S: DStructure, d: int, rng: random.Random) -> DStructure:
    found = structures_on_curve(S.E, d, S.eps, rng)
    if not found:
        raise StructureError(f"crossroad curve carries no degree-{d} structure")
    return found[0]


def delfs_galbraith(
    E1: Curve,
    E2: Curve,
    degrees: Union[int, Iterable[int]] = 1,
    ell: int = 2,
    max_steps: Optional[int] = None,
    max_seconds: Optional[float] = None,
    rng: Optional[random.Random] = None,
    table: Optional[ModularPolyTable] = None,
) -> IsogenyPath:
    """
    An isogeny path from E1 to E2 through distinguished vertices.

    Both curves first walk to a structure whose degree lies in ``degrees``.
    When the two sides land on different degrees, the second side moves by
    the class group action to a crossroad of the two degrees and switches.
    Random class group steps on both sides then continue until the two
    sides share a j-invariant up to conjugation.

    Args:
        E1: Start curve
        E2: Target curve, with the same eps as E1
        degrees: Admissible structure degrees
        ell: Degree of the phase-one walk steps
        max_steps: Total step budget
        max_seconds: Wall-clock budget

    Raises:
        BudgetExceededError: With the partial paths in ``partial``
        NoSeedError: If the landing degrees have no crossroad
        ParameterError: If the curves lie in different twist classes
    """
    rng = rng or random.Random(0)
    table = table or default_table()
    degrees = sorted({degrees} if isinstance(degrees, int) else set(degrees))
    eps = curve_eps(E1, rng)
    if curve_eps(E2, rng) != eps:
        raise ParameterError("the curves have different eps and are not F_{p^2}-isogenous")
    if max_steps is None and max_seconds is None:
        max_steps = 4 * _default_walk_steps(E1.p, degrees[-1])
    budget = Budget(max_steps, max_seconds)
    state: Dict = {"phase": "walk"}

    def partial() -> Dict:
        out = dict(state)
        out["steps"] = budget.steps
        out["elapsed"] = budget.elapsed()
        return out

    pa, SA = walk_to_distinguished(E1, degrees, eps, ell, rng=rng, table=table, budget=budget)
    state["side_a"] = pa
    pb, SB = walk_to_distinguished(E2, degrees, eps, ell, rng=rng, table=table, budget=budget)
    state["side_b"] = pb
    logger.info("phase one done after %d steps, landing degrees %d and %d", budget.steps, SA.d, SB.d)

    SA = _ascend_along(pa, SA, rng)
    SB = _ascend_along(pb, SB, rng)

    if SB.d != SA.d:
        state["phase"] = "crossroad"
        crossroads = find_crossroads(SA.d, SB.d, E1.p, E1.ctx, eps, table)
        # side B moves among Max structures only
        targets = {
            jkey(c.j)
            for c in crossroads
            if any(primitivity(W) == PrimitivityClass.MAX for W in c.witnesses[SB.d])
        }
        if not targets:
            raise NoSeedError(f"no ({SA.d},{SB.d})-crossroads at p={E1.p}")
        side = _Side(SB, pb, phase2_ideals(SB))
        while jkey(side.structure.j()) not in targets:
            budget.tick(partial)
            side.step(rng, table)
        SB = _ascend_along(pb, _switch_degree(side.structure, SA.d, rng), rng)
        logger.info("switched to degree %d at a crossroad", SA.d)

    state["phase"] = "action"
    ideals = phase2_ideals(SA)
    a = _Side(SA, pa, ideals)
    b = _Side(SB, pb, ideals)
    a.record()
    b.record()
    meet = set(a.visited) & set(b.visited)
    turn = 0
    while not meet:
        budget.tick(partial)
        side = a if turn % 2 == 0 else b
        side.step(rng, table)
        key = jkey(side.structure.j())
        other = b if side is a else a
        if key in other.visited:
            meet = {key}
        turn += 1
    key = meet.pop()
    X, path_x = a.visited[key]
    Y, path_y = b.visited[key]
    path = path_x.copy()
    for phi in _connector(X, Y):
        path.append(phi)
    path.extend(path_y.reversed(rng))
    if path.end != E2:
        raise IsogenyError("assembled path does not end at the target curve")
    logger.info("found a path of length %d and degree %d", len(path), path.degree)
    return path


# -- experiments ------------------------------------------------------------


@dataclass
class HitRateReport:
    d: int
    p: int
    walks: int
    length: int
    visits: int
    hits: int
    exact_density: float
    heuristic_density: float

    @property
    def rate(self) -> float:
        return self.hits / self.visits if self.visits else 0.0

    def to_json(self) -> Dict:
        return {
            "d": self.d,
            "p": self.p,
            "walks": self.walks,
            "length": self.length,
            "visits": self.visits,
            "hits": self.hits,
            "rate": self.rate,
            "exact_density": self.exact_density,
            "heuristic_density": self.heuristic_density,
        }


def hit_rate_experiment(
    d: int,
    p: int,
    walks: int = 20,
    length: int = 20,
    rng: Optional[random.Random] = None,
    table: Optional[ModularPolyTable] = None,
) -> HitRateReport:
    """
    Fraction of vertices on random 2-walks that are distinguished for d.

    Compared against the exact density over all supersingular j-invariants
    and against sqrt(d/p).
    """
    rng = rng or random.Random(p)
    table = table or default_table()
    ctx = FieldCtx(p)
    js = supersingular_j_invariants(ctx, table)
    marked = {j.key() for j in js if is_distinguished(j, d, table)}
    visits = hits = 0
    for _ in range(walks):
        j = rng.choice(js)
        prev = None
        for _ in range(length):
            visits += 1
            hits += j.key() in marked
            options = modular_neighbors(j, 2, table)
            if prev is not None and prev in options:
                options.remove(prev)
            prev, j = j, rng.choice(sorted(options, key=lambda z: z.key()))
    return HitRateReport(d, p, walks, length, visits, hits, len(marked) / len(js), math.sqrt(d / p))


def sidh_start_check(
    p_expr: str,
    j: int,
    candidates: Optional[Sequence[int]] = None,
    table: Optional[ModularPolyTable] = None,
) -> List[int]:
    """
    Degrees d for which the F_p start value j satisfies Phi_d(j, j) = 0 mod p.

    Levels that are neither cached nor computable are skipped with a warning.
    """
    table = table or default_table()
    p = int(sympify(p_expr))
    candidates = candidates or config.get("modular.levels", [])
    found = []
    for m in candidates:
        if not table.available(m):
            logger.warning("Phi_%d unavailable, skipping", m)
            continue
        if table.evaluate_mod(m, j % p, j % p, p) == 0:
            found.append(m)
    return found


@dataclass
class KappaEstimate:
    d: int
    p: int
    value: float
    approximate: bool
    counts: Dict[int, float]

    def to_json(self) -> Dict:
        return {
            "d": self.d,
            "p": self.p,
            "kappa": self.value,
            "approximate": self.approximate,
            "counts": {str(k): v for k, v in self.counts.items()},
        }


def _floor_factor(d: int, p: int) -> int:
    r = (-d * p) % 8
    return 2 if r == 1 else 4 if r == 5 else 1


def _class_number_estimate(D: int, bound: int) -> float:
    """sqrt|D|/pi * L(1, chi_D), the L-value from a truncated Euler product."""
    L = 1.0
    for q in primerange(2, bound):
        L /= 1.0 - kronecker(D, q) / q
    return math.sqrt(-D) / math.pi * L


def structure_count(d: int, p: int, exact_limit: int = 10 ** 6, bound: int = 10 ** 5) -> Tuple[float, bool]:
    """
    Number of (d, eps)-structures up to isomorphism and whether it is estimated.

    Max structures number h(D_K); Sub ones h(D_K) or 3 h(D_K) by -dp mod 8.
    """
    D = fundamental_discriminant(d, p)
    if -D <= exact_limit:
        return float(_floor_factor(d, p) * class_group_oracle(D).h), False
    return _floor_factor(d, p) * _class_number_estimate(D, bound), True


def kappa_estimate(d: int, p: int, exact_limit: int = 10 ** 6, bound: int = 10 ** 5) -> KappaEstimate:
    """Ratio of the number of d-structures to the number of 1-structures."""
    nd, approx_d = structure_count(d, p, exact_limit, bound)
    n1, approx_1 = structure_count(1, p, exact_limit, bound)
    return KappaEstimate(d, p, nd / n1, approx_d or approx_1, {d: nd, 1: n1})
