"""
A CSIDH-style non-interactive key exchange on (d, eps)-structures.

Public keys are compressed structure encodings; a shared secret is the
canonical encoding of [a][b] S_0.  Nothing here runs in constant time.
"""

import hashlib
import itertools
import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import isprime

from . import config
from .action import ExponentVector, SplitIdeal, act_vector, ideal, push_structure, split_ideals
from .arith import FieldCtx, Poly
from .curve import Curve
from .dstruct import (
    DStructure,
    PrimitivityClass,
    StructureEncoding,
    canonical_encoding,
    decode,
    encode,
    is_isomorphic,
    mu,
    primitivity,
    verify,
)
from .exceptions import (
    DStructToolsError,
    EncodingError,
    NotSplitError,
    ParameterError,
    StructureError,
    ValidationError,
)
from .isogeny import Isogeny
from .modpoly import ModularPolyTable
from .navigate import ascend, seed_vertex

logger = logging.getLogger(__name__)

SECRET_MODES = ("orbit", "j")


# -- supersingularity -------------------------------------------------------


@dataclass
class WalkReport:
    """Outcome of the descending 2-walk, with the number of 2-isogenies computed."""

    supersingular: bool
    steps: int
    isogenies: int
    bound: int
    reason: str = ""

    def __bool__(self) -> bool:
        return self.supersingular

    def to_json(self) -> Dict:
        return {
            "supersingular": self.supersingular,
            "steps": self.steps,
            "isogenies": self.isogenies,
            "bound": self.bound,
            "reason": self.reason,
        }


def walk_length(p: int, d: int) -> int:
    """ceil(1/2 (log2 p - log2 d) + 1)."""
    return math.ceil(0.5 * (math.log2(p) - math.log2(d)) + 1)


def _two_isogeny(E: Curve, x) -> Isogeny:
    return Isogeny(E, Poly([-x, E.ctx.one], E.ctx))


def _first_step(S: DStructure, roots) -> Tuple[Isogeny, int]:
    """The first descending 2-isogeny from S and how many 2-isogenies it took."""
    E = S.E
    points = [E.point(r, E.ctx.zero) for r in roots]
    moving = [T for T in points if not (mu(S, T).is_infinity() or mu(S, T) == T)]
    if moving:
        return _two_isogeny(E, moving[0].x), 1
    if (-S.d * S.p) % 8 == 1:
        # mu is the identity on E[2]: two horizontal edges and one descending
        for count, T in enumerate(points[:-1], 1):
            phi = _two_isogeny(E, T.x)
            try:
                if primitivity(push_structure(S, phi)) == PrimitivityClass.SUB:
                    return phi, count
            except StructureError:
                continue
        return _two_isogeny(E, points[-1].x), len(points)
    return _two_isogeny(E, points[0].x), 1


def supersingularity_walk_test(S: DStructure) -> WalkReport:
    """
    Decide supersingularity of the curve of a structure-shaped pair.

    A descending 2-isogeny is picked using mu, then a single non-backtracking
    path is followed.  Ordinary curves reach the floor of their 2-volcano
    (fewer than three rational 2-torsion points) within the bound; supersingular
    curves never do.
    """
    bound = walk_length(S.p, S.d)
    E = S.E
    roots = sorted(E.f_poly().roots(), key=lambda r: r.key())
    if len(roots) < 3:
        return WalkReport(False, 0, 0, bound, "2-torsion not rational")
    phi, isogenies = _first_step(S, roots)
    steps = 1
    while True:
        C = phi.codomain
        kernel_x = -phi.kernel.coeffs[0]
        other = next(r for r in roots if r != kernel_x)
        back = phi(E.point(other, E.ctx.zero)).x
        roots = sorted(C.f_poly().roots(), key=lambda r: r.key())
        if len(roots) < 3:
            return WalkReport(False, steps, isogenies, bound, f"floor reached after {steps} steps")
        if steps >= bound:
            return WalkReport(True, steps, isogenies, bound)
        E = C
        phi = _two_isogeny(C, next(r for r in roots if r != back))
        isogenies += 1
        steps += 1


def two_isogeny_budget(p: int, d: int) -> float:
    """Upper bound 1/2 (log2 p - log2 d) + 5 on the 2-isogenies the walk test computes."""
    return 0.5 * (math.log2(p) - math.log2(d)) + 5


# -- parameters -------------------------------------------------------------


def csidh_prime(primes: Sequence[int], eps: int = 1, max_cofactor: int = 10 ** 5) -> Tuple[int, int]:
    """
    Smallest cofactor c with p = c * prod(primes) - eps prime.

    Returns:
        (p, c)
    """
    n = math.prod(primes)
    for c in range(1, max_cofactor):
        p = c * n - eps
        if p > 3 and isprime(p):
            return p, c
    raise ParameterError(f"no prime of the form c*{n}-{eps} with c < {max_cofactor}")


def keyspace_bound(n: int, lambda_sec: int) -> int:
    """Least B with (2B + 1)^n >= 2^(2 lambda_sec)."""
    if n <= 0:
        raise ParameterError("at least one prime is required")
    B = 0
    while (2 * B + 1) ** n < 2 ** (2 * lambda_sec):
        B += 1
    return B


@dataclass
class SystemParams:
    """Public parameters: the field, the degree and sign, the ideals, S_0 and the key box."""

    p: int
    d: int
    eps: int
    ideals: List[SplitIdeal]
    base: StructureEncoding
    bound: int
    lambda_sec: int
    cofactor: Optional[int] = None
    delta: Optional[int] = None
    shared_secret: str = "orbit"
    _ctx: Optional[FieldCtx] = field(default=None, repr=False, compare=False)
    _base: Optional[DStructure] = field(default=None, repr=False, compare=False)

    @property
    def primes(self) -> List[int]:
        return [I.ell for I in self.ideals]

    @property
    def ctx(self) -> FieldCtx:
        if self._ctx is None:
            self._ctx = FieldCtx(self.p, self.delta)
        return self._ctx

    def base_structure(self) -> DStructure:
        if self._base is None:
            self._base = decode(self.base, self.ctx)
        return self._base

    def keyspace_bits(self) -> float:
        return len(self.ideals) * math.log2(2 * self.bound + 1)

    def check(self) -> None:
        """
        Raises:
            ParameterError: If an invariant of the parameter set fails
        """
        if self.shared_secret not in SECRET_MODES:
            raise ParameterError(f"unknown shared secret mode {self.shared_secret!r}")
        for I in self.ideals:
            if I not in split_ideals(self.d, self.p, I.ell) or I.kind != "split":
                raise ParameterError(f"ell={I.ell} does not split with eigenvalue {I.lam}")
        if (2 * self.bound + 1) ** len(self.ideals) < 2 ** (2 * self.lambda_sec):
            raise ParameterError(f"keyspace of {self.keyspace_bits():.1f} bits is below 2*{self.lambda_sec}")
        try:
            S0 = self.base_structure()
        except EncodingError as e:
            raise ParameterError(f"base structure does not decode: {e}") from e
        if (S0.d, S0.eps) != (self.d, self.eps):
            raise ParameterError("base structure has the wrong degree or sign")

    def to_json(self) -> Dict:
        return {
            "p": self.p,
            "d": self.d,
            "eps": self.eps,
            "delta": self.ctx.delta,
            "ideals": [I.to_json() for I in self.ideals],
            "base": self.base.to_json(),
            "bound": self.bound,
            "lambda_sec": self.lambda_sec,
            "cofactor": self.cofactor,
            "shared_secret": self.shared_secret,
        }

    @property
    def params_id(self) -> str:
        """sha256 of the canonical JSON form."""
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_json(cls, data: Dict) -> "SystemParams":
        """
        Raises:
            ParameterError: For missing or malformed fields
        """
        try:
            ctx = FieldCtx(int(data["p"]), data.get("delta"))
            return cls(
                p=int(data["p"]),
                d=int(data["d"]),
                eps=int(data["eps"]),
                ideals=[SplitIdeal.from_json(I) for I in data["ideals"]],
                base=StructureEncoding.from_json(data["base"], ctx),
                bound=int(data["bound"]),
                lambda_sec=int(data["lambda_sec"]),
                cofactor=data.get("cofactor"),
                delta=ctx.delta,
                shared_secret=data.get("shared_secret", "orbit"),
                _ctx=ctx,
            )
        except (KeyError, TypeError, ValueError, EncodingError) as e:
            raise ParameterError(f"malformed parameters: {e}") from e


def make_params(
    p: int,
    d: int,
    eps: int,
    primes: Sequence[int],
    lambda_sec: int = 8,
    bound: Optional[int] = None,
    base: Optional[DStructure] = None,
    shared_secret: Optional[str] = None,
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
) -> SystemParams:
    """
    Assemble and check a parameter set.

    The base structure defaults to a seed vertex moved up to Max, so that the
    split prime 2 can act on every key.

    Raises:
        ParameterError: If a prime does not split or the key box is too small
    """
    ctx = base.ctx if base is not None else FieldCtx(p)
    try:
        ideals = [ideal(d, p, ell) for ell in primes]
    except NotSplitError as e:
        raise ParameterError(str(e)) from e
    B = keyspace_bound(len(ideals), lambda_sec) if bound is None else bound
    if base is None:
        _, base = ascend(seed_vertex(d, eps, ctx, table, rng), rng)
    n = math.prod(primes)
    cofactor = (p + eps) // n if (p + eps) % n == 0 else None
    params = SystemParams(
        p=p,
        d=d,
        eps=eps,
        ideals=ideals,
        base=encode(base),
        bound=B,
        lambda_sec=lambda_sec,
        cofactor=cofactor,
        delta=ctx.delta,
        shared_secret=shared_secret or config.get("protocol.shared_secret", "orbit"),
        _ctx=ctx,
    )
    params.check()
    logger.info("parameters %s: p=%d d=%d eps=%d, %.1f-bit keyspace", params.params_id[:12], p, d, eps, params.keyspace_bits())
    return params


# -- keys -------------------------------------------------------------------


@dataclass
class KeyPair:
    sk: ExponentVector
    pk: StructureEncoding

    def public_json(self, params: SystemParams) -> Dict:
        return {"params_id": params.params_id, "pk": self.pk.to_json()}

    def secret_json(self, params: SystemParams) -> Dict:
        return {"params_id": params.params_id, "sk": self.sk.to_json(), "pk": self.pk.to_json()}


def load_public_key(data: Dict, params: SystemParams) -> StructureEncoding:
    """
    Raises:
        ParameterError: If the key belongs to other parameters
    """
    if data.get("params_id") != params.params_id:
        raise ParameterError("public key was made for different parameters")
    return StructureEncoding.from_json(data["pk"], params.ctx)


def load_secret_key(data: Dict, params: SystemParams) -> ExponentVector:
    if data.get("params_id") != params.params_id:
        raise ParameterError("secret key was made for different parameters")
    sk = ExponentVector.from_json(data["sk"])
    if list(sk.primes) != params.primes:
        raise ParameterError("secret key primes do not match the parameters")
    return sk


def keygen(params: SystemParams, seed: Optional[int] = None, rng: Optional[random.Random] = None) -> KeyPair:
    """Exponents uniform in [-B, B]; the public key encodes [a] S_0."""
    sampler = random.Random(seed) if seed is not None else random.SystemRandom()
    exps = tuple(sampler.randint(-params.bound, params.bound) for _ in params.ideals)
    sk = ExponentVector(tuple(params.primes), exps)
    return KeyPair(sk, public_key(sk, params, rng))


def public_key(sk: ExponentVector, params: SystemParams, rng: Optional[random.Random] = None) -> StructureEncoding:
    S = act_vector(sk, params.base_structure(), params.ideals, rng=rng)
    return encode(S)


def shared_value(S: DStructure, mode: str = "orbit") -> bytes:
    """
    Canonical bytes of a structure class.

    "orbit" uses the least encoding over {S, -S, conj S, -conj S}; "j" uses
    the smaller of j and its conjugate.
    """
    if mode == "j":
        j = S.j()
        jc = j.conj()
        j = j if j.key() <= jc.key() else jc
        width = (S.p.bit_length() + 7) // 8
        return j.a.to_bytes(width, "big") + j.b.to_bytes(width, "big")
    return canonical_encoding(S).to_bytes(S.p)


def derive(sk: ExponentVector, peer_pk: StructureEncoding, params: SystemParams, rng: Optional[random.Random] = None) -> str:
    """
    Shared secret as lowercase hex.

    Raises:
        ValidationError: If the peer key is rejected, naming the failed check
    """
    report = validate(peer_pk, params)
    if not report:
        raise ValidationError(f"peer public key rejected: {report.message}", check=report.failed)
    S = act_vector(sk, report.structure, params.ideals, rng=rng)
    return shared_value(S, params.shared_secret).hex()


def recover_secret(pk: StructureEncoding, params: SystemParams, bound: Optional[int] = None) -> Optional[ExponentVector]:
    """Exhaustive search of the key box for exponents reaching pk; only for tiny parameters."""
    target = decode(pk, params.ctx)
    B = params.bound if bound is None else bound
    for exps in itertools.product(range(-B, B + 1), repeat=len(params.ideals)):
        v = ExponentVector(tuple(params.primes), exps)
        if is_isomorphic(act_vector(v, params.base_structure(), params.ideals), target):
            return v
    return None


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: Dict[str, bool] = field(default_factory=dict)
    failed: str = ""
    message: str = ""
    structure: Optional[DStructure] = None
    walk: Optional[WalkReport] = None

    def __bool__(self) -> bool:
        return not self.failed

    def to_json(self) -> Dict:
        out = {"valid": bool(self), "checks": dict(self.checks), "failed": self.failed or None, "message": self.message}
        if self.walk is not None:
            out["walk"] = self.walk.to_json()
        return out


def _fail(report: ValidationReport, check: str, message: str) -> ValidationReport:
    report.checks[check] = False
    report.failed = check
    report.message = message
    logger.debug("validation failed at %s: %s", check, message)
    return report


def validate(
    pk: StructureEncoding,
    params: SystemParams,
    require_class: Optional[PrimitivityClass] = None,
) -> ValidationReport:
    """
    Check a public key: decoding, the structure equation, supersingularity,
    and optionally the Max/Sub class.
    """
    report = ValidationReport()
    try:
        S = decode(pk, params.ctx, check=False)
    except (EncodingError, DStructToolsError) as e:
        return _fail(report, "decode", str(e))
    report.checks["decode"] = True

    if (pk.d, pk.eps) != (params.d, params.eps):
        return _fail(report, "structure", f"key claims d={pk.d}, eps={pk.eps}")
    try:
        T = verify(S.E, S.psi, params.d)
    except (StructureError, DStructToolsError) as e:
        return _fail(report, "structure", str(e))
    if T.eps != params.eps:
        return _fail(report, "structure", f"dual(psi) = {T.eps} * conj(psi), expected {params.eps}")
    report.checks["structure"] = True
    report.structure = T

    report.walk = supersingularity_walk_test(T)
    if not report.walk:
        return _fail(report, "supersingular", report.walk.reason)
    report.checks["supersingular"] = True

    if require_class is not None:
        if primitivity(T) != require_class:
            return _fail(report, "primitivity", f"structure is not {require_class.value}")
        report.checks["primitivity"] = True
    return report
