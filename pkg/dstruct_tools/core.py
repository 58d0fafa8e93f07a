"""
Core functionality for dstruct-tools.
"""

import json
import logging
import random
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import config
from . import graph as graphs
from . import navigate, protocol
from .arith import FieldCtx, Fp2Elem
from .classgroup import class_number
from .curve import Curve, cyclic_kernels, is_supersingular_oracle, supersingular_model
from .downloader import TableDownloader
from .dstruct import encode, enumerate_all, from_base_curve, label, primitivity, supersingular_j_invariants
from .exceptions import DStructToolsError, StructureError
from .isogeny import Isogeny
from .modpoly import ModularPolyTable, modular_neighbors, set_default_table

logger = logging.getLogger(__name__)

_ELEMENT = re.compile(r"^\s*(-?\d+)\s*(?:\+\s*(\d+)\s*\*\s*s)?\s*$")


def parse_element(ctx: FieldCtx, text: Any) -> Fp2Elem:
    """
    Read "a" or "a+b*s" (s the square root of the field's delta).

    Raises:
        ValueError: If the text has neither shape
    """
    if isinstance(text, int):
        return ctx(text)
    m = _ELEMENT.match(str(text))
    if not m:
        raise ValueError(f"cannot read {text!r} as an element of F_p^2")
    return ctx(int(m.group(1)), int(m.group(2) or 0))


def read_json(path: str) -> Dict:
    with open(path, "r") as f:
        return json.load(f)


class DStructTools:
    """Main class for working with (d, eps)-structures."""

    def __init__(self, data_dir: Optional[str] = None, workers: int = 1, seed: int = 0):
        """
        Initialize the toolkit.

        Args:
            data_dir: Directory for modular polynomial tables. If None, uses
                $DSTRUCT_TOOLS_DIR or ~/.dstruct-tools
            workers: Threads for enumeration and edge computation
            seed: Seed of every random choice made through this object
        """
        self.data_dir = config.data_dir(data_dir)
        self.workers = max(1, int(workers))
        self.seed = seed
        self.table = ModularPolyTable(self.data_dir)
        set_default_table(self.table)

    def rng(self, salt: int = 0) -> random.Random:
        return random.Random(self.seed * 1000003 + salt)

    def provenance(self, **fields) -> Dict[str, Any]:
        """Seed, the given fields and the digest of every table loaded so far."""
        out: Dict[str, Any] = dict(fields)
        out["seed"] = self.seed
        out["tables"] = {
            str(m): {"sha256": v.get("sha256"), "terms": v.get("terms")}
            for m, v in self.table.loaded_provenance().items()
        }
        return out

    # -- graphs -------------------------------------------------------------

    def build_graph(self, d: int, eps: int, p: int, primes: Sequence[int] = (2,), method: str = "auto") -> graphs.StructureGraph:
        return graphs.build(d, eps, p, primes, method, table=self.table, rng=self.rng(), workers=self.workers)

    def load_graph(self, path: str) -> graphs.StructureGraph:
        return graphs.load(Path(path).read_text())

    def verify_graph(self, G: graphs.StructureGraph) -> graphs.GraphReport:
        return graphs.verify_graph(G, self.rng())

    def enumerate(self, d: int, eps: int, p: int) -> List[Dict]:
        """Every (d, eps)-structure over F_{p^2} with its label, class and encoding."""
        out = []
        for S in enumerate_all(d, eps, p, table=self.table, workers=self.workers):
            out.append({
                "label": label(S),
                "j": str(S.j()),
                "class": primitivity(S).value,
                "encoding": encode(S).to_json(),
            })
        return out

    # -- key exchange -------------------------------------------------------

    def make_params(self, p: int, d: int, eps: int, primes: Sequence[int], **kwargs) -> protocol.SystemParams:
        return protocol.make_params(p, d, eps, primes, table=self.table, rng=self.rng(), **kwargs)

    def load_params(self, path: str) -> protocol.SystemParams:
        """
        Raises:
            ParameterError: If the file does not hold a consistent parameter set
        """
        params = protocol.SystemParams.from_json(read_json(path))
        params.check()
        return params

    def keygen(self, params: protocol.SystemParams) -> protocol.KeyPair:
        return protocol.keygen(params, seed=self.seed, rng=self.rng(1))

    def exchange(self, params: protocol.SystemParams, secret: Dict, public: Dict) -> str:
        sk = protocol.load_secret_key(secret, params)
        pk = protocol.load_public_key(public, params)
        return protocol.derive(sk, pk, params, rng=self.rng(2))

    def validate(self, params: protocol.SystemParams, public: Dict) -> protocol.ValidationReport:
        return protocol.validate(protocol.load_public_key(public, params), params)

    # -- navigation ---------------------------------------------------------

    def crossroads(self, d1: int, d2: int, p: int, eps: int = 1) -> List[navigate.Crossroad]:
        return navigate.find_crossroads(d1, d2, p, eps=eps, table=self.table)

    def _supersingular_curve(self, ctx: FieldCtx, j: Optional[str], eps: int, rng: random.Random) -> Curve:
        if j is None:
            js = supersingular_j_invariants(ctx, self.table)
            value = rng.choice(sorted(js, key=lambda z: z.key()))
        else:
            value = parse_element(ctx, j)
        E = supersingular_model(ctx, value, eps, rng)
        if E is None:
            raise StructureError(f"j={value} is not supersingular with eps={eps}")
        return E

    def pathfind(
        self,
        p: int,
        j1: Optional[str],
        j2: Optional[str],
        degrees: Sequence[int] = (1,),
        eps: int = 1,
        ell: int = 2,
        max_steps: Optional[int] = None,
        max_seconds: Optional[float] = None,
    ) -> Dict:
        """
        Find and verify an isogeny path between two supersingular curves.

        Unset j-invariants are drawn at random from the supersingular ones.

        Raises:
            BudgetExceededError: With the partial search state
        """
        rng = self.rng()
        ctx = FieldCtx(p)
        E1 = self._supersingular_curve(ctx, j1, eps, rng)
        E2 = self._supersingular_curve(ctx, j2, eps, rng)
        path = navigate.delfs_galbraith(
            E1, E2, degrees, ell, max_steps=max_steps, max_seconds=max_seconds, rng=rng, table=self.table
        )
        if not path.verify(rng):
            raise DStructToolsError("path failed pointwise verification")
        return {"path": path.to_json(), "steps": len(path), "degree": path.degree, "verified": True}

    def sidh_check(self, p_expr: str, j: int, degrees: Optional[Sequence[int]] = None) -> List[int]:
        return navigate.sidh_start_check(p_expr, j, degrees, self.table)

    def kappa(self, d: int, p: int) -> navigate.KappaEstimate:
        return navigate.kappa_estimate(d, p)

    def hit_rate(self, d: int, p: int, walks: int = 20, length: int = 20) -> navigate.HitRateReport:
        return navigate.hit_rate_experiment(d, p, walks, length, rng=self.rng(), table=self.table)

    # -- tables -------------------------------------------------------------

    def tables_status(self) -> Dict[str, Any]:
        return {
            "data_dir": str(self.data_dir),
            "cache_dir": str(self.table.cache_dir),
            "levels": {str(m): s for m, s in self.table.status().items()},
        }

    def tables_fetch(self, levels: Sequence[int], force: bool = False) -> Dict[str, str]:
        downloader = TableDownloader(self.table)
        return {str(m): str(downloader.fetch(m, force=force)) for m in levels}

    def tables_clear(self) -> List[str]:
        return [str(path) for path in self.table.clear_cache()]

    # -- self test ----------------------------------------------------------

    def selftest(self) -> Dict[str, Dict[str, Any]]:
        """Oracle cross-checks at p=101; each entry records ok and a detail line."""
        checks = {
            "class_number": self._check_class_number,
            "modular_vs_velu": self._check_modular_vs_velu,
            "walk_vs_oracle": self._check_walk_vs_oracle,
            "graph_counts": self._check_graph,
            "key_exchange": self._check_exchange,
        }
        results = {}
        for name, check in checks.items():
            try:
                ok, detail = check()
            except DStructToolsError as e:
                ok, detail = False, f"{type(e).__name__}: {e}"
            logger.info("selftest %s: %s", name, "ok" if ok else "FAILED")
            results[name] = {"ok": ok, "detail": detail}
        return results

    def _check_class_number(self):
        h = class_number(-303)
        return h == 10, f"h(-303) = {h}"

    def _check_modular_vs_velu(self):
        ctx = FieldCtx(101)
        rng = self.rng()
        js = sorted(supersingular_j_invariants(ctx, self.table), key=lambda z: z.key())
        for j in js[:4]:
            E = supersingular_model(ctx, j, 1, rng)
            for ell in (2, 3):
                by_velu = sorted((Isogeny(E, K).codomain.j_invariant().key() for K in cyclic_kernels(E, ell, rng)))
                by_table = sorted(r.key() for r in modular_neighbors(j, ell, self.table))
                if by_velu != by_table:
                    return False, f"ell={ell} neighbours of j={j} differ"
        return True, f"{len(js[:4])} j-invariants, ell in (2, 3)"

    def _check_walk_vs_oracle(self):
        ctx = FieldCtx(101)
        rng = self.rng()
        tested = 0
        while tested < 12:
            try:
                E = Curve(rng.randrange(101), rng.randrange(101), ctx)
                S = from_base_curve(E)
            except DStructToolsError:
                continue
            tested += 1
            if bool(protocol.supersingularity_walk_test(S)) != is_supersingular_oracle(E):
                return False, f"walk test disagrees with point counting on {E}"
        return True, f"{tested} curves over F_101"

    def _check_graph(self):
        G = graphs.build(3, 1, 101, (2,), table=self.table, rng=self.rng())
        expected = graphs.expected_counts(3, 101)
        report = graphs.verify_graph(G, self.rng())
        return G.counts() == expected and report.ok, f"counts {G.counts()}, expected {expected}"

    def _check_exchange(self):
        params = protocol.make_params(101, 3, 1, [2, 13], lambda_sec=2, table=self.table, rng=self.rng())
        alice = protocol.keygen(params, seed=self.seed + 1)
        bob = protocol.keygen(params, seed=self.seed + 2)
        s1 = protocol.derive(alice.sk, bob.pk, params)
        s2 = protocol.derive(bob.sk, alice.pk, params)
        return s1 == s2, f"shared secret {s1[:16]}..."
