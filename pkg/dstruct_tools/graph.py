"""
Graphs of (d, eps)-structures joined by ell-isogenies of structures.
"""

import json
import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import graphviz
from sympy import factorint, primerange

from . import config
from .action import act, ramified_step, split_ideals, structure_neighbors
from .arith import FieldCtx
from .classgroup import BinaryQF, class_group_oracle, fundamental_discriminant, kronecker
from .dstruct import (
    DStructure,
    PrimitivityClass,
    StructureEncoding,
    decode,
    encode,
    enumerate_all,
    is_isomorphic,
    label,
    primitivity,
)
from .exceptions import EncodingError, ParameterError, StructureError
from .modpoly import ModularPolyTable, default_table
from .navigate import ascend, seed_vertex

logger = logging.getLogger(__name__)

HORIZONTAL = "horizontal"
ASCENDING = "ascending"
DESCENDING = "descending"

EDGE_COLORS = ["black", "red", "blue", "darkgreen", "orange", "purple"]


@dataclass
class Vertex:
    label: str
    structure: DStructure
    cls: PrimitivityClass


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    ell: int
    direction: str


def _direction(a: PrimitivityClass, b: PrimitivityClass) -> str:
    if a == b:
        return HORIZONTAL
    return DESCENDING if a == PrimitivityClass.MAX else ASCENDING


class StructureGraph:
    """Vertices are structures up to isomorphism; each edge is one mu-stable kernel."""

    def __init__(self, d: int, eps: int, p: int, primes: Sequence[int], ctx: Optional[FieldCtx] = None):
        self.d = d
        self.eps = eps
        self.p = p
        self.primes = tuple(primes)
        self.ctx = ctx or FieldCtx(p)
        self.vertices: List[Vertex] = []
        self.edges: List[Edge] = []
        self._by_j: Dict[Tuple[int, int], List[int]] = {}

    def __len__(self) -> int:
        return len(self.vertices)

    def add_vertex(self, S: DStructure, name: Optional[str] = None) -> int:
        """Index of S, adding it when no isomorphic vertex exists."""
        found = self.find(S)
        if found is not None:
            return found
        idx = len(self.vertices)
        self.vertices.append(Vertex(name or label(S), S, primitivity(S)))
        self._by_j.setdefault(S.j().key(), []).append(idx)
        return idx

    def find(self, S: DStructure) -> Optional[int]:
        for idx in self._by_j.get(S.j().key(), []):
            if is_isomorphic(S, self.vertices[idx].structure):
                return idx
        return None

    def index_of(self, S: DStructure) -> int:
        """
        Raises:
            StructureError: If S is not a vertex
        """
        idx = self.find(S)
        if idx is None:
            raise StructureError(f"{S!r} is not a vertex of the graph")
        return idx

    def counts(self) -> Dict[str, int]:
        c = Counter(v.cls.value for v in self.vertices)
        return {PrimitivityClass.MAX.value: c[PrimitivityClass.MAX.value], PrimitivityClass.SUB.value: c[PrimitivityClass.SUB.value]}

    def edge_multiset(self, ell: Optional[int] = None) -> Counter:
        return Counter((e.src, e.dst, e.ell) for e in self.edges if ell is None or e.ell == ell)

    def to_json(self) -> Dict:
        """Graph file with vertices sorted by label and edge endpoints renumbered to match."""
        order = sorted(range(len(self.vertices)), key=lambda i: self.vertices[i].label)
        position = {old: new for new, old in enumerate(order)}
        return {
            "meta": {
                "d": self.d,
                "eps": self.eps,
                "p": self.p,
                "delta": self.ctx.delta,
                "primes": list(self.primes),
            },
            "vertices": [
                {
                    "label": self.vertices[i].label,
                    "encoding": encode(self.vertices[i].structure).to_json(),
                    "class": self.vertices[i].cls.value,
                }
                for i in order
            ],
            "edges": sorted(
                ({"from": position[e.src], "to": position[e.dst], "ell": e.ell, "dir": e.direction} for e in self.edges),
                key=lambda e: (e["ell"], e["from"], e["to"]),
            ),
        }

    @classmethod
    def from_json(cls, data: Dict) -> "StructureGraph":
        """
        Raises:
            EncodingError: If the file is missing a section or a vertex encoding is malformed
        """
        try:
            meta = data["meta"]
            ctx = FieldCtx(int(meta["p"]), meta.get("delta"))
            G = cls(int(meta["d"]), int(meta["eps"]), int(meta["p"]), meta.get("primes", []), ctx)
            for v in data["vertices"]:
                S = decode(StructureEncoding.from_json(v["encoding"], ctx), ctx, check=False)
                G.vertices.append(Vertex(v["label"], S, PrimitivityClass(v["class"])))
                G._by_j.setdefault(S.j().key(), []).append(len(G.vertices) - 1)
            G.edges = [Edge(int(e["from"]), int(e["to"]), int(e["ell"]), e["dir"]) for e in data["edges"]]
        except (KeyError, TypeError, ValueError) as e:
            raise EncodingError(f"malformed graph file: {e}") from e
        n = len(G.vertices)
        if any(not (0 <= e.src < n and 0 <= e.dst < n) for e in G.edges):
            raise EncodingError("edge endpoint out of range")
        return G

    def same_as(self, other: "StructureGraph") -> bool:
        """Equal vertex labels and classes with the same labelled edge multiset."""
        if (self.d, self.eps, self.p) != (other.d, other.eps, other.p):
            return False
        mine = {v.label: v.cls for v in self.vertices}
        theirs = {v.label: v.cls for v in other.vertices}
        if mine != theirs or len(mine) != len(self.vertices):
            return False

        def labelled(G: "StructureGraph") -> Counter:
            return Counter((G.vertices[e.src].label, G.vertices[e.dst].label, e.ell, e.direction) for e in G.edges)

        return labelled(self) == labelled(other)


# -- construction -----------------------------------------------------------


def generating_ideals(d: int, p: int, limit: int = 200) -> List:
    """Ideals of the smallest norms whose classes generate the class group."""
    D = fundamental_discriminant(d, p)
    G = class_group_oracle(D)
    span = {G.identity}
    chosen = []
    for ell in primerange(2, limit):
        if len(span) == G.h:
            break
        if ell == p:
            continue
        ideals = split_ideals(d, p, ell)
        if not ideals:
            continue
        I = ideals[0]
        f = I.form(d, p) if I.kind == "split" else _ramified_form(D, ell)
        if f in span:
            continue
        chosen.append(I)
        frontier = list(span)
        while frontier:
            nxt = []
            for g in frontier:
                h = g * f
                if h not in span:
                    span.add(h)
                    nxt.append(h)
            frontier = nxt
    if len(span) != G.h:
        raise ParameterError(f"primes below {limit} do not generate the class group of {D}")
    return chosen


def _ramified_form(D: int, ell: int) -> BinaryQF:
    for b in range(0, ell + 1):
        if (b * b - D) % (4 * ell) == 0:
            return BinaryQF.from_ab(ell, b, D)
    raise ParameterError(f"{ell} is not ramified for {D}")


def _orbit_vertices(
    d: int, eps: int, ctx: FieldCtx, table: ModularPolyTable, rng: random.Random
) -> List[DStructure]:
    """Max structures as the class group orbit of a seed, then the Sub structures below them."""
    G = StructureGraph(d, eps, ctx.p, (), ctx)
    _, seed = ascend(seed_vertex(d, eps, ctx, table, rng), rng)
    gens = generating_ideals(d, ctx.p)
    queue = [seed]
    found = [seed]
    G.add_vertex(seed, name="seed")
    while queue:
        S = queue.pop()
        for I in gens:
            for J in (I,) if I.conjugate() == I else (I, I.conjugate()):
                T = act(J, S, table=table, rng=rng)
                if G.find(T) is None:
                    G.add_vertex(T, name=f"v{len(found)}")
                    found.append(T)
                    queue.append(T)
    if (-d * ctx.p) % 4 == 1:
        for S in list(found):
            for _, T in structure_neighbors(S, 2, rng):
                if primitivity(T) == PrimitivityClass.SUB and G.find(T) is None:
                    G.add_vertex(T, name=f"v{len(found)}")
                    found.append(T)
    logger.info("orbit expansion found %d structures", len(found))
    return found


def build(
    d: int,
    eps: int,
    p: int,
    primes: Sequence[int] = (2,),
    method: str = "auto",
    ctx: Optional[FieldCtx] = None,
    table: Optional[ModularPolyTable] = None,
    rng: Optional[random.Random] = None,
    workers: int = 1,
) -> StructureGraph:
    """
    The graph of (d, eps)-structures over F_{p^2} with ell-edges for ell in primes.

    Args:
        method: "enumerate" (all supersingular j), "orbit" (class group orbit
            of a seed) or "auto" (enumerate when p is small enough)
        workers: Threads used for edge computation

    Raises:
        EnumerationLimitError: If "enumerate" is forced beyond its limit
    """
    rng = rng or random.Random(p)
    ctx = ctx or FieldCtx(p)
    table = table or default_table()
    for ell in primes:
        if ell == p:
            raise ParameterError(f"edge degree {ell} equals the characteristic")
    if method == "auto":
        method = "enumerate" if p <= config.get("enumerate.max_p", 400) else "orbit"
    if method == "enumerate":
        structures = enumerate_all(d, eps, p, ctx, table, workers)
    elif method == "orbit":
        structures = _orbit_vertices(d, eps, ctx, table, rng)
    else:
        raise ValueError(f"unknown build method {method!r}")

    G = StructureGraph(d, eps, p, primes, ctx)
    for S in structures:
        G.add_vertex(S)

    def out_edges(i: int) -> List[Edge]:
        S = G.vertices[i].structure
        local = random.Random(i)
        edges = []
        for ell in primes:
            for _, T in structure_neighbors(S, ell, local):
                k = G.index_of(T)
                edges.append(Edge(i, k, ell, _direction(G.vertices[i].cls, G.vertices[k].cls)))
        return edges

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(out_edges, range(len(G))))
    else:
        batches = [out_edges(i) for i in range(len(G))]
    G.edges = [e for batch in batches for e in batch]
    logger.info("built graph with %d vertices and %d edges", len(G), len(G.edges))
    return G


# -- invariants -------------------------------------------------------------


def expected_counts(d: int, p: int) -> Dict[str, int]:
    """Max structures number h(D_K); Sub ones h(D_K), 3 h(D_K) or none by -dp mod 8."""
    h = class_group_oracle(fundamental_discriminant(d, p)).h
    r = (-d * p) % 8
    sub = h if r == 1 else 3 * h if r == 5 else 0
    return {PrimitivityClass.MAX.value: h, PrimitivityClass.SUB.value: sub}


def expected_profile(d: int, p: int, ell: int) -> Dict[str, Tuple[int, int, int]]:
    """(horizontal, ascending, descending) edge counts per vertex class."""
    MAX, SUB = PrimitivityClass.MAX.value, PrimitivityClass.SUB.value
    r = (-d * p) % 8
    if d % ell == 0:
        return {MAX: (1, 0, 0), SUB: (1, 0, 0)}
    if ell == 2:
        if r == 1:
            return {MAX: (2, 0, 1), SUB: (0, 1, 0)}
        if r == 5:
            return {MAX: (0, 0, 3), SUB: (0, 1, 0)}
        return {MAX: (1, 0, 0)}
    n = 1 + kronecker(-d * p, ell)
    return {MAX: (n, 0, 0), SUB: (n, 0, 0)}


def degree_profile(G: StructureGraph) -> Dict[int, Dict[str, Counter]]:
    """For each ell and class, how many vertices have each (h, a, d) triple."""
    out: Dict[int, Dict[str, Counter]] = {}
    for ell in G.primes:
        per: Dict[int, List[int]] = {i: [0, 0, 0] for i in range(len(G))}
        for e in G.edges:
            if e.ell != ell:
                continue
            slot = {HORIZONTAL: 0, ASCENDING: 1, DESCENDING: 2}[e.direction]
            per[e.src][slot] += 1
        table: Dict[str, Counter] = {}
        for i, counts in per.items():
            table.setdefault(G.vertices[i].cls.value, Counter())[tuple(counts)] += 1
        out[ell] = table
    return out


def involution_permutations(G: StructureGraph, rng: Optional[random.Random] = None) -> Dict[str, List[int]]:
    """Vertex permutations induced by negation, conjugation and the ramified ideals."""
    rng = rng or random.Random(0)
    out = {
        "negation": [G.index_of(v.structure.negate()) for v in G.vertices],
        "conjugation": [G.index_of(v.structure.conjugate()) for v in G.vertices],
    }
    for ell in sorted(factorint(G.d)):
        out[f"ramified_{ell}"] = [G.index_of(ramified_step(v.structure, ell, rng)[1]) for v in G.vertices]
    return out


def is_automorphism(G: StructureGraph, perm: Sequence[int]) -> bool:
    if sorted(perm) != list(range(len(G))):
        return False
    mapped = Counter((perm[a], perm[b], ell) for (a, b, ell), n in G.edge_multiset().items() for _ in range(n))
    return mapped == G.edge_multiset()


@dataclass
class GraphReport:
    checks: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> Dict:
        return {"ok": self.ok, "checks": dict(self.checks), "details": self.details}


def verify_graph(G: StructureGraph, rng: Optional[random.Random] = None) -> GraphReport:
    """Vertex counts, per-class edge profiles, edge symmetry and involutions."""
    report = GraphReport()
    expected = expected_counts(G.d, G.p)
    report.checks["vertex_counts"] = G.counts() == expected
    report.details["vertex_counts"] = {"found": G.counts(), "expected": expected}

    profiles = degree_profile(G)
    good = True
    for ell, table in profiles.items():
        want = expected_profile(G.d, G.p, ell)
        for cls, seen in table.items():
            if set(seen) != {want.get(cls)}:
                good = False
        report.details[f"profile_{ell}"] = {cls: {str(k): n for k, n in seen.items()} for cls, seen in table.items()}
    report.checks["degree_profile"] = good

    support = set(G.edge_multiset())
    report.checks["dual_edges"] = all((b, a, ell) in support for a, b, ell in support)

    for name, perm in involution_permutations(G, rng).items():
        report.checks[f"{name}_automorphism"] = is_automorphism(G, perm)
        report.details[f"{name}_fixed_points"] = sum(1 for i, k in enumerate(perm) if i == k)
    return report


# -- export -----------------------------------------------------------------


def to_dot(G: StructureGraph) -> str:
    """Graphviz source: boxes for Max, ellipses for Sub, one colour per ell."""
    dot = graphviz.Graph(name=f"D_{G.d}_{G.eps}_p{G.p}")
    dot.attr(label=f"(d={G.d}, eps={G.eps}) p={G.p}")
    for i, v in enumerate(G.vertices):
        shape = "box" if v.cls == PrimitivityClass.MAX else "ellipse"
        dot.node(str(i), v.label, shape=shape)
    pairs = Counter()
    for e in G.edges:
        if e.direction == ASCENDING:
            continue
        a, b = (e.src, e.dst) if e.direction == DESCENDING else sorted((e.src, e.dst))
        pairs[(a, b, e.ell, e.direction)] += 1
    for (a, b, ell, direction), n in sorted(pairs.items()):
        if direction == HORIZONTAL:
            n = (n + 1) // 2
        color = EDGE_COLORS[G.primes.index(ell) % len(EDGE_COLORS)] if ell in G.primes else "gray"
        style = "solid" if direction == HORIZONTAL else "dashed"
        for _ in range(n):
            dot.edge(str(a), str(b), color=color, style=style)
    return dot.source


def export(G: StructureGraph, fmt: str = "json") -> str:
    """
    Raises:
        ValueError: For an unknown format
    """
    if fmt == "json":
        return json.dumps(G.to_json(), indent=2, sort_keys=True)
    if fmt == "dot":
        return to_dot(G)
    raise ValueError(f"unknown graph format {fmt!r}")


def load(text: str) -> StructureGraph:
    return StructureGraph.from_json(json.loads(text))


def summary(G: StructureGraph) -> str:
    """Plain-text overview with counts and edge profiles."""
    counts = G.counts()
    lines = [
        f"(d={G.d}, eps={G.eps}) structures over F_{G.p}^2: {len(G)} vertices, {len(G.edges)} edges",
        f"  Max: {counts['Max']}  Sub: {counts['Sub']}",
    ]
    for ell, table in degree_profile(G).items():
        for cls, seen in sorted(table.items()):
            shown = ", ".join(f"{k} x{n}" for k, n in sorted(seen.items()))
            lines.append(f"  ell={ell} {cls}: {shown}")
    return "\n".join(lines)
