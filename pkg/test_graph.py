#!/usr/bin/env python3
"""
Tests for structure graphs and their invariants.
"""

import random
import shutil
import tempfile
import unittest
from collections import Counter

from sympy import primerange

from dstruct_tools import graph as graphs
from dstruct_tools.arith import FieldCtx
from dstruct_tools.classgroup import kronecker
from dstruct_tools.dstruct import (
    PrimitivityClass,
    chart_member,
    conjugate,
    enumerate_all,
    hasegawa_parameters,
    is_isomorphic,
    label,
    negate,
    primitivity,
    twist,
)
from dstruct_tools.exceptions import EncodingError, ParameterError
from dstruct_tools.modpoly import ModularPolyTable, set_default_table


class TestStructureGraphs(unittest.TestCase):
    """The small graphs at p = 101, 97 and 83."""

    @classmethod
    def setUpClass(cls):
        """Build the (3, 1) graph at p = 101 once."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)
        cls.G = graphs.build(3, 1, 101, (2,), table=cls.table, rng=random.Random(1))

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_counts_p101(self):
        """Ten Max and ten Sub vertices."""
        self.assertEqual(self.G.counts(), {"Max": 10, "Sub": 10})
        self.assertEqual(graphs.expected_counts(3, 101), {"Max": 10, "Sub": 10})

    def test_profile_p101(self):
        """-303 = 1 mod 8: two horizontal and one descending edge per Max vertex."""
        profile = graphs.degree_profile(self.G)[2]
        self.assertEqual(profile["Max"], Counter({(2, 0, 1): 10}))
        self.assertEqual(profile["Sub"], Counter({(0, 1, 0): 10}))

    def test_verify_p101(self):
        """All invariants hold."""
        report = graphs.verify_graph(self.G, random.Random(2))
        self.assertTrue(report.ok, report.to_json())
        self.assertIn("negation_automorphism", report.checks)
        self.assertIn("ramified_3_automorphism", report.checks)

    def test_counts_p97(self):
        """-291 = 5 mod 8: four Max vertices with three Sub vertices each."""
        G = graphs.build(3, -1, 97, (2,), table=self.table, rng=random.Random(3))
        self.assertEqual(G.counts(), {"Max": 4, "Sub": 12})
        profile = graphs.degree_profile(G)[2]
        self.assertEqual(profile["Max"], Counter({(0, 0, 3): 4}))
        self.assertTrue(graphs.verify_graph(G, random.Random(4)).ok)

    def test_counts_p83(self):
        """-249 = 3 mod 4: only Max vertices."""
        G = graphs.build(3, 1, 83, (2,), table=self.table, rng=random.Random(5))
        self.assertEqual(G.counts(), {"Max": 12, "Sub": 0})
        self.assertTrue(graphs.verify_graph(G, random.Random(6)).ok)

    def test_orbit_matches_enumeration(self):
        """Class group orbit expansion finds the same graph as enumeration."""
        H = graphs.build(3, 1, 101, (2,), method="orbit", table=self.table, rng=random.Random(7))
        self.assertTrue(H.same_as(self.G))

    def test_json_reload(self):
        """Exported JSON loads into the same graph."""
        H = graphs.load(graphs.export(self.G, "json"))
        self.assertTrue(H.same_as(self.G))
        self.assertEqual(len(H.edges), len(self.G.edges))

    def test_json_layout(self):
        """Metadata sits under meta, vertices are sorted by label and edges follow them."""
        data = self.G.to_json()
        self.assertEqual(set(data), {"meta", "vertices", "edges"})
        self.assertEqual((data["meta"]["d"], data["meta"]["eps"], data["meta"]["p"]), (3, 1, 101))
        labels = [v["label"] for v in data["vertices"]]
        self.assertEqual(labels, sorted(labels))
        self.assertEqual(set(data["vertices"][0]), {"label", "encoding", "class"})
        self.assertTrue(all(set(e) == {"from", "to", "ell", "dir"} for e in data["edges"]))
        written = Counter((labels[e["from"]], labels[e["to"]], e["ell"], e["dir"]) for e in data["edges"])
        built = Counter(
            (self.G.vertices[e.src].label, self.G.vertices[e.dst].label, e.ell, e.direction) for e in self.G.edges
        )
        self.assertEqual(written, built)

    def test_json_malformed(self):
        """Files without metadata or with dangling edges are rejected."""
        data = self.G.to_json()
        with self.assertRaises(EncodingError):
            graphs.StructureGraph.from_json({"vertices": data["vertices"], "edges": data["edges"]})
        data["edges"].append({"from": 0, "to": len(data["vertices"]), "ell": 2, "dir": "horizontal"})
        with self.assertRaises(EncodingError):
            graphs.StructureGraph.from_json(data)

    def test_hasegawa_vertices_p101(self):
        """Family members 0, 6, 24, 25 and 42 plus one vertex on j = 0 give six orbits."""
        ctx = FieldCtx(101)
        members = {u: chart_member(ctx, 3, 1, u) for u in (0, 6, 24, 25, 42)}
        for u, S in members.items():
            self.assertIsNotNone(self.G.find(S), u)
        charts = {label(S).split(".")[0] for S in members.values()}
        self.assertEqual(len(charts), 5)
        self.assertIn("u=0", charts)
        self.assertEqual(len({v.label.split(".")[0] for v in self.G.vertices}), 6)

        self.assertEqual(hasegawa_parameters(ctx, 3, ctx(0)), [])
        special = [v for v in self.G.vertices if v.structure.j().is_zero()]
        self.assertTrue(special)
        for v in special:
            self.assertTrue(v.label.startswith("j=0#"), v.label)
            self.assertTrue(is_isomorphic(conjugate(v.structure), negate(v.structure)))
        self.assertTrue(is_isomorphic(conjugate(members[0]), negate(members[0])))
        j6, j24 = members[6].j(), members[24].j()
        self.assertIn(j6, (j24, j24.conj()))

    def test_twist_isomorphism(self):
        """Twisting maps the (3, 1) graph onto the (3, -1) graph."""
        H = graphs.build(3, -1, 101, (2,), table=self.table, rng=random.Random(9))
        perm = [H.index_of(twist(v.structure)) for v in self.G.vertices]
        self.assertEqual(sorted(perm), list(range(len(H))))
        for i, k in enumerate(perm):
            self.assertEqual(H.vertices[k].cls, self.G.vertices[i].cls)
        mapped = Counter()
        for (a, b, ell), n in self.G.edge_multiset().items():
            mapped[(perm[a], perm[b], ell)] += n
        self.assertEqual(mapped, H.edge_multiset())

    def test_dot_output(self):
        """DOT export is deterministic and marks Max vertices as boxes."""
        first = graphs.export(self.G, "dot")
        self.assertEqual(first, graphs.to_dot(self.G))
        self.assertTrue(first.startswith("graph"))
        self.assertIn("shape=box", first)
        self.assertIn("shape=ellipse", first)

    def test_summary(self):
        """The text summary reports the counts."""
        self.assertIn("Max: 10  Sub: 10", graphs.summary(self.G))

    def test_bad_arguments(self):
        """Unknown formats and methods, and ell = p, are rejected."""
        with self.assertRaises(ValueError):
            graphs.export(self.G, "xml")
        with self.assertRaises(ValueError):
            graphs.build(3, 1, 101, (2,), method="bogus", table=self.table)
        with self.assertRaises(ParameterError):
            graphs.build(3, 1, 101, (101,), table=self.table)

    def test_generating_ideals(self):
        """The ideal above 2 already generates Cl(-303)."""
        gens = graphs.generating_ideals(3, 101)
        self.assertEqual([I.ell for I in gens], [2])


def _neighbors(G, i, ell):
    return [e.dst for e in G.edges if e.src == i and e.ell == ell]


def _distances(G, start, ell):
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for i in frontier:
            for k in _neighbors(G, i, ell):
                if k not in dist:
                    dist[k] = dist[i] + 1
                    nxt.append(k)
        frontier = nxt
    return dist


class TestGraphShapes(unittest.TestCase):
    """Cycle and matching structure of the ell-graphs at p = 97, 83 and 23."""

    @classmethod
    def setUpClass(cls):
        """Set up a private table directory."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_p97_five_cycle(self):
        """Cl(-291) is cyclic of order 4 and the 5-edges close a 4-cycle on Max."""
        G = graphs.build(3, -1, 97, (2, 5), table=self.table, rng=random.Random(11))
        ctx = FieldCtx(97)
        self.assertEqual(ctx.delta, 5)
        members = {u: chart_member(ctx, 3, -1, u) for u in (47, 1, 14, 22)}
        for u, S in members.items():
            self.assertIsNotNone(G.find(S), u)
        self.assertEqual(len({label(S).split(".")[0] for S in members.values()}), 4)
        j47, j14 = members[47].j(), members[14].j()
        self.assertIn(j47, (j14, j14.conj()))

        profile = graphs.degree_profile(G)[5]
        self.assertEqual(profile["Max"], Counter({(2, 0, 0): 4}))
        self.assertEqual(profile["Sub"], Counter({(2, 0, 0): 12}))
        tops = [i for i, v in enumerate(G.vertices) if v.cls == PrimitivityClass.MAX]
        self.assertEqual(set(_distances(G, tops[0], 5)), set(tops))
        for i in tops:
            self.assertEqual(len(set(_neighbors(G, i, 5))), 2)

    def test_p83_cycles_and_matching(self):
        """Ramified 3-edges pair up vertices, 5-edges form two 6-cycles and [l_2] = [l_5]^3."""
        G = graphs.build(3, 1, 83, (2, 3, 5), table=self.table, rng=random.Random(12))
        ctx = FieldCtx(83)
        for u in (0, 32, 40):
            self.assertIsNotNone(G.find(chart_member(ctx, 3, 1, u)), u)
        self.assertEqual(hasegawa_parameters(ctx, 3, ctx(0)), [])
        self.assertTrue(any(v.structure.j().is_zero() for v in G.vertices))

        for i in range(len(G)):
            match = _neighbors(G, i, 3)
            self.assertEqual(len(match), 1)
            self.assertNotEqual(match[0], i)
            self.assertEqual(_neighbors(G, match[0], 3), [i])

        components = {frozenset(_distances(G, i, 5)) for i in range(len(G))}
        self.assertEqual(sorted(len(c) for c in components), [6, 6])
        for i in range(len(G)):
            self.assertEqual(len(set(_neighbors(G, i, 5))), 2)
            dist = _distances(G, i, 5)
            antipode = [k for k, n in dist.items() if n == 3]
            self.assertEqual(_neighbors(G, i, 2), antipode)

    def test_p23_profiles(self):
        """-69 = 3 mod 8 has no Sub vertices; odd ell give 1 + (-dp/ell) horizontal edges."""
        G = graphs.build(3, 1, 23, (2, 3, 5, 7), table=self.table, rng=random.Random(13))
        self.assertTrue(graphs.verify_graph(G, random.Random(14)).ok)
        self.assertEqual(G.counts()["Sub"], 0)
        profile = graphs.degree_profile(G)
        self.assertEqual(set(profile[2]["Max"]), {(1, 0, 0)})
        for ell in (3, 5, 7):
            n = 1 + kronecker(-3 * 23, ell)
            self.assertEqual(set(profile[ell]["Max"]), {(n, 0, 0)}, ell)
        self.assertEqual(graphs.expected_profile(3, 23, 5)["Max"], (2, 0, 0))


class TestCounting(unittest.TestCase):
    """Enumeration counts against class numbers."""

    @classmethod
    def setUpClass(cls):
        """Set up a private table directory."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_counts_up_to_200(self):
        """Max and Sub counts match h(D_K) for d in {1, 2, 3, 5} and 5 < p <= 200."""
        for d in (1, 2, 3, 5):
            for p in primerange(7, 201):
                found = Counter(primitivity(S).value for S in enumerate_all(d, 1, p, table=self.table))
                expected = graphs.expected_counts(d, p)
                self.assertEqual({"Max": found["Max"], "Sub": found["Sub"]}, expected, (d, p))


if __name__ == '__main__':
    unittest.main()
