#!/usr/bin/env python3
"""
Basic tests for the dstruct-tools package.
"""

import unittest
import tempfile
import shutil
from pathlib import Path

from dstruct_tools import DStructTools
from dstruct_tools.arith import FieldCtx
from dstruct_tools.core import parse_element
from dstruct_tools.dstruct import supersingular_j_invariants
from dstruct_tools.exceptions import ParameterError


class TestDStructTools(unittest.TestCase):
    """Test cases for DStructTools."""

    def setUp(self):
        """Set up test environment."""
        self.temp_dir = tempfile.mkdtemp()
        self.tools = DStructTools(self.temp_dir, seed=3)

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_data_directory(self):
        """The table cache lives under the data directory."""
        self.assertEqual(self.tools.data_dir, Path(self.temp_dir))
        status = self.tools.tables_status()
        self.assertEqual(status["data_dir"], self.temp_dir)
        self.assertTrue(status["cache_dir"].startswith(self.temp_dir))
        for info in status["levels"].values():
            self.assertIn("cached", info)
            self.assertIn("available", info)

    def test_enumerate(self):
        """Twenty labelled structures at p = 101."""
        found = self.tools.enumerate(3, 1, 101)
        self.assertEqual(len(found), 20)
        self.assertEqual(sorted({item["class"] for item in found}), ["Max", "Sub"])
        self.assertEqual(len({item["label"] for item in found}), 20)

    def test_provenance(self):
        """Provenance records the seed and every loaded table."""
        self.tools.enumerate(3, 1, 101)
        prov = self.tools.provenance(p=101)
        self.assertEqual(prov["seed"], 3)
        self.assertEqual(prov["p"], 101)
        self.assertIn("3", prov["tables"])
        self.assertEqual(len(prov["tables"]["3"]["sha256"]), 64)

    def test_key_exchange(self):
        """Keys made through the facade agree on a shared secret."""
        params = self.tools.make_params(101, 3, 1, [2, 13], lambda_sec=2)
        alice = DStructTools(self.temp_dir, seed=1).keygen(params)
        bob = DStructTools(self.temp_dir, seed=2).keygen(params)
        s1 = self.tools.exchange(params, alice.secret_json(params), bob.public_json(params))
        s2 = self.tools.exchange(params, bob.secret_json(params), alice.public_json(params))
        self.assertEqual(s1, s2)
        self.assertTrue(self.tools.validate(params, alice.public_json(params)))

    def test_foreign_key_rejected(self):
        """A key for other parameters is refused."""
        params = self.tools.make_params(101, 3, 1, [2, 13], lambda_sec=2)
        other = self.tools.make_params(101, 3, 1, [2, 11], lambda_sec=2)
        pair = self.tools.keygen(other)
        with self.assertRaises(ParameterError):
            self.tools.validate(params, pair.public_json(other))

    def test_pathfind(self):
        """A verified path from j = 0 to a curve outside F_p."""
        ctx = FieldCtx(101)
        js = supersingular_j_invariants(ctx, self.tools.table)
        target = next(j for j in sorted(js, key=lambda z: z.key()) if not j.in_base())
        result = self.tools.pathfind(101, "0", str(target), degrees=[1])
        self.assertTrue(result["verified"])
        self.assertEqual(result["path"]["j"][0], "0")
        self.assertEqual(result["path"]["j"][-1], str(target))
        self.assertEqual(result["steps"], result["path"]["length"])

    def test_selftest(self):
        """Every oracle cross-check passes."""
        results = self.tools.selftest()
        for name, result in results.items():
            self.assertTrue(result["ok"], f"{name}: {result['detail']}")


class TestParseElement(unittest.TestCase):
    """Test cases for parse_element."""

    def setUp(self):
        """Set up the field for p = 101."""
        self.ctx = FieldCtx(101)

    def test_integers(self):
        """Plain and negative integers land in F_p."""
        self.assertEqual(parse_element(self.ctx, "5"), self.ctx(5))
        self.assertEqual(parse_element(self.ctx, "-1"), self.ctx(100))
        self.assertEqual(parse_element(self.ctx, 7), self.ctx(7))

    def test_extension_elements(self):
        """The a+b*s form reads both coordinates."""
        self.assertEqual(parse_element(self.ctx, "3+4*s"), self.ctx(3, 4))
        self.assertEqual(parse_element(self.ctx, str(self.ctx(3, 4))), self.ctx(3, 4))

    def test_invalid_text(self):
        """Anything else is a ValueError."""
        with self.assertRaises(ValueError):
            parse_element(self.ctx, "3+4*t")
        with self.assertRaises(ValueError):
            parse_element(self.ctx, "")


if __name__ == '__main__':
    unittest.main()
