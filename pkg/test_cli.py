#!/usr/bin/env python3
"""
Tests for the dstruct-tools command line.
"""

import json
import os
import shutil
import tempfile
import unittest

from click.testing import CliRunner

from dstruct_tools.cli import main


class TestCli(unittest.TestCase):
    """Commands run through click's test runner."""

    def setUp(self):
        """Set up test environment."""
        self.temp_dir = tempfile.mkdtemp()
        self.runner = CliRunner()

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def invoke(self, *args, seed=0):
        return self.runner.invoke(main, ["--data-dir", self.temp_dir, "--seed", str(seed), *args])

    def path(self, name):
        return os.path.join(self.temp_dir, name)

    def test_usage_error(self):
        """Missing required options exit with status 2."""
        result = self.invoke("graph", "build", "--d", "3")
        self.assertEqual(result.exit_code, 2)

    def test_graph_dot_is_deterministic(self):
        """Two runs with the same seed print the same DOT text."""
        args = ("graph", "build", "--d", "3", "--p", "101", "--format", "dot")
        first = self.invoke(*args)
        second = self.invoke(*args)
        self.assertEqual(first.exit_code, 0, first.output)
        self.assertEqual(first.output, second.output)
        self.assertTrue(first.output.startswith("graph"))

    def test_graph_build_and_verify(self):
        """A written graph file verifies."""
        out = self.path("g.json")
        result = self.invoke("graph", "build", "--d", "3", "--p", "101", "--output", out)
        self.assertEqual(result.exit_code, 0, result.output)
        with open(out) as f:
            data = json.load(f)
        self.assertEqual(data["meta"]["provenance"]["p"], 101)
        result = self.invoke("graph", "verify", out, "--json")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue(json.loads(result.output)["ok"])

    def test_graph_text_summary(self):
        """The text format prints the class counts."""
        result = self.invoke("graph", "build", "--d", "3", "--p", "101", "--format", "text")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("Max: 10  Sub: 10", result.output)

    def test_enumerate_json(self):
        """Enumeration reports twenty structures at p = 101."""
        result = self.invoke("enumerate", "--d", "3", "--p", "101", "--json")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(json.loads(result.output)["count"], 20)

    def test_key_exchange_flow(self):
        """params, two keygens and both exchanges agree."""
        params = self.path("params.json")
        result = self.invoke(
            "params", "--p", "101", "--d", "3", "--primes", "2,13", "--lambda-sec", "2", "--output", params
        )
        self.assertEqual(result.exit_code, 0, result.output)
        for name, seed in (("alice", 1), ("bob", 2)):
            result = self.invoke(
                "keygen",
                "--params", params,
                "--secret", self.path(f"{name}.sk"),
                "--public", self.path(f"{name}.pk"),
                seed=seed,
            )
            self.assertEqual(result.exit_code, 0, result.output)
        ab = self.invoke("exchange", "--params", params, "--alice", self.path("alice.sk"), "--bob", self.path("bob.pk"))
        ba = self.invoke("exchange", "--params", params, "--alice", self.path("bob.sk"), "--bob", self.path("alice.pk"))
        self.assertEqual(ab.exit_code, 0, ab.output)
        self.assertEqual(ba.exit_code, 0, ba.output)
        self.assertEqual(json.loads(ab.output)["shared_secret"], json.loads(ba.output)["shared_secret"])

        result = self.invoke("validate", "--params", params, "--key", self.path("bob.pk"), "--json")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue(json.loads(result.output)["valid"])

    def test_inert_prime_fails(self):
        """Parameter errors exit with status 1."""
        result = self.invoke("params", "--p", "101", "--d", "3", "--primes", "5", "--lambda-sec", "2")
        self.assertEqual(result.exit_code, 1)

    def test_bad_prime_list(self):
        """Non-integer prime lists are usage errors."""
        result = self.invoke("params", "--p", "101", "--d", "3", "--primes", "2,x")
        self.assertEqual(result.exit_code, 2)

    def test_sidh_check(self):
        """j = 8000 is distinguished for degree 2 at p = 101."""
        result = self.invoke("sidh-check", "--p-expr", "101", "--j", "8000", "--degrees", "2")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(json.loads(result.output)["degrees"], [2])

    def test_selftest_json(self):
        """Every oracle cross-check passes."""
        result = self.invoke("selftest", "--json")
        self.assertEqual(result.exit_code, 0, result.output)
        checks = json.loads(result.output)["checks"]
        self.assertTrue(all(c["ok"] for c in checks.values()))

    def test_tables_status_json(self):
        """Status lists the configured levels under the data directory."""
        result = self.invoke("tables", "status", "--json")
        self.assertEqual(result.exit_code, 0, result.output)
        data = json.loads(result.output)
        self.assertEqual(data["data_dir"], self.temp_dir)
        self.assertIn("2", data["levels"])
        self.assertTrue(data["levels"]["2"]["available"])


if __name__ == '__main__':
    unittest.main()
