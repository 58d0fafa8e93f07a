#!/usr/bin/env python3
"""
Tests for modular polynomial tables and their download.
"""

import shutil
import tempfile
import unittest
from unittest import mock

import requests

from dstruct_tools.downloader import TableDownloader
from dstruct_tools.exceptions import DownloadError, ModularPolynomialError
from dstruct_tools.modpoly import (
    ModularPolyTable,
    check_modular_polynomial,
    compute_modular_polynomial,
    format_table,
    parse_table,
)


class TestModularPolynomials(unittest.TestCase):
    """Computation, evaluation and caching of Phi_m."""

    def setUp(self):
        """Set up test environment."""
        self.temp_dir = tempfile.mkdtemp()
        self.table = ModularPolyTable(self.temp_dir)

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_phi2_coefficients(self):
        """The classical coefficients of Phi_2."""
        phi = self.table.get(2)
        self.assertEqual(phi[(3, 0)], 1)
        self.assertEqual(phi[(2, 2)], -1)
        self.assertEqual(phi[(2, 1)], 1488)
        self.assertEqual(phi[(2, 0)], -162000)
        self.assertEqual(phi[(1, 1)], 40773375)
        self.assertEqual(phi[(1, 0)], 8748000000)
        self.assertEqual(phi[(0, 0)], -157464000000000)
        self.assertEqual(self.table.degree(2), 3)

    def test_cm_points_on_diagonal(self):
        """j-invariants with an endomorphism of degree m are roots of Phi_m(X, X)."""
        self.assertEqual(self.table.evaluate(2, 8000, 8000), 0)
        self.assertEqual(self.table.evaluate(2, 1728, 1728), 0)
        self.assertEqual(self.table.evaluate(3, 0, 0), 0)
        self.assertEqual(self.table.evaluate(5, 1728, 1728), 0)
        self.assertEqual(self.table.evaluate(5, 287496, 287496), 0)
        self.assertNotEqual(self.table.evaluate(3, 1728, 1728), 0)

    def test_computed_tables_are_consistent(self):
        """Computed tables are symmetric and monic of degree psi(m)."""
        for m in (2, 3, 5):
            check_modular_polynomial(m, self.table.get(m))

    def test_cache_file_written(self):
        """A computed level is cached and read back after forget()."""
        self.table.get(3)
        self.assertTrue(self.table.cache_path(3).exists())
        self.assertEqual(self.table.provenance(3)["source"], "computed")
        self.table.forget(3)
        self.assertEqual(self.table.provenance(3)["source"], str(self.table.cache_path(3)))

    def test_clear_cache(self):
        """Cached files are removed and reported."""
        self.table.get(2)
        removed = self.table.clear_cache()
        self.assertIn(self.table.cache_path(2), removed)
        self.assertFalse(self.table.cache_path(2).exists())
        self.assertEqual(self.table.loaded_provenance(), {})

    def test_non_squarefree_level(self):
        """Levels that are not squarefree are never computed."""
        self.assertFalse(self.table.available(4))
        with self.assertRaises(ModularPolynomialError):
            self.table.get(4)

    def test_parse_bracket_format(self):
        """Bracketed "[i,j] c" lines are mirrored across the diagonal."""
        coeffs = parse_table("[3,0] 1\n[2,1] 1488\n[1,1] 40773375\n")
        self.assertEqual(coeffs[(0, 3)], 1)
        self.assertEqual(coeffs[(1, 2)], 1488)
        self.assertEqual(coeffs[(1, 1)], 40773375)

    def test_parse_errors(self):
        """Malformed lines and level mismatches are rejected."""
        with self.assertRaises(ModularPolynomialError):
            parse_table("2 1 0\n")
        with self.assertRaises(ModularPolynomialError):
            parse_table("3 1 0 1\n", 2)

    def test_asymmetric_table_rejected(self):
        """check_modular_polynomial catches asymmetric coefficients."""
        coeffs = dict(compute_modular_polynomial(2))
        coeffs[(2, 1)] += 1
        with self.assertRaises(ModularPolynomialError):
            check_modular_polynomial(2, coeffs)

    def test_status(self):
        """Status lists configured levels with their degree."""
        status = self.table.status()
        self.assertIn(2, status)
        self.assertEqual(status[2]["degree"], 3)
        self.assertTrue(status[2]["available"])


def _response(body: bytes):
    response = mock.MagicMock()
    response.headers = {"content-length": str(len(body))}
    response.iter_content.return_value = [body]
    return response


class TestTableDownloader(unittest.TestCase):
    """Downloads with requests mocked out."""

    def setUp(self):
        """Set up test environment."""
        self.temp_dir = tempfile.mkdtemp()
        self.table = ModularPolyTable(self.temp_dir, compute=False)
        self.downloader = TableDownloader(self.table, "https://example.invalid/phi_j_{level}.txt")

    def tearDown(self):
        """Clean up test environment."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_url_for(self):
        """The level is substituted into the template."""
        self.assertEqual(self.downloader.url_for(7), "https://example.invalid/phi_j_7.txt")

    @mock.patch("dstruct_tools.downloader.requests.get")
    def test_fetch_valid_table(self, mock_get):
        """A valid table is stored and picked up by the table."""
        body = format_table(2, compute_modular_polynomial(2)).encode()
        mock_get.return_value = _response(body)
        path = self.downloader.fetch(2)
        self.assertEqual(path.name, "phi_j_2.txt")
        self.assertTrue(path.exists())
        self.assertEqual(self.table.get(2)[(1, 1)], 40773375)
        self.assertEqual(self.table.provenance(2)["source"], str(path))

    @mock.patch("dstruct_tools.downloader.requests.get")
    def test_fetch_skips_existing(self, mock_get):
        """An existing file is kept unless forced."""
        body = format_table(2, compute_modular_polynomial(2)).encode()
        mock_get.return_value = _response(body)
        self.downloader.fetch(2)
        self.downloader.fetch(2)
        self.assertEqual(mock_get.call_count, 1)
        self.downloader.fetch(2, force=True)
        self.assertEqual(mock_get.call_count, 2)

    @mock.patch("dstruct_tools.downloader.requests.get")
    def test_fetch_invalid_table(self, mock_get):
        """A table that fails validation is removed."""
        mock_get.return_value = _response(b"2 1 0 5\n")
        with self.assertRaises(ModularPolynomialError):
            self.downloader.fetch(2)
        self.assertEqual(list(self.table.cache_dir.iterdir()), [])

    @mock.patch("dstruct_tools.downloader.requests.get")
    def test_network_error(self, mock_get):
        """Transport failures surface as DownloadError."""
        mock_get.side_effect = requests.ConnectionError("unreachable")
        with self.assertRaises(DownloadError):
            self.downloader.fetch(3)
        self.assertFalse(self.table.available(3))


if __name__ == '__main__':
    unittest.main()
