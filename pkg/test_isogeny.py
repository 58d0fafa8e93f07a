#!/usr/bin/env python3
"""
Tests for Velu isogenies, duals and composition.
"""

import random
import shutil
import tempfile
import unittest

from dstruct_tools.arith import FieldCtx, Poly
from dstruct_tools.curve import cyclic_kernels, supersingular_model
from dstruct_tools.exceptions import IsogenyError
from dstruct_tools.isogeny import (
    Isogeny,
    compose,
    conj_isogeny,
    dual,
    isomorphism,
    velu_two,
)
from dstruct_tools.modpoly import ModularPolyTable, modular_neighbors, set_default_table


class TestIsogeny(unittest.TestCase):
    """Isogenies out of a supersingular curve with j = 0 over F_{101^2}."""

    @classmethod
    def setUpClass(cls):
        """Set up a private table directory and the base curve."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)
        cls.ctx = FieldCtx(101)
        cls.E = supersingular_model(cls.ctx, 0, 1, random.Random(5))

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def setUp(self):
        self.rng = random.Random(11)

    def test_degree(self):
        """Kernels of size ell give isogenies of degree ell."""
        for ell in (2, 3):
            for K in cyclic_kernels(self.E, ell, self.rng):
                self.assertEqual(Isogeny(self.E, K).degree, ell)

    def test_homomorphism(self):
        """phi(P + Q) = phi(P) + phi(Q)."""
        phi = Isogeny(self.E, cyclic_kernels(self.E, 3, self.rng)[0])
        for _ in range(5):
            P = self.E.random_point(self.rng)
            Q = self.E.random_point(self.rng)
            self.assertEqual(phi(P + Q), phi(P) + phi(Q))

    def test_kernel_maps_to_infinity(self):
        """Points of order 2 in the kernel vanish."""
        T = self.E.two_torsion()[0]
        phi = velu_two(self.E, T)
        self.assertTrue(phi(T).is_infinity())

    def test_dual_composes_to_multiplication(self):
        """dual(phi) after phi is [deg phi]."""
        for ell in (2, 3):
            phi = Isogeny(self.E, cyclic_kernels(self.E, ell, self.rng)[0])
            back = dual(phi, self.rng)
            self.assertEqual(back.codomain, self.E)
            for _ in range(3):
                P = self.E.random_point(self.rng)
                self.assertEqual(back(phi(P)), P * ell)

    def test_codomain_is_modular_neighbour(self):
        """Velu codomains are roots of Phi_ell(j, X)."""
        j = self.E.j_invariant()
        for ell in (2, 3):
            roots = modular_neighbors(j, ell, self.table)
            for K in cyclic_kernels(self.E, ell, self.rng):
                self.assertIn(Isogeny(self.E, K).codomain.j_invariant(), roots)

    def test_compose_degree(self):
        """A 2-isogeny followed by a 3-isogeny has degree 6."""
        phi = Isogeny(self.E, cyclic_kernels(self.E, 2, self.rng)[0])
        psi = Isogeny(phi.codomain, cyclic_kernels(phi.codomain, 3, self.rng)[0])
        chi = compose(phi, psi, self.rng)
        self.assertEqual(chi.degree, 6)
        P = self.E.random_point(self.rng)
        self.assertEqual(chi(P), psi(phi(P)))

    def test_isomorphism_scaling(self):
        """tau_u maps E onto the scaled curve."""
        u = self.ctx(4, 9)
        tau = isomorphism(self.E, u)
        self.assertEqual(tau.degree, 1)
        self.assertEqual(tau.codomain, self.E.scaled(u))

    def test_zero_kernel_rejected(self):
        """The zero polynomial is not a kernel."""
        with self.assertRaises(IsogenyError):
            Isogeny(self.E, Poly([], self.ctx))

    def test_conjugate_isogeny(self):
        """The conjugate isogeny runs between conjugate curves."""
        phi = Isogeny(self.E, cyclic_kernels(self.E, 3, self.rng)[0])
        bar = conj_isogeny(phi)
        self.assertEqual(bar.domain, self.E.conjugate())
        self.assertEqual(bar.codomain, phi.codomain.conjugate())


if __name__ == '__main__':
    unittest.main()
