#!/usr/bin/env python3
"""
Tests for field and polynomial arithmetic.
"""

import random
import unittest

from dstruct_tools.arith import (
    FieldCtx,
    Poly,
    factor_squarefree,
    int_to_hex,
    is_irreducible,
    legendre,
    power_sums,
    poly_from_power_sums,
    sqrt_mod,
)
from dstruct_tools.exceptions import ArithmeticDomainError


class TestPrimeField(unittest.TestCase):
    """Helpers over F_p."""

    def test_legendre(self):
        """Quadratic residues modulo 7."""
        self.assertEqual(legendre(2, 7), 1)
        self.assertEqual(legendre(3, 7), -1)
        self.assertEqual(legendre(14, 7), 0)

    def test_sqrt_mod_three_mod_four(self):
        """Smaller root for p = 3 mod 4."""
        self.assertEqual(sqrt_mod(2, 7), 3)
        self.assertIsNone(sqrt_mod(3, 7))

    def test_sqrt_mod_tonelli_shanks(self):
        """Smaller root for p = 1 mod 4."""
        self.assertEqual(sqrt_mod(2, 17), 6)
        for a in range(1, 41):
            r = sqrt_mod(a, 41)
            if r is not None:
                self.assertEqual(r * r % 41, a)

    def test_int_to_hex_width(self):
        """Fixed width from the byte length of p."""
        self.assertEqual(int_to_hex(5, 101), "05")
        self.assertEqual(int_to_hex(5, 419), "0005")


class TestQuadraticExtension(unittest.TestCase):
    """Arithmetic in F_{p^2}."""

    def setUp(self):
        """Set up the field for p = 101."""
        self.ctx = FieldCtx(101)
        self.rng = random.Random(1)

    def test_default_delta_is_nonresidue(self):
        """The smallest nonresidue is chosen."""
        self.assertEqual(self.ctx.delta, 2)
        self.assertEqual(FieldCtx(103).delta, 3)

    def test_residue_delta_rejected(self):
        """A square cannot define the extension."""
        with self.assertRaises(ArithmeticDomainError):
            FieldCtx(101, delta=4)

    def test_inverse(self):
        """x * x^-1 = 1 and zero has no inverse."""
        for _ in range(20):
            x = self.ctx.random_element(self.rng)
            if x.is_zero():
                continue
            self.assertEqual(x * x.inverse(), self.ctx.one)
        with self.assertRaises(ArithmeticDomainError):
            self.ctx.zero.inverse()

    def test_frobenius_is_conjugation(self):
        """x^p equals the conjugate."""
        for _ in range(10):
            x = self.ctx.random_element(self.rng)
            self.assertEqual(x ** 101, x.conj())

    def test_norm(self):
        """Norm of 3 + 4s with s^2 = 2."""
        self.assertEqual(self.ctx(3, 4).norm(), (9 - 2 * 16) % 101)

    def test_sqrt(self):
        """Square roots of squares, None for nonsquares."""
        for _ in range(20):
            x = self.ctx.random_element(self.rng)
            y = (x * x).sqrt()
            self.assertIsNotNone(y)
            self.assertEqual(y * y, x * x)
        self.assertIsNone(self.ctx.nonsquare.sqrt())

    def test_hex_round_trip(self):
        """Hex encoding reads back."""
        x = self.ctx(17, 93)
        self.assertEqual(self.ctx.from_hex(x.to_hex()), x)


class TestPolynomials(unittest.TestCase):
    """Polynomials over F_{p^2}."""

    def setUp(self):
        """Set up the field for p = 101."""
        self.ctx = FieldCtx(101)

    def test_roots_of_product(self):
        """Roots of (x - 1)(x - 2)(x - 3)."""
        f = Poly.from_roots([self.ctx(1), self.ctx(2), self.ctx(3)], self.ctx)
        self.assertEqual(sorted(r.key() for r in f.roots()), [(1, 0), (2, 0), (3, 0)])

    def test_roots_with_multiplicity(self):
        """Repeated roots are reported once with their multiplicity."""
        f = Poly.from_roots([self.ctx(5), self.ctx(5), self.ctx(7)], self.ctx)
        found = dict((r.key(), m) for r, m in f.roots(multiplicity=True))
        self.assertEqual(found, {(5, 0): 2, (7, 0): 1})

    def test_divmod(self):
        """f = q g + r with deg r < deg g."""
        rng = random.Random(3)
        f = Poly([self.ctx.random_element(rng) for _ in range(7)], self.ctx)
        g = Poly([self.ctx.random_element(rng) for _ in range(3)] + [self.ctx.one], self.ctx)
        q, r = divmod(f, g)
        self.assertEqual(q * g + r, f)
        self.assertLess(r.degree(), g.degree())

    def test_irreducible_factors(self):
        """A product of an irreducible quadratic and a linear factor."""
        x = Poly.x(self.ctx)
        quad = None
        for c in range(1, 101):
            candidate = x * x + Poly.constant(self.ctx(c, 1), self.ctx)
            if is_irreducible(candidate):
                quad = candidate
                break
        self.assertIsNotNone(quad)
        f = quad * (x - Poly.constant(self.ctx(4), self.ctx))
        factors = factor_squarefree(f.monic(), random.Random(0))
        self.assertEqual(sorted(g.degree() for g in factors), [1, 2])

    def test_power_sums_round_trip(self):
        """Newton identities recover a monic polynomial from its power sums."""
        f = Poly.from_roots([self.ctx(2), self.ctx(3, 1), self.ctx(9)], self.ctx)
        sums = power_sums(f, 4)
        self.assertEqual(poly_from_power_sums(sums, self.ctx), f)


if __name__ == '__main__':
    unittest.main()
