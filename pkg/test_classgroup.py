#!/usr/bin/env python3
"""
Tests for imaginary quadratic class groups.
"""

import unittest

from dstruct_tools.classgroup import (
    BinaryQF,
    class_group_oracle,
    class_number,
    fundamental_discriminant,
    ideal_form,
    kronecker,
    reduced_forms,
)
from dstruct_tools.exceptions import ParameterError


class TestBinaryForms(unittest.TestCase):
    """Reduction and composition of binary quadratic forms."""

    def test_reduced_forms_small(self):
        """Discriminant -23 has three reduced forms."""
        forms = set(reduced_forms(-23))
        self.assertEqual(forms, {(1, 1, 6), (2, 1, 3), (2, -1, 3)})
        for f in forms:
            self.assertTrue(f.is_reduced())

    def test_reduction_keeps_discriminant(self):
        """Reduction is an equivalence."""
        f = BinaryQF(11, 15, 12)
        g = f.reduced()
        self.assertTrue(g.is_reduced())
        self.assertEqual(g.discriminant(), f.discriminant())

    def test_composition_with_inverse(self):
        """f * f^-1 is the principal form."""
        identity = BinaryQF.identity_for_discriminant(-303).reduced()
        for f in reduced_forms(-303):
            self.assertEqual(f * f.inverse(), identity)
            self.assertEqual(f * identity, f)

    def test_power(self):
        """Powers agree with repeated composition."""
        f = BinaryQF(2, 1, 3)
        self.assertEqual(f ** 3, BinaryQF.identity_for_discriminant(-23).reduced())
        self.assertEqual(f ** -1, f.inverse())

    def test_bad_discriminant(self):
        """Only negative discriminants congruent to 0 or 1 mod 4 are accepted."""
        with self.assertRaises(ParameterError):
            reduced_forms(5)
        with self.assertRaises(ParameterError):
            reduced_forms(-5)


class TestClassGroups(unittest.TestCase):
    """Structure of the class groups behind the graphs at p = 101, 97 and 83."""

    def test_fundamental_discriminants(self):
        """-dp or -4dp depending on dp mod 4."""
        self.assertEqual(fundamental_discriminant(3, 101), -303)
        self.assertEqual(fundamental_discriminant(1, 101), -404)
        self.assertEqual(fundamental_discriminant(3, 97), -291)
        self.assertEqual(fundamental_discriminant(3, 83), -996)

    def test_class_numbers(self):
        """Class numbers of the small discriminants."""
        self.assertEqual(class_number(-23), 3)
        self.assertEqual(class_number(-303), 10)
        self.assertEqual(class_number(-291), 4)
        self.assertEqual(class_number(-996), 12)

    def test_group_structure(self):
        """Cl(-303) is cyclic, Cl(-996) is Z/2 x Z/6."""
        self.assertEqual(class_group_oracle(-303).invariant_factors(), [10])
        self.assertTrue(class_group_oracle(-303).is_cyclic())
        self.assertEqual(class_group_oracle(-996).invariant_factors(), [2, 6])
        self.assertFalse(class_group_oracle(-996).is_cyclic())

    def test_splitting(self):
        """Kronecker symbols of small primes for -303."""
        self.assertEqual(kronecker(-303, 2), 1)
        self.assertEqual(kronecker(-303, 3), 0)
        self.assertEqual(kronecker(-303, 5), -1)
        self.assertEqual(kronecker(-303, 11), 1)
        self.assertEqual(kronecker(-303, 13), 1)

    def test_conjugate_ideals_are_inverse(self):
        """The two ideals above a split prime are inverse classes."""
        f = ideal_form(-303, 11, 4)
        g = ideal_form(-303, 11, 7)
        self.assertEqual(f, g.inverse())

    def test_ideal_above_two_generates(self):
        """The ideal above 2 has order 10 in Cl(-303)."""
        G = class_group_oracle(-303)
        f = ideal_form(-303, 2, 1)
        self.assertIn(f, G)
        self.assertEqual(G.order(f), 10)

    def test_to_json(self):
        """JSON summary carries h and the invariants."""
        data = class_group_oracle(-23).to_json()
        self.assertEqual(data["h"], 3)
        self.assertEqual(data["invariants"], [3])
        self.assertEqual(len(data["forms"]), 3)


if __name__ == '__main__':
    unittest.main()
