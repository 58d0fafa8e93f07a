#!/usr/bin/env python3
"""
Tests for the key exchange, public key validation and the walk test.
"""

import dataclasses
import math
import random
import shutil
import tempfile
import unittest

from dstruct_tools.action import ExponentVector
from dstruct_tools.arith import FieldCtx, legendre
from dstruct_tools.curve import Curve, is_supersingular_oracle
from dstruct_tools.dstruct import (
    StructureEncoding,
    decode,
    encode_explicit,
    from_base_curve,
    hasegawa,
    is_isomorphic,
    supersingular_j_invariants,
)
from dstruct_tools.exceptions import EncodingError, ParameterError, SingularCurveError, StructureError, ValidationError
from dstruct_tools.modpoly import ModularPolyTable, set_default_table
from dstruct_tools.protocol import (
    SystemParams,
    csidh_prime,
    derive,
    keygen,
    keyspace_bound,
    load_public_key,
    make_params,
    public_key,
    recover_secret,
    shared_value,
    supersingularity_walk_test,
    two_isogeny_budget,
    validate,
    walk_length,
)

P = 419


def _add(A, B, a):
    """Affine addition over F_419; None is the point at infinity."""
    if A is None:
        return B
    if B is None:
        return A
    (x1, y1), (x2, y2) = A, B
    if x1 == x2 and (y1 + y2) % P == 0:
        return None
    if A == B:
        m = (3 * x1 * x1 + a) * pow(2 * y1, -1, P) % P
    else:
        m = (y2 - y1) * pow(x2 - x1, -1, P) % P
    x3 = (m * m - x1 - x2) % P
    return x3, (m * (x1 - x3) - y1) % P


def _mul(n, A, a):
    R = None
    while n:
        if n & 1:
            R = _add(R, A, a)
        A = _add(A, A, a)
        n >>= 1
    return R


def _velu_step(a, b, ell, rng):
    """Codomain of the F_p-rational ell-isogeny out of y^2 = x^3 + ax + b."""
    while True:
        x = rng.randrange(P)
        rhs = (x ** 3 + a * x + b) % P
        if rhs == 0 or legendre(rhs, P) != 1:
            continue
        K = _mul((P + 1) // ell, (x, pow(rhs, (P + 1) // 4, P)), a)
        if K is not None:
            break
    v = w = 0
    Q = K
    for _ in range((ell - 1) // 2):
        xq, yq = Q
        vq = 2 * (3 * xq * xq + a)
        v += vq
        w += 4 * yq * yq + xq * vq
        Q = _add(Q, K, a)
    return (a - 5 * v) % P, (b - 7 * w) % P


def _reference_j(exps, primes, rng):
    """j after the CSIDH action on y^2 = x^3 + x, computed with plain integers."""
    a, b = 1, 0
    for ell, e in zip(primes, exps):
        sign = 1 if e > 0 else -1
        b = sign * b % P
        for _ in range(abs(e)):
            a, b = _velu_step(a, b, ell, rng)
        b = sign * b % P
    num = 4 * a ** 3
    return 1728 * num * pow(num + 27 * b * b, -1, P) % P


def _curve_with_j(ctx, j, c):
    """A curve over F_p with j-invariant j, scaled by c."""
    if j == 0:
        return Curve(0, c, ctx)
    if j == 1728 % ctx.p:
        return Curve(c, 0, ctx)
    k = 1728 - j
    return Curve(3 * j * k * c * c % ctx.p, 2 * j * k * k * c * c * c % ctx.p, ctx)


class TestParameters(unittest.TestCase):
    """Prime and key box selection."""

    def test_csidh_prime(self):
        """4 * 3 * 5 * 7 - 1 = 419 is the first prime of that shape."""
        self.assertEqual(csidh_prime([3, 5, 7]), (419, 4))

    def test_keyspace_bound(self):
        """Least B with (2B + 1)^n >= 2^(2 lambda)."""
        self.assertEqual(keyspace_bound(2, 2), 2)
        self.assertEqual(keyspace_bound(3, 2), 1)
        with self.assertRaises(ParameterError):
            keyspace_bound(0, 2)

    def test_walk_length(self):
        """ceil(1/2 (log2 p - log2 d) + 1)."""
        self.assertEqual(walk_length(101, 3), 4)
        self.assertEqual(walk_length(419, 1), 6)
        self.assertAlmostEqual(two_isogeny_budget(419, 1), 0.5 * math.log2(419) + 5)


class TestKeyExchange(unittest.TestCase):
    """The toy CSIDH instance p = 419 with d = 1 and ideals above 3, 5, 7."""

    @classmethod
    def setUpClass(cls):
        """Set up parameters with base curve y^2 = x^3 + x."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)
        cls.ctx = FieldCtx(P)
        cls.base = from_base_curve(Curve(1, 0, cls.ctx))
        cls.params = make_params(P, 1, 1, [3, 5, 7], lambda_sec=2, base=cls.base, table=cls.table)

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_params(self):
        """Eigenvalue 1 ideals, a box of radius 1 and the CSIDH cofactor."""
        self.assertEqual(self.params.primes, [3, 5, 7])
        self.assertEqual([I.lam for I in self.params.ideals], [1, 1, 1])
        self.assertEqual(self.params.bound, 1)
        self.assertEqual(self.params.cofactor, 4)

    def test_params_json(self):
        """Reloaded parameters have the same identifier."""
        again = SystemParams.from_json(self.params.to_json())
        again.check()
        self.assertEqual(again.params_id, self.params.params_id)

    def test_inert_prime_rejected(self):
        """11 is inert in Q(sqrt(-419))."""
        with self.assertRaises(ParameterError):
            make_params(P, 1, 1, [3, 11], lambda_sec=2, base=self.base)

    def test_small_box_rejected(self):
        """A box below 2 lambda bits fails the parameter check."""
        with self.assertRaises(ParameterError):
            make_params(P, 1, 1, [3, 5, 7], lambda_sec=8, bound=1, base=self.base)

    def test_zero_secret(self):
        """The zero vector maps S_0 to itself."""
        sk = ExponentVector((3, 5, 7), (0, 0, 0))
        S = decode(public_key(sk, self.params), self.ctx)
        self.assertTrue(is_isomorphic(S, self.base))

    def test_matches_reference_action(self):
        """Public keys agree with an independent Velu computation over F_p."""
        rng = random.Random(21)
        for exps in ((1, 0, 0), (0, -1, 0), (1, -1, 2)):
            sk = ExponentVector((3, 5, 7), exps)
            j = decode(public_key(sk, self.params, random.Random(22)), self.ctx).j()
            self.assertEqual(j, self.ctx(_reference_j(exps, (3, 5, 7), rng)), exps)

    def test_shared_secret_agrees(self):
        """Both parties derive the same secret."""
        alice = keygen(self.params, seed=1)
        bob = keygen(self.params, seed=2)
        s1 = derive(alice.sk, bob.pk, self.params)
        s2 = derive(bob.sk, alice.pk, self.params)
        self.assertEqual(s1, s2)
        self.assertTrue(all(c in "0123456789abcdef" for c in s1))

    def test_shared_value_modes(self):
        """The j mode packs both coordinates of the smaller conjugate."""
        self.assertEqual(len(shared_value(self.base, "j")), 4)
        self.assertEqual(shared_value(self.base, "orbit"), shared_value(self.base.negate(), "orbit"))

    def test_key_bound_to_params(self):
        """Keys carry the parameter identifier."""
        pair = keygen(self.params, seed=3)
        data = pair.public_json(self.params)
        self.assertEqual(load_public_key(data, self.params), pair.pk)
        data["params_id"] = "0" * 64
        with self.assertRaises(ParameterError):
            load_public_key(data, self.params)

    def test_recover_secret(self):
        """Exhaustive search finds exponents reaching the key."""
        pair = keygen(self.params, seed=4)
        v = recover_secret(pair.pk, self.params)
        self.assertIsNotNone(v)
        found = decode(public_key(v, self.params), self.ctx)
        self.assertTrue(is_isomorphic(found, decode(pair.pk, self.ctx)))

    def test_validate_honest_key(self):
        """An honest key passes every check."""
        report = validate(keygen(self.params, seed=5).pk, self.params)
        self.assertTrue(report)
        self.assertEqual(report.checks, {"decode": True, "structure": True, "supersingular": True})
        self.assertTrue(report.to_json()["valid"])

    def test_validate_wrong_sign(self):
        """A key claiming the other sign is rejected."""
        pk = dataclasses.replace(keygen(self.params, seed=6).pk, eps=-1)
        report = validate(pk, self.params)
        self.assertFalse(report)
        self.assertIn(report.failed, ("decode", "structure"))

    def test_fifty_exchanges(self):
        """Fifty independent key pairs all agree."""
        for k in range(50):
            alice = keygen(self.params, seed=1000 + 2 * k)
            bob = keygen(self.params, seed=1001 + 2 * k)
            self.assertEqual(derive(alice.sk, bob.pk, self.params), derive(bob.sk, alice.pk, self.params), k)

    def test_validate_out_of_range_bits(self):
        """Sign and conjugation bits outside {0, 1} fail at decoding."""
        pk = keygen(self.params, seed=5).pk
        for sign_bit, conj_bit in ((2, 0), (-1, 0), (0, 2)):
            report = validate(dataclasses.replace(pk, sign_bit=sign_bit, conj_bit=conj_bit), self.params)
            self.assertFalse(report)
            self.assertEqual(report.failed, "decode")
        data = pk.to_json()
        data["sign_bit"] = 2
        with self.assertRaises(EncodingError):
            StructureEncoding.from_json(data, self.ctx)
        with self.assertRaises(EncodingError):
            decode(dataclasses.replace(pk, conj_bit=2), self.ctx)

    def test_validate_wrong_degree(self):
        """An explicit 3-isogeny offered under d = 1 fails the structure check."""
        S = None
        for u in range(P):
            try:
                S = hasegawa(self.ctx, 3, u)
                break
            except (SingularCurveError, StructureError):
                continue
        pk = dataclasses.replace(encode_explicit(S), d=1)
        report = validate(pk, self.params)
        self.assertFalse(report)
        self.assertEqual(report.failed, "structure")
        with self.assertRaises(ValidationError):
            derive(ExponentVector((3, 5, 7), (1, 0, 0)), pk, self.params)

    def test_validate_non_conjugate_codomain(self):
        """An isogeny that does not land on the conjugate curve is rejected."""
        ctx = self.ctx
        explicit = {
            "a": ctx(1, 1).to_hex(),
            "b": ctx(0).to_hex(),
            "kernel": [ctx.one.to_hex()],
            "alpha": ctx.one.to_hex(),
        }
        report = validate(StructureEncoding("explicit", 1, 1, explicit=explicit), self.params)
        self.assertFalse(report)
        self.assertEqual(report.failed, "structure")
        self.assertEqual(report.checks["decode"], True)

    def test_validate_ordinary_key(self):
        """A structure on an ordinary curve fails the supersingularity check."""
        E = None
        for a in range(1, 50):
            try:
                C = Curve(a, 3, self.ctx)
            except SingularCurveError:
                continue
            if not is_supersingular_oracle(C):
                E = C
                break
        pk = encode_explicit(from_base_curve(E))
        report = validate(pk, self.params)
        self.assertFalse(report)
        self.assertEqual(report.failed, "supersingular")
        with self.assertRaises(ValidationError):
            derive(ExponentVector((3, 5, 7), (1, 0, 0)), pk, self.params)


class TestKeyExchangeDegreeThree(unittest.TestCase):
    """(3, 1)-structures over F_{101^2} with ideals above 2 and 13."""

    @classmethod
    def setUpClass(cls):
        """Set up parameters at p = 101."""
        cls.temp_dir = tempfile.mkdtemp()
        cls.table = ModularPolyTable(cls.temp_dir)
        set_default_table(cls.table)
        cls.params = make_params(101, 3, 1, [2, 13], lambda_sec=2, table=cls.table, rng=random.Random(8))

    @classmethod
    def tearDownClass(cls):
        """Clean up test environment."""
        shutil.rmtree(cls.temp_dir, ignore_errors=True)

    def test_fifty_exchanges(self):
        """Fifty independent key pairs all agree and every key validates."""
        for k in range(50):
            alice = keygen(self.params, seed=2 * k)
            bob = keygen(self.params, seed=2 * k + 1)
            self.assertTrue(validate(bob.pk, self.params), k)
            self.assertEqual(derive(alice.sk, bob.pk, self.params), derive(bob.sk, alice.pk, self.params), k)


class TestWalkTest(unittest.TestCase):
    """The descending 2-walk against point counting."""

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

    def test_supersingular_base(self):
        """y^2 = x^3 + x over F_419 is supersingular, within the isogeny budget."""
        S = from_base_curve(Curve(1, 0, FieldCtx(P)))
        report = supersingularity_walk_test(S)
        self.assertTrue(report)
        self.assertEqual(report.steps, walk_length(P, 1))
        self.assertLessEqual(report.isogenies, two_isogeny_budget(P, 1))

    def test_agrees_with_oracle(self):
        """Over 200 curves at p = 83, 97 and 101, half of them supersingular, match point counting."""
        tested = 0
        for p in (83, 97, 101):
            ctx = FieldCtx(p)
            rng = random.Random(p)
            js = [j.a for j in supersingular_j_invariants(ctx, self.table) if j.in_base()]
            budget = two_isogeny_budget(p, 1)
            curves = []
            for c in range(1, p):
                for j in js:
                    curves.append(_curve_with_j(ctx, j, c))
                if len(curves) >= 34:
                    break
            curves = curves[:34]
            ordinary = 0
            while ordinary < 34:
                try:
                    E = Curve(rng.randrange(p), rng.randrange(p), ctx)
                except SingularCurveError:
                    continue
                if not is_supersingular_oracle(E):
                    curves.append(E)
                    ordinary += 1
            for E in curves:
                report = supersingularity_walk_test(from_base_curve(E))
                self.assertEqual(bool(report), is_supersingular_oracle(E), (p, E.a, E.b))
                self.assertLessEqual(report.isogenies, budget, (p, E.a, E.b))
            self.assertEqual(sum(1 for E in curves if is_supersingular_oracle(E)), 34)
            tested += len(curves)
        self.assertGreaterEqual(tested, 200)


if __name__ == '__main__':
    unittest.main()
