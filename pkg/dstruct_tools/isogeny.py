"""
Separable isogenies stored as (kernel polynomial, scaling alpha).

An isogeny is tau_alpha composed with the normalized Velu quotient by the
subgroup whose nonzero x-coordinates are the roots of the kernel polynomial.
Rational maps are derived from the kernel on construction.
"""

import logging
import random
from typing import Iterator, List, Optional

from .arith import FieldCtx, Fp2Elem, Poly, algebra_traces, charpoly_mod, poly_from_power_sums, power_sums
from .curve import Curve, Point, division_polynomials, scalar_mul
from .exceptions import IsogenyError, NotOnCurveError, SingularCurveError
from .modpoly import ModularPolyTable, modular_neighbors

logger = logging.getLogger(__name__)

__all__ = [
    "Isogeny",
    "ModularPolyTable",
    "compose",
    "composite_kernel",
    "conj_isogeny",
    "dual",
    "evaluate",
    "identity",
    "isomorphism",
    "kernel_polynomial_from_point",
    "modular_neighbors",
    "push_kernel",
    "scale_kernel",
    "velu",
    "velu_odd",
    "velu_two",
]


class Isogeny:
    """tau_alpha after the normalized Velu isogeny with the given kernel polynomial."""

    def __init__(self, domain: Curve, kernel: Poly, alpha: Optional[Fp2Elem] = None):
        """
        Args:
            domain: Source curve
            kernel: Monic kernel polynomial over F_{p^2}
            alpha: Post-composed scaling (defaults to 1)
        """
        ctx = domain.ctx
        self.domain = domain
        self.kernel = kernel.monic() if not kernel.is_zero() else kernel
        if self.kernel.is_zero():
            raise IsogenyError("kernel polynomial must be nonzero")
        self.alpha = ctx(alpha) if alpha is not None else ctx.one
        if self.alpha.is_zero():
            raise IsogenyError("scaling factor must be nonzero")
        self._build()

    def _build(self) -> None:
        E = self.domain
        ctx = E.ctx
        a, b = E.a, E.b
        f = E.f_poly()
        fd = f.derivative()
        D = self.kernel
        D2 = D.gcd(f) if D.degree() > 0 else Poly([ctx.one], ctx)
        Dodd = D.exact_div(D2)
        t, n = D2.degree(), Dodd.degree()
        if t == 2:
            raise IsogenyError("kernel polynomial does not define a subgroup")
        s = power_sums(Dodd, 4)
        r = power_sums(D2, 4)
        v = s[2] * 6 + a * 2 * n + r[2] * 3 + a * t
        w = s[3] * 10 + a * s[1] * 6 + b * 4 * n + r[3] * 3 + a * r[1]
        x = Poly.x(ctx)
        Dp = Dodd.derivative()
        R = (fd * Dp * 2) % Dodd
        T = (f * Dp * 4) % Dodd
        N = x * Dodd * Dodd + R * Dodd + T * Dp - T.derivative() * Dodd
        M = Dodd * Dodd
        if t:
            R2 = (fd * D2.derivative()) % D2
            N = N * D2 + R2 * M
            M = M * D2
        self.degree = 1 + t + 2 * n
        self._N, self._M = N, M
        self._Nd, self._Md = N.derivative(), M.derivative()
        u2 = self.alpha * self.alpha
        try:
            self.codomain = Curve(
                (a - v * 5) * u2 * u2,
                (b - w * 7) * u2 * u2 * u2,
                ctx,
                trace=E.trace,
            )
        except SingularCurveError as e:
            raise IsogenyError("kernel polynomial does not define a subgroup") from e

    def __repr__(self) -> str:
        return f"Isogeny(degree={self.degree}, kernel={self.kernel}, alpha={self.alpha})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Isogeny):
            return NotImplemented
        return self.domain == other.domain and self.kernel == other.kernel and self.alpha == other.alpha

    def __hash__(self) -> int:
        return hash((self.domain, self.kernel, self.alpha))

    def key(self):
        return (self.kernel.key(), self.alpha.key())

    def x_map(self):
        """(numerator, denominator) of the x-coordinate map, scaling included."""
        u2 = self.alpha * self.alpha
        return self._N * u2, self._M

    def __call__(self, P: Point) -> Point:
        return evaluate(self, P)

    def negate(self) -> "Isogeny":
        return Isogeny(self.domain, self.kernel, -self.alpha)

    __neg__ = negate

    def scaled(self, u) -> "Isogeny":
        """tau_u after this isogeny."""
        return Isogeny(self.domain, self.kernel, self.alpha * u)

    def to_json(self):
        return {
            "degree": self.degree,
            "kernel": [c.to_hex() for c in self.kernel.coeffs],
            "alpha": self.alpha.to_hex(),
        }


def evaluate(phi: Isogeny, P: Point) -> Point:
    """
    Image of P (over F_{p^2} or a tower).

    Raises:
        NotOnCurveError: If P does not lie on the domain
    """
    if P.curve != phi.domain:
        raise NotOnCurveError("point is not on the isogeny domain")
    if P.is_infinity():
        return phi.codomain.infinity
    if not phi.domain.contains(P):
        raise NotOnCurveError(f"{P} is not on {phi.domain}")
    x0, y0 = P.x, P.y
    m = phi._M(x0)
    if m.is_zero():
        return phi.codomain.infinity
    nv = phi._N(x0)
    X = nv / m
    Xd = (phi._Nd(x0) * m - nv * phi._Md(x0)) / (m * m)
    u = phi.alpha
    u2 = u * u
    return Point(X * u2, y0 * Xd * u2 * u, phi.codomain)


def identity(E: Curve) -> Isogeny:
    return Isogeny(E, Poly([E.ctx.one], E.ctx))


def isomorphism(E: Curve, u) -> Isogeny:
    """tau_u: (x, y) -> (u^2 x, u^3 y) as a degree-1 isogeny."""
    return Isogeny(E, Poly([E.ctx.one], E.ctx), u)


def velu(E: Curve, kernel: Poly, alpha=None) -> Isogeny:
    return Isogeny(E, kernel, alpha)


def point_order(P: Point, bound: int = 10000) -> int:
    R = P
    for n in range(1, bound + 1):
        if R.is_infinity():
            return n
        R = R + P
    raise IsogenyError(f"point order exceeds {bound}")


def kernel_polynomial_from_point(K: Point) -> Poly:
    """Kernel polynomial of <K>, descended to F_{p^2}."""
    E = K.curve
    ctx = E.ctx
    n = point_order(K)
    if n == 1:
        return Poly([ctx.one], ctx)
    field = K.x.field if not isinstance(K.x, Fp2Elem) else ctx
    kernel = Poly([field.one], field)
    R = K
    for _ in range(n // 2):
        kernel = kernel * Poly([-R.x, field.one], field)
        R = R + K
    if field is ctx:
        return kernel
    if not all(c.in_base() for c in kernel.coeffs):
        raise IsogenyError("subgroup is not defined over F_{p^2}")
    return Poly([c.descend() for c in kernel.coeffs], ctx)


def _check_divides_torsion(E: Curve, kernel: Poly, n: int) -> None:
    psi = division_polynomials(E, n)
    torsion = psi[n] if n % 2 else E.f_poly() * psi[n]
    if not (torsion % kernel).is_zero():
        raise IsogenyError(f"kernel polynomial does not divide the {n}-division polynomial")


def velu_odd(E: Curve, kernel) -> Isogeny:
    """
    Normalized isogeny with an odd-order kernel, given by a point or polynomial.

    Raises:
        IsogenyError: If the kernel is not an odd-order subgroup
    """
    if isinstance(kernel, Point):
        n = point_order(kernel)
        if n % 2 == 0:
            raise IsogenyError(f"kernel generator has even order {n}")
        kernel = kernel_polynomial_from_point(kernel)
    if not kernel.gcd(E.f_poly()).degree() == 0:
        raise IsogenyError("odd kernel polynomial has a 2-torsion root")
    n = 2 * kernel.degree() + 1
    _check_divides_torsion(E, kernel.monic(), n)
    return Isogeny(E, kernel)


def velu_two(E: Curve, T: Point) -> Isogeny:
    """
    Normalized 2-isogeny with kernel {O, T}.

    Raises:
        IsogenyError: If T does not have order 2
    """
    if T.is_infinity() or not T.y.is_zero() or not E.contains(T):
        raise IsogenyError("kernel point does not have order 2")
    ctx = E.ctx
    return Isogeny(E, Poly([-T.x.descend(), ctx.one], ctx))


def sample_points(E: Curve, rng: random.Random, count: int = 24) -> Iterator[Point]:
    """Random F_{p^2} points, then points over the quadratic tower."""
    for _ in range(count):
        yield E.random_point(rng)
    if E.ctx.r_max >= 2:
        field = E.ctx.tower(2)
        for _ in range(count):
            yield E.random_point(rng, field)


def scaling_between(target: Point, source: Point):
    """beta with target = tau_beta(source), or None if undetermined here."""
    if target.is_infinity() or source.is_infinity():
        return None
    if source.x.is_zero() or source.y.is_zero() or target.x.is_zero():
        return None
    beta = target.y * source.x / (source.y * target.x)
    if not isinstance(beta, Fp2Elem):
        if not beta.in_base():
            return None
        beta = beta.descend()
    return beta


def _fix_scaling(phi: Isogeny, reference, rng: random.Random) -> Isogeny:
    """Rescale phi so that it agrees pointwise with ``reference``."""
    for P in sample_points(phi.domain, rng):
        beta = scaling_between(reference(P), phi(P))
        if beta is not None:
            return phi.scaled(beta)
    raise IsogenyError("could not determine the scaling factor")


def compose(phi1: Isogeny, phi2: Isogeny, rng: Optional[random.Random] = None) -> Isogeny:
    """
    phi2 after phi1 as a single (kernel, alpha) isogeny.

    Raises:
        IsogenyError: If the codomain of phi1 is not the domain of phi2
    """
    if phi1.codomain != phi2.domain:
        raise IsogenyError("cannot compose: codomain and domain differ")
    ctx = phi1.domain.ctx
    rng = rng or random.Random(0)
    N, M = phi1.x_map()
    c = phi2.kernel.coeffs
    n = len(c) - 1
    mpow = [Poly([ctx.one], ctx)]
    for _ in range(n):
        mpow.append(mpow[-1] * M)
    H = Poly([c[n]], ctx)
    for k in range(n - 1, -1, -1):
        H = H * N + mpow[n - k] * c[k]
    kernel = (phi1.kernel * H.sqfree()).monic()
    normalized = Isogeny(phi1.domain, kernel)
    if normalized.degree != phi1.degree * phi2.degree:
        raise IsogenyError("composite kernel has the wrong size")
    out = _fix_scaling(normalized, lambda P: phi2(phi1(P)), rng)
    if out.codomain != phi2.codomain:
        raise IsogenyError("composite codomain mismatch")
    return out


def scale_kernel(kernel: Poly, u2) -> Poly:
    """Kernel polynomial after (x, y) -> (u2 x, ...): roots multiplied by u2."""
    n = kernel.degree()
    return Poly([c * u2 ** (n - i) for i, c in enumerate(kernel.coeffs)], kernel.field).monic()


def push_kernel(phi: Isogeny, kernel: Poly) -> Poly:
    """
    Kernel polynomial of phi(G) for the subgroup G with the given kernel polynomial.

    G must meet ker(phi) trivially.
    """
    if kernel.degree() <= 0:
        return Poly([phi.domain.ctx.one], phi.domain.ctx)
    N, M = phi.x_map()
    theta = (N * M.inverse_mod(kernel)) % kernel
    return charpoly_mod(theta, kernel).monic()


def composite_kernel(E: Curve, kernels: List[Poly], rng: Optional[random.Random] = None) -> Poly:
    """Kernel polynomial of the sum of subgroups with pairwise coprime orders."""
    if not kernels:
        return Poly([E.ctx.one], E.ctx)
    phi = Isogeny(E, kernels[0])
    for K in kernels[1:]:
        step = Isogeny(phi.codomain, push_kernel(phi, K))
        phi = compose(phi, step, rng)
    return phi.kernel


def conj_isogeny(phi: Isogeny) -> Isogeny:
    """The Galois conjugate isogeny E^(p) -> E'^(p)."""
    return Isogeny(phi.domain.conjugate(), phi.kernel.conj(), phi.alpha.conj())


def _dual_kernel_by_traces(phi: Isogeny, modulus: Poly, n: int) -> Poly:
    ctx = phi.domain.ctx
    count = 1 if n == 2 else (n - 1) // 2
    N, M = phi.x_map()
    theta = (N * M.inverse_mod(modulus)) % modulus
    traces = algebra_traces(theta, modulus, count)
    inv_n = ctx(n).inverse()
    return poly_from_power_sums([t * inv_n for t in traces], ctx)


def dual(phi: Isogeny, rng: Optional[random.Random] = None) -> Isogeny:
    """
    The dual isogeny, with dual(phi) after phi equal to [deg phi].

    Raises:
        IsogenyError: For kernels containing all of E[2]
    """
    rng = rng or random.Random(0)
    E = phi.domain
    ctx = E.ctx
    n = phi.degree
    if n == 1:
        return isomorphism(phi.codomain, phi.alpha.inverse())
    f = E.f_poly()
    D2 = phi.kernel.gcd(f)
    if D2.degree() > 1:
        raise IsogenyError("dual of a non-cyclic isogeny is not supported")
    if n % 2 == 1:
        psi = division_polynomials(E, n)[n].monic()
        kernel = _dual_kernel_by_traces(phi, psi.exact_div(phi.kernel), n)
    elif n == 2:
        kernel = _dual_kernel_by_traces(phi, f.exact_div(phi.kernel), 2)
    else:
        first = Isogeny(E, D2)
        rest = Isogeny(first.codomain, push_kernel(first, phi.kernel.exact_div(D2)))
        u = None
        for P in sample_points(E, rng):
            u = scaling_between(phi(P), rest(first(P)))
            if u is not None:
                break
        if u is None:
            raise IsogenyError("could not relate the split isogeny to the original")
        back = compose(dual(rest, rng), dual(first, rng), rng)
        kernel = scale_kernel(back.kernel, u * u)
    normalized = Isogeny(phi.codomain, kernel)
    out = _fix_scaling_for_dual(normalized, phi, rng)
    if out.codomain != E:
        raise IsogenyError("dual codomain does not match the domain")
    return out


def _fix_scaling_for_dual(psi: Isogeny, phi: Isogeny, rng: random.Random) -> Isogeny:
    n = phi.degree
    for P in sample_points(phi.domain, rng):
        beta = scaling_between(scalar_mul(n, P), psi(phi(P)))
        if beta is not None:
            return psi.scaled(beta)
    raise IsogenyError("could not normalize the dual isogeny")


def points_agree(phi, psi, points: List[Point]) -> bool:
    """Pointwise equality of two maps on the given points."""
    return all(phi(P) == psi(P) for P in points)
