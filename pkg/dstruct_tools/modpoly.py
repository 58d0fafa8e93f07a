"""
Classical modular polynomials.

Phi_m(X, Y) is computed exactly over Z for squarefree levels from the
q-expansion of j, then cached in the data directory as plain text with one
coefficient per line ("m i j c").  Tables downloaded from a public source in
the "[i,j] c" layout (optionally gzip-compressed) are accepted as well.
"""

import gzip
import hashlib
import logging
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import gmpy2
from sympy import factorint

from . import config
from .arith import FieldCtx, Fp2Elem, Poly, poly_powmod
from .exceptions import ModularPolynomialError

logger = logging.getLogger(__name__)

Coefficients = Dict[Tuple[int, int], int]


def is_squarefree(m: int) -> bool:
    return m >= 1 and all(e == 1 for e in factorint(m).values())


def psi_index(m: int) -> int:
    """Degree of Phi_m in each variable: prod (ell + 1) over ell | m."""
    out = 1
    for ell, e in factorint(m).items():
        out *= (ell + 1) * ell ** (e - 1)
    return out


def _series_mul(f: List, g: List, n: int) -> List:
    out = [gmpy2.mpz(0)] * n
    for i, a in enumerate(f[:n]):
        if not a:
            continue
        for k, b in enumerate(g[: n - i]):
            if b:
                out[i + k] += a * b
    return out


def _series_inverse(f: List, n: int) -> List:
    """1/f for f with constant term 1."""
    inv = [gmpy2.mpz(0)] * n
    inv[0] = gmpy2.mpz(1)
    for k in range(1, n):
        acc = gmpy2.mpz(0)
        for i in range(1, min(k, len(f) - 1) + 1):
            acc += f[i] * inv[k - i]
        inv[k] = -acc
    return inv


def j_qexpansion(n: int) -> List[int]:
    """Coefficients of q*j(q) = 1 + 744 q + 196884 q^2 + ..., n terms."""
    sigma3 = [gmpy2.mpz(0)] * n
    for dv in range(1, n):
        for k in range(dv, n, dv):
            sigma3[k] += dv ** 3
    e4 = [gmpy2.mpz(1)] + [240 * s for s in sigma3[1:]]
    # Euler's pentagonal series for prod (1 - q^k)
    eta = [gmpy2.mpz(0)] * n
    k = 0
    while True:
        placed = False
        for g in ((k * (3 * k - 1)) // 2, (k * (3 * k + 1)) // 2):
            if g < n:
                eta[g] = gmpy2.mpz(-1 if k % 2 else 1)
                placed = True
        if not placed:
            break
        k += 1
    e2 = _series_mul(eta, eta, n)
    e4_ = _series_mul(e2, e2, n)
    e8 = _series_mul(e4_, e4_, n)
    delta_q = _series_mul(_series_mul(e8, e8, n), e8, n)
    e4cubed = _series_mul(_series_mul(e4, e4, n), e4, n)
    return [int(c) for c in _series_mul(e4cubed, _series_inverse(delta_q, n), n)]


def _series_power(f: List, e: int, n: int) -> List:
    """First n coefficients of f^e for f with constant term 1 (J.C.P. Miller)."""
    g = [gmpy2.mpz(1)] + [gmpy2.mpz(0)] * (n - 1)
    for m in range(1, n):
        acc = gmpy2.mpz(0)
        for k in range(1, min(m, len(f) - 1) + 1):
            acc += ((e + 1) * k - m) * f[k] * g[m - k]
        g[m] = acc // m
    return g


def compute_modular_polynomial(m: int) -> Coefficients:
    """
    Phi_m over Z for squarefree m.

    The power sums of the roots j((a tau + b)/d), a d = m, are modular
    functions whose polar parts determine them as polynomials in j.  Newton
    identities then give the coefficients of Phi_m(X, j).
    """
    if m == 1:
        return {(1, 0): 1, (0, 1): -1}
    if not is_squarefree(m):
        raise ModularPolynomialError(f"level {m} is not squarefree")
    psi = psi_index(m)
    top = m * psi
    jq = [gmpy2.mpz(c) for c in j_qexpansion(top + 1)]
    logger.info("computing Phi_%d (degree %d, pole order %d)", m, psi, top)

    # powers[i][t]: coefficient of q^(t - i) in j^i, for t = 0..i
    powers: List[List] = [[gmpy2.mpz(1)]]
    for i in range(1, top + 1):
        powers.append(_series_power(jq, i, i + 1))

    pairs = [(a, m // a) for a in range(1, m + 1) if m % a == 0]
    sums: List[List] = [[gmpy2.mpz(psi)]]
    for n in range(1, psi + 1):
        polar = [gmpy2.mpz(0)] * (m * n + 1)  # index e holds the coefficient of q^(-e)
        for a, d in pairs:
            for t in range(-n, 1):
                if t % d == 0:
                    polar[-(a * t) // d] += d * powers[n][t + n]
        poly = [gmpy2.mpz(0)] * (m * n + 1)
        for e in range(m * n, -1, -1):
            c = polar[e]
            if not c:
                continue
            poly[e] = c
            row = powers[e]
            for t in range(e + 1):
                polar[e - t] -= c * row[t]
        sums.append(poly)

    elem: List[List] = [[gmpy2.mpz(1)]]
    for k in range(1, psi + 1):
        acc: List = []
        for i in range(1, k + 1):
            prod = _poly_mul(elem[k - i], sums[i])
            if i % 2 == 0:
                prod = [-c for c in prod]
            acc = _poly_add(acc, prod)
        ek = []
        for c in acc:
            q, r = gmpy2.f_divmod(c, k)
            if r:
                raise ModularPolynomialError(f"non-integral coefficient while computing Phi_{m}")
            ek.append(q)
        while ek and not ek[-1]:
            ek.pop()
        if len(ek) > psi + 1:
            raise ModularPolynomialError(f"Phi_{m} coefficient has degree above {psi}")
        elem.append(ek)

    coeffs: Coefficients = {}
    for k, ek in enumerate(elem):
        sign = -1 if k % 2 else 1
        for jdeg, c in enumerate(ek):
            if c:
                coeffs[(psi - k, jdeg)] = int(sign * c)
    check_modular_polynomial(m, coeffs)
    return coeffs


def _poly_mul(f: List, g: List) -> List:
    if not f or not g:
        return []
    out = [gmpy2.mpz(0)] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for k, b in enumerate(g):
                out[i + k] += a * b
    return out


def _poly_add(f: List, g: List) -> List:
    n = max(len(f), len(g))
    return [(f[i] if i < len(f) else 0) + (g[i] if i < len(g) else 0) for i in range(n)]


def check_modular_polynomial(m: int, coeffs: Coefficients) -> None:
    """Symmetry and degree checks."""
    psi = psi_index(m) if m > 1 else 1
    for (i, j), c in coeffs.items():
        if coeffs.get((j, i), 0) != c:
            raise ModularPolynomialError(f"Phi_{m} is not symmetric at X^{i} Y^{j}")
        if i > psi or j > psi:
            raise ModularPolynomialError(f"Phi_{m} has a term X^{i} Y^{j} above degree {psi}")
    if m > 1 and coeffs.get((psi, 0)) != 1:
        raise ModularPolynomialError(f"Phi_{m} is not monic of degree {psi} in X")


def format_table(m: int, coeffs: Coefficients) -> str:
    lines = [f"{m} {i} {j} {c}" for (i, j), c in sorted(coeffs.items())]
    return "\n".join(lines) + "\n"


def parse_table(text: str, m: Optional[int] = None) -> Coefficients:
    """
    Parse "m i j c" lines or "[i,j] c" lines; missing symmetric entries are mirrored.

    Raises:
        ModularPolynomialError: On malformed lines or a level mismatch
    """
    coeffs: Coefficients = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("["):
                idx, c = line.split("]", 1)
                i, j = (int(v) for v in idx.strip("[ ").split(","))
                c = int(c.strip())
            else:
                level, i, j, c = (int(v) for v in line.split())
                if m is not None and level != m:
                    raise ModularPolynomialError(f"line {lineno}: level {level}, expected {m}")
        except ValueError as e:
            raise ModularPolynomialError(f"line {lineno}: cannot parse {line!r}") from e
        coeffs[(i, j)] = c
    for (i, j), c in list(coeffs.items()):
        coeffs.setdefault((j, i), c)
    return coeffs


class ModularPolyTable:
    """
    Classical modular polynomials by level, loaded lazily.

    Lookup order: memory, the cache directory, then exact computation for
    squarefree levels up to ``modular.max_computed_level``.
    """

    def __init__(self, data_dir: Optional[Path] = None, compute: bool = True):
        """
        Args:
            data_dir: Data directory. If None, the configured default is used
            compute: Whether missing levels may be computed on demand
        """
        self.data_dir = config.data_dir(data_dir)
        self.cache_dir = self.data_dir / config.get("modular.cache_subdir", "modpoly")
        self.compute = compute
        self.max_computed_level = config.get("modular.max_computed_level", 15)
        self._tables: Dict[int, Coefficients] = {1: {(1, 0): 1, (0, 1): -1}}
        self._provenance: Dict[int, Dict] = {1: {"source": "builtin"}}
        self._reduced: Dict[Tuple[int, int], Coefficients] = {}
        self._lock = threading.Lock()

    def cache_path(self, m: int) -> Path:
        return self.cache_dir / f"phi_{m}.txt"

    def _candidate_files(self, m: int) -> Iterable[Path]:
        yield self.cache_path(m)
        yield self.cache_dir / f"phi_{m}.txt.gz"
        yield self.cache_dir / f"phi_j_{m}.txt"
        yield self.cache_dir / f"phi_j_{m}.txt.gz"

    def available(self, m: int) -> bool:
        """True if level m is cached or can be computed."""
        if m in self._tables or any(p.exists() for p in self._candidate_files(m)):
            return True
        return self.compute and is_squarefree(m) and m <= self.max_computed_level

    def get(self, m: int) -> Coefficients:
        """
        Integer coefficients {(i, j): c} of Phi_m.

        Raises:
            ModularPolynomialError: If the level is neither cached nor computable
        """
        with self._lock:
            if m in self._tables:
                return self._tables[m]
            for path in self._candidate_files(m):
                if path.exists():
                    raw = path.read_bytes()
                    if path.suffix == ".gz":
                        raw = gzip.decompress(raw)
                    coeffs = parse_table(raw.decode("ascii"), m)
                    check_modular_polynomial(m, coeffs)
                    self._store(m, coeffs, {"source": str(path), "sha256": hashlib.sha256(raw).hexdigest()})
                    return coeffs
            if not (self.compute and is_squarefree(m) and m <= self.max_computed_level):
                raise ModularPolynomialError(f"Phi_{m} is not tabulated")
            coeffs = compute_modular_polynomial(m)
            text = format_table(m, coeffs)
            try:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
                self.cache_path(m).write_text(text)
            except OSError as e:
                logger.warning("could not cache Phi_%d: %s", m, e)
            self._store(m, coeffs, {"source": "computed", "sha256": hashlib.sha256(text.encode()).hexdigest()})
            return coeffs

    def _store(self, m: int, coeffs: Coefficients, provenance: Dict) -> None:
        self._tables[m] = coeffs
        provenance["terms"] = len(coeffs)
        self._provenance[m] = provenance

    def provenance(self, m: int) -> Dict:
        self.get(m)
        return dict(self._provenance[m])

    def degree(self, m: int) -> int:
        return max(i for i, _ in self.get(m))

    def reduced(self, m: int, p: int) -> Coefficients:
        """Coefficients modulo p, zero terms dropped."""
        key = (m, p)
        if key not in self._reduced:
            self._reduced[key] = {k: c % p for k, c in self.get(m).items() if c % p}
        return self._reduced[key]

    def evaluate(self, m: int, x, y):
        """Phi_m(x, y) for field elements (or integers modulo nothing)."""
        if isinstance(x, Fp2Elem):
            coeffs = self.reduced(m, x.ctx.p)
            zero = x.ctx.zero
        else:
            coeffs = self.get(m)
            zero = 0
        deg = self.degree(m)
        xp = [x ** 0 if not isinstance(x, int) else 1]
        yp = [xp[0]]
        for _ in range(deg):
            xp.append(xp[-1] * x)
            yp.append(yp[-1] * y)
        acc = zero
        for (i, j), c in coeffs.items():
            acc = acc + xp[i] * yp[j] * c
        return acc

    def evaluate_mod(self, m: int, x: int, y: int, p: int) -> int:
        """Phi_m(x, y) mod p for integers."""
        acc = 0
        for (i, j), c in self.get(m).items():
            acc = (acc + c * pow(x, i, p) * pow(y, j, p)) % p
        return acc

    def specialize(self, m: int, j: Fp2Elem) -> Poly:
        """The univariate polynomial Phi_m(j, X) over F_{p^2}."""
        ctx = j.ctx
        deg = self.degree(m)
        jp = [ctx.one]
        for _ in range(deg):
            jp.append(jp[-1] * j)
        coeffs = [ctx.zero] * (deg + 1)
        for (i, k), c in self.reduced(m, ctx.p).items():
            coeffs[k] = coeffs[k] + jp[i] * c
        return Poly(coeffs, ctx)

    def diagonal(self, m: int, ctx: FieldCtx) -> Poly:
        """Phi_m(X, X) over F_{p^2}."""
        deg = self.degree(m)
        coeffs = [ctx.zero] * (2 * deg + 1)
        for (i, k), c in self.reduced(m, ctx.p).items():
            coeffs[i + k] = coeffs[i + k] + c
        return Poly(coeffs, ctx)

    def frobenius_compose(self, m: int, F: Poly) -> Poly:
        """Phi_m(X, X^p) reduced modulo F."""
        ctx = F.field
        x = Poly.x(ctx) % F
        y = poly_powmod(Poly.x(ctx), ctx.p, F)
        deg = self.degree(m)
        xp, yp = [Poly([ctx.one], ctx)], [Poly([ctx.one], ctx)]
        for _ in range(deg):
            xp.append((xp[-1] * x) % F)
            yp.append((yp[-1] * y) % F)
        rows: Dict[int, Poly] = {}
        for (i, k), c in self.reduced(m, ctx.p).items():
            rows[k] = rows.get(k, Poly([], ctx)) + xp[i] * ctx(c)
        acc = Poly([], ctx)
        for k, row in rows.items():
            acc = acc + (row * yp[k]) % F
        return acc % F

    def forget(self, m: int) -> None:
        """Drop level m from memory so the next lookup reads the cache directory again."""
        with self._lock:
            self._tables.pop(m, None)
            self._provenance.pop(m, None)
            for key in [k for k in self._reduced if k[0] == m]:
                del self._reduced[key]

    def clear_cache(self) -> List[Path]:
        removed = []
        if self.cache_dir.exists():
            for path in sorted(self.cache_dir.iterdir()):
                if path.name.startswith("phi_"):
                    path.unlink()
                    removed.append(path)
        self._tables = {1: self._tables[1]}
        self._provenance = {1: self._provenance[1]}
        self._reduced.clear()
        return removed

    def loaded_provenance(self) -> Dict[int, Dict]:
        """Provenance of every level loaded so far, level 1 excluded."""
        with self._lock:
            return {m: dict(v) for m, v in sorted(self._provenance.items()) if m != 1}

    def status(self) -> Dict[int, Dict]:
        """Per configured level: cached / computable flags."""
        out = {}
        for m in config.get("modular.levels", []):
            out[m] = {
                "cached": any(p.exists() for p in self._candidate_files(m)) or m in self._tables,
                "available": self.available(m),
                "degree": psi_index(m),
            }
        return out


_default_table: Optional[ModularPolyTable] = None


def default_table() -> ModularPolyTable:
    global _default_table
    if _default_table is None:
        _default_table = ModularPolyTable()
    return _default_table


def set_default_table(table: ModularPolyTable) -> None:
    global _default_table
    _default_table = table


def modular_neighbors(j: Fp2Elem, ell: int, table: Optional[ModularPolyTable] = None) -> List[Fp2Elem]:
    """
    Roots of Phi_ell(j, X) in F_{p^2}, repeated by multiplicity.

    Raises:
        ModularPolynomialError: If ell is not tabulated
    """
    table = table or default_table()
    if ell == j.ctx.p:
        raise ModularPolynomialError("ell must differ from the characteristic")
    out = []
    for r, mult in table.specialize(ell, j).roots(multiplicity=True):
        out.extend([r] * mult)
    return out
