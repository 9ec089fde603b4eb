"""Arithmetic over Z_q and the discrete Gaussian error distribution."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from lwelab.errors import DomainError

MAX_MODULUS = 2**20
SEED_BOUND = 2**64


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    d = 3
    while d * d <= q:
        if q % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class Modulus:
    """An integer modulus 2 <= q <= 2**20."""

    q: int
    is_prime: bool = field(init=False, repr=False, compare=False)
    is_odd_prime: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.q, bool) or int(self.q) != self.q:
            raise DomainError(f"modulus must be an integer, got {self.q!r}")
        q = int(self.q)
        if q < 2:
            raise DomainError(f"modulus must be >= 2, got {q}")
        if q > MAX_MODULUS:
            raise DomainError(f"modulus {q} exceeds desk-scale limit {MAX_MODULUS}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "is_prime", _is_prime(q))
        object.__setattr__(self, "is_odd_prime", q != 2 and self.is_prime)

    def __int__(self):
        return self.q

    def signed(self, x):
        """Signed representative in (-q/2, q/2] of a canonical residue (or array)."""
        x = np.asarray(x) % self.q
        return np.where(2 * x > self.q, x - self.q, x)

    def inverse(self, x: int) -> int:
        """Multiplicative inverse of x modulo a prime q."""
        if not self.is_prime:
            raise DomainError(f"inverse requires a prime modulus, got {self.q}")
        x %= self.q
        if x == 0:
            raise DomainError("0 has no inverse")
        return pow(x, -1, self.q)


def as_modulus(q) -> Modulus:
    return q if isinstance(q, Modulus) else Modulus(q)


def make_rng(seed) -> np.random.Generator:
    """Generator for a 64-bit seed; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < SEED_BOUND:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.default_rng(int(seed))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for (seed, keys...), e.g. one per trial index."""
    make_rng(seed)
    return np.random.default_rng([int(seed), *map(int, keys)])


@dataclass(frozen=True)
class ZqVector:
    """Vector over Z_q with canonical entries in [0, q)."""

    entries: tuple
    modulus: Modulus

    def __post_init__(self):
        q = self.modulus.q
        entries = tuple(int(e) for e in self.entries)
        if not entries:
            raise DomainError("vector dimension must be >= 1")
        if any(not 0 <= e < q for e in entries):
            raise DomainError(f"entries must lie in [0, {q}): {entries}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, values: Iterable[int], q) -> "ZqVector":
        """Build from arbitrary integers, reducing them mod q."""
        q = as_modulus(q)
        return cls(tuple(int(v) % q.q for v in values), q)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def q(self) -> int:
        return self.modulus.q

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def __add__(self, other: "ZqVector") -> "ZqVector":
        _check_compatible(self, other)
        return ZqVector.of((x + y for x, y in zip(self.entries, other.entries)), self.modulus)

    def __sub__(self, other: "ZqVector") -> "ZqVector":
        _check_compatible(self, other)
        return ZqVector.of((x - y for x, y in zip(self.entries, other.entries)), self.modulus)

    def scale(self, c: int) -> "ZqVector":
        return ZqVector.of((c * x for x in self.entries), self.modulus)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _check_compatible(a: ZqVector, s: ZqVector):
    if a.modulus != s.modulus:
        raise DomainError(f"modulus mismatch: {a.q} vs {s.q}")
    if a.n != s.n:
        raise DomainError(f"dimension mismatch: {a.n} vs {s.n}")


def inner_product(a: ZqVector, s: ZqVector) -> int:
    """<a, s> mod q."""
    _check_compatible(a, s)
    return sum(x * y for x, y in zip(a.entries, s.entries)) % a.q


@dataclass(frozen=True, eq=False)
class DiscreteGaussian:
    """Discrete Gaussian of width ``sigma`` folded onto Z_q.

    ``pmf[x]`` is indexed by canonical residue. Build instances with
    :func:`make_gaussian`.
    """

    sigma: float
    modulus: Modulus
    pmf: np.ndarray

    @property
    def q(self) -> int:
        return self.modulus.q

    @property
    def support_representatives(self) -> np.ndarray:
        return self.modulus.signed(np.arange(self.q))

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c

    def to_json(self) -> str:
        return json.dumps({"q": self.q, "sigma": self.sigma, "pmf": self.pmf.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteGaussian":
        data = json.loads(text)
        pmf = _validated_pmf(data["pmf"])
        q = Modulus(int(data["q"]))
        if pmf.size != q.q:
            raise DomainError(f"pmf has {pmf.size} entries, expected {q.q}")
        return cls(float(data["sigma"]), q, pmf)


def _validated_pmf(pmf: Sequence[float], tol: float = 1e-9) -> np.ndarray:
    p = np.array(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("pmf must be a non-empty 1-d array")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("pmf entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise DomainError(f"pmf sums to {p.sum()!r}, not 1")
    p.flags.writeable = False
    return p


def _folded_weights(sigma: float, q: int) -> np.ndarray:
    x = np.arange(q)
    if sigma < q:
        # Direct sum over r + kq, tails out to 10 sigma, at least one period.
        r = np.where(2 * x > q, x - q, x).astype(float)
        k_max = math.ceil(10 * sigma / q) + 1
        k = np.arange(-k_max, k_max + 1)
        shifted = r[:, None] + q * k[None, :]
        return np.exp(-(shifted**2) / (2 * sigma**2)).sum(axis=1)
    # Wide Gaussians: Poisson-summed (dual) series converges in a few terms.
    j_max = math.ceil(5 * q / (math.pi * sigma)) + 1
    j = np.arange(1, j_max + 1)
    damp = np.exp(-2 * math.pi**2 * sigma**2 * j**2 / q**2)
    phase = np.cos(2 * math.pi * np.outer(x, j) / q)
    return 1.0 + 2.0 * (phase * damp).sum(axis=1)


def make_gaussian(sigma: float, q) -> DiscreteGaussian:
    """Discrete Gaussian pmf[x] proportional to sum over r = x mod q of exp(-r^2 / 2 sigma^2)."""
    q = as_modulus(q)
    sigma = float(sigma)
    if not sigma > 0 or not math.isfinite(sigma):
        raise DomainError(f"sigma must be positive and finite, got {sigma}")
    w = _folded_weights(sigma, q.q)
    pmf = w / w.sum()
    pmf.flags.writeable = False
    return DiscreteGaussian(sigma, q, pmf)


def point_mass(q) -> DiscreteGaussian:
    """Zero-noise limit, usable as a width ``sigma = 1e-6`` Gaussian."""
    return make_gaussian(1e-6, q)


def uniform_distribution(q) -> DiscreteGaussian:
    """Exactly uniform error distribution (infinite-width limit)."""
    q = as_modulus(q)
    pmf = np.full(q.q, 1.0 / q.q)
    pmf.flags.writeable = False
    return DiscreteGaussian(math.inf, q, pmf)


def sample_error(chi: DiscreteGaussian, seed, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. residues from ``chi`` by inverse-CDF lookup."""
    if count < 0:
        raise DomainError(f"count must be non-negative, got {count}")
    rng = make_rng(seed)
    u = rng.random(int(count))
    idx = np.searchsorted(chi.cdf(), u, side="right")
    return np.minimum(idx, chi.q - 1).astype(np.int64)


def fourier_coefficient(chi: DiscreteGaussian, y: int) -> complex:
    """chi_hat(y) = sum_x pmf[x] * exp(2 pi i x y / q)."""
    q = chi.q
    if isinstance(y, bool) or int(y) != y or not 0 <= int(y) < q:
        raise DomainError(f"frequency must lie in [0, {q}), got {y!r}")
    y = int(y)
    if y == 0:
        return complex(1.0, 0.0)
    x = np.arange(q)
    return complex(np.sum(chi.pmf * np.exp(2j * np.pi * ((x * y) % q) / q)))


def fourier_transform(chi: DiscreteGaussian) -> np.ndarray:
    """All q Fourier coefficients of ``chi``."""
    return np.array([fourier_coefficient(chi, y) for y in range(chi.q)])


def shannon_entropy(pmf, base: float = 2) -> float:
    """Shannon entropy with 0 log 0 = 0; ``base`` is 2 (bits) or e (nats)."""
    if base not in (2, math.e):
        raise DomainError(f"base must be 2 or e, got {base}")
    p = _validated_pmf(pmf)
    nz = p[p > 0]
    h = float(-np.sum(nz * np.log(nz)))
    h = max(h, 0.0)
    return h / math.log(2) if base == 2 else h
