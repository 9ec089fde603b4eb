"""Classical LWE: instance generation, noiseless solving and exhaustive search."""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from lwelab.errors import (
    CapacityExceeded,
    DomainError,
    InsufficientRank,
    UnsupportedModulus,
    VerifyFail,
)
from lwelab.ring import (
    DiscreteGaussian,
    Modulus,
    ZqVector,
    as_modulus,
    make_rng,
    sample_error,
)

BRUTE_FORCE_LIMIT = 10**7


@dataclass(frozen=True)
class SecretKey:
    s: ZqVector

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def modulus(self) -> Modulus:
        return self.s.modulus

    def to_array(self) -> np.ndarray:
        return self.s.to_array()

    @classmethod
    def of(cls, values, q) -> "SecretKey":
        return cls(ZqVector.of(values, q))


@dataclass(frozen=True)
class LweSample:
    a: ZqVector
    b: int
    ground_truth_error: Optional[int] = None


class Provenance(enum.Enum):
    LWE = "lwe"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class InstanceSet:
    """m samples stored column-wise: ``a`` is (m, n), ``b`` and ``errors`` are (m,).

    ``errors`` (and ``key``) are only present for locally generated LWE
    instances and never appear in the public JSON view.
    """

    a: np.ndarray
    b: np.ndarray
    modulus: Modulus
    sigma: Optional[float]
    provenance: Provenance
    errors: Optional[np.ndarray] = None
    key: Optional[SecretKey] = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.int64)
        if a.ndim != 2 or b.shape != (a.shape[0],):
            raise DomainError(f"inconsistent sample shapes {a.shape} and {b.shape}")
        q = self.modulus.q
        if a.size and (a.min() < 0 or a.max() >= q) or b.size and (b.min() < 0 or b.max() >= q):
            raise DomainError("sample entries must be canonical residues")
        for arr in (a, b):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.errors is not None:
            e = np.asarray(self.errors, dtype=np.int64)
            e.flags.writeable = False
            object.__setattr__(self, "errors", e)

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def q(self) -> int:
        return self.modulus.q

    @property
    def m(self) -> int:
        return self.a.shape[0]

    def __len__(self):
        return self.m

    @property
    def samples(self) -> list:
        out = []
        for i in range(self.m):
            e = None if self.errors is None else int(self.errors[i])
            out.append(LweSample(ZqVector(tuple(self.a[i]), self.modulus), int(self.b[i]), e))
        return out

    def subset(self, idx) -> "InstanceSet":
        idx = np.asarray(idx, dtype=np.int64)
        errors = None if self.errors is None else self.errors[idx]
        return InstanceSet(self.a[idx], self.b[idx], self.modulus, self.sigma,
                           self.provenance, errors, self.key)

    def public_dict(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "sigma": self.sigma,
            "provenance": self.provenance.value,
            "samples": [{"a": row.tolist(), "b": int(b)} for row, b in zip(self.a, self.b)],
        }

    def secret_dict(self) -> dict:
        return {
            "s": None if self.key is None else list(self.key.s.entries),
            "errors": None if self.errors is None else self.errors.tolist(),
        }

    def save(self, path) -> Path:
        """Write the public view to ``path`` and the ground truth to ``<stem>_secret.json``."""
        from lwelab.harness import atomic_write_text

        path = Path(path)
        atomic_write_text(path, json.dumps(self.public_dict()) + "\n")
        secret_path = secret_sidecar_path(path)
        if self.errors is not None or self.key is not None:
            atomic_write_text(secret_path, json.dumps(self.secret_dict()) + "\n")
        return secret_path

    @classmethod
    def from_dict(cls, data: dict, secret: Optional[dict] = None) -> "InstanceSet":
        q = Modulus(int(data["q"]))
        n = int(data["n"])
        a = np.array([s["a"] for s in data["samples"]], dtype=np.int64).reshape(-1, n)
        b = np.array([s["b"] for s in data["samples"]], dtype=np.int64)
        errors = key = None
        if secret:
            if secret.get("errors") is not None:
                errors = np.array(secret["errors"], dtype=np.int64)
            if secret.get("s") is not None:
                key = SecretKey.of(secret["s"], q)
        sigma = data.get("sigma")
        return cls(a, b, q, None if sigma is None else float(sigma),
                   Provenance(data["provenance"]), errors, key)

    @classmethod
    def load(cls, path) -> "InstanceSet":
        path = Path(path)
        secret_path = secret_sidecar_path(path)
        secret = json.loads(secret_path.read_text()) if secret_path.exists() else None
        return cls.from_dict(json.loads(path.read_text()), secret)


def secret_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_secret{path.suffix or '.json'}")


def gen_secret(n: int, q, seed) -> SecretKey:
    """Uniform secret in Z_q^n."""
    q = as_modulus(q)
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    rng = make_rng(seed)
    return SecretKey(ZqVector(tuple(rng.integers(0, q.q, size=n)), q))


def sample_lwe(key: SecretKey, chi: DiscreteGaussian, m: int, seed) -> InstanceSet:
    """m samples (a, <a, s> + e mod q) with uniform a and e drawn from chi."""
    if chi.modulus != key.modulus:
        raise DomainError(f"modulus mismatch: key q={key.modulus.q}, chi q={chi.q}")
    if m < 0:
        raise DomainError(f"sample count must be non-negative, got {m}")
    rng = make_rng(seed)
    q = chi.q
    a = rng.integers(0, q, size=(m, key.n), dtype=np.int64)
    e = sample_error(chi, rng, m)
    b = (a @ key.to_array() + e) % q
    return InstanceSet(a, b, key.modulus, chi.sigma, Provenance.LWE, e, key)


def sample_uniform(n: int, q, m: int, seed) -> InstanceSet:
    """m pairs uniform over Z_q^n x Z_q."""
    q = as_modulus(q)
    if n < 1 or m < 0:
        raise DomainError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    rng = make_rng(seed)
    a = rng.integers(0, q.q, size=(m, n), dtype=np.int64)
    b = rng.integers(0, q.q, size=m, dtype=np.int64)
    return InstanceSet(a, b, q, None, Provenance.UNIFORM)


def solve_noiseless(samples: InstanceSet) -> SecretKey:
    """Recover s from error-free samples by Gaussian elimination over the field Z_q.

    Raises VerifyFail when the system is inconsistent (noise present) and
    InsufficientRank when the samples do not determine s.
    """
    q = samples.modulus
    if not q.is_prime:
        raise UnsupportedModulus(f"Gaussian elimination needs a prime modulus, got {q.q}")
    p = q.q
    n = samples.n
    aug = np.concatenate([samples.a, samples.b[:, None]], axis=1).astype(object) % p
    rows = aug.shape[0]
    pivots = []
    r = 0
    for col in range(n):
        pivot = next((i for i in range(r, rows) if aug[i, col] % p), None)
        if pivot is None:
            continue
        aug[[r, pivot]] = aug[[pivot, r]]
        aug[r] = (aug[r] * pow(int(aug[r, col]), -1, p)) % p
        for i in range(rows):
            if i != r and aug[i, col]:
                aug[i] = (aug[i] - aug[i, col] * aug[r]) % p
        pivots.append(col)
        r += 1
        if r == rows:
            break
    if any(aug[i, n] for i in range(r, rows)):
        raise VerifyFail("samples are inconsistent with any noiseless secret")
    if r < n:
        raise InsufficientRank(f"sample matrix has rank {r} < n = {n}")
    s = SecretKey(ZqVector(tuple(int(aug[i, n]) for i in range(n)), q))
    if np.any((samples.a @ s.to_array()) % p != samples.b):
        raise VerifyFail("recovered secret does not reproduce every sample")
    return s


def all_vectors(n: int, q: int) -> np.ndarray:
    """Every vector of Z_q^n as rows, in lexicographic (row-major) order."""
    grids = np.indices((q,) * n).reshape(n, -1).T
    return grids.astype(np.int64)


def log_likelihoods(samples: InstanceSet, chi: DiscreteGaussian, candidates: np.ndarray) -> np.ndarray:
    """Total log-likelihood of the samples under each candidate secret (rows).

    Computed from residual histograms so that candidates with the same
    residual multiset score bitwise-identically.
    """
    q = chi.q
    with np.errstate(divide="ignore"):
        logp = np.log(chi.pmf)
    finite = np.where(np.isfinite(logp), logp, 0.0)
    impossible = ~np.isfinite(logp)
    out = np.empty(len(candidates))
    m = samples.m
    if m == 0:
        out[:] = 0.0
        return out
    chunk = max(1, 4_000_000 // max(m, q))
    for start in range(0, len(candidates), chunk):
        cand = candidates[start:start + chunk]
        res = (samples.b[None, :] - cand @ samples.a.T) % q
        rows = np.arange(len(cand))[:, None]
        counts = np.bincount((rows * q + res).ravel(), minlength=len(cand) * q).reshape(len(cand), q)
        ll = counts @ finite
        ll[(counts[:, impossible] > 0).any(axis=1)] = -np.inf
        out[start:start + chunk] = ll
    return out


def brute_force_search(samples: InstanceSet, chi: DiscreteGaussian) -> SecretKey:
    """Maximum-likelihood secret over all of Z_q^n; ties go to the lexicographically first."""
    if chi.modulus != samples.modulus:
        raise DomainError(f"modulus mismatch: samples q={samples.q}, chi q={chi.q}")
    q, n = samples.q, samples.n
    if q**n > BRUTE_FORCE_LIMIT:
        raise CapacityExceeded(f"q^n = {q}^{n} exceeds exhaustive-search limit {BRUTE_FORCE_LIMIT}")
    candidates = all_vectors(n, q)
    best = int(np.argmax(log_likelihoods(samples, chi, candidates)))
    return SecretKey(ZqVector(tuple(candidates[best]), samples.modulus))


def decision_statistical_distance(chi: DiscreteGaussian) -> float:
    """Total-variation distance between one LWE sample and a uniform pair.

    For uniform a the joint law of (a, b) is q^-n * chi(b - <a, s>), so the
    distance reduces to TV(chi, uniform on Z_q).
    """
    return 0.5 * float(np.sum(np.abs(chi.pmf - 1.0 / chi.q)))


def joint_statistical_distance(key: SecretKey, chi: DiscreteGaussian) -> float:
    """Same distance by enumerating the full joint law of (a, b); tiny n, q only."""
    q, n = chi.q, key.n
    if q ** (n + 1) > 10**6:
        raise CapacityExceeded("joint enumeration too large")
    s = key.to_array()
    total = 0.0
    for a in itertools.product(range(q), repeat=n):
        centre = int(np.dot(a, s)) % q
        for b in range(q):
            p = chi.pmf[(b - centre) % q] / q**n
            total += abs(p - 1.0 / q ** (n + 1))
    return 0.5 * total


def ml_failure_probability(key: SecretKey, chi: DiscreteGaussian, m: int) -> float:
    """Exact probability that ML search over m samples misses ``key`` (tiny sizes).

    Enumerates every sample tuple; exact ties count as success only when
    the key is the lexicographic winner.
    """
    q, n = chi.q, key.n
    cells = q ** (n + 1)
    if cells**m > 2 * 10**6:
        raise CapacityExceeded("sample-tuple enumeration too large")
    cands = all_vectors(n, q)
    pairs = [(a, b) for a in itertools.product(range(q), repeat=n) for b in range(q)]
    s = key.to_array()
    fail = 0.0
    for tup in itertools.product(pairs, repeat=m):
        a = np.array([t[0] for t in tup], dtype=np.int64).reshape(m, n)
        b = np.array([t[1] for t in tup], dtype=np.int64)
        e = (b - a @ s) % q
        prob = math.prod(chi.pmf[e]) / q**(n * m)
        if prob == 0.0:
            continue
        inst = InstanceSet(a, b, key.modulus, chi.sigma, Provenance.LWE)
        best = int(np.argmax(log_likelihoods(inst, chi, cands)))
        if tuple(cands[best]) != key.s.entries:
            fail += prob
    return fail
