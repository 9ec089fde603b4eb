"""Entropy, capacity and continuity bounds for LWE noise viewed as channel noise.

Every quantity is in bits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from lwelab.errors import CapacityExceeded, DomainError, NumericalFailure
from lwelab.lwe import SecretKey, all_vectors
from lwelab.ring import DiscreteGaussian, as_modulus, make_rng, shannon_entropy

TOL = 1e-10
BOUND_SLACK = 1e-9
ENUMERATION_LIMIT = 10**8
MAX_PAIR_DIM = 2**12


def binary_entropy(p: float) -> float:
    """H(p) in bits, with H(0) = H(1) = 0."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def fano_bound(p_error: float, secret_space_size: int) -> float:
    """Upper bound H(P_e) + P_e log2(|S| - 1) on the residual secret entropy."""
    if secret_space_size < 2:
        raise DomainError(f"secret space needs at least 2 elements, got {secret_space_size}")
    return binary_entropy(p_error) + p_error * math.log2(secret_space_size - 1)


@dataclass(frozen=True)
class BoundReport:
    quantity_name: str
    computed_value: float
    bound_value: float
    satisfied: bool = field(init=False)
    slack: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "slack", self.bound_value - self.computed_value)
        object.__setattr__(self, "satisfied", self.computed_value <= self.bound_value + BOUND_SLACK)

    def to_dict(self) -> dict:
        return asdict(self)


def exact_conditional_entropy(n: int, q, chi: DiscreteGaussian, m: int):
    """Exact H(s | c) and MAP error for a uniform secret and m LWE samples c.

    Enumerates every secret and every tuple of m samples. Returns
    ``(entropy_bits, map_error)``.
    """
    q = as_modulus(q)
    if chi.modulus != q:
        raise DomainError(f"modulus mismatch: q={q.q}, chi q={chi.q}")
    if n < 1 or m < 0:
        raise DomainError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    p = q.q
    size = p ** (n * (m + 1) + m)
    if size > ENUMERATION_LIMIT:
        raise CapacityExceeded(f"joint table of {size} entries exceeds limit {ENUMERATION_LIMIT}")
    n_secrets = p**n
    if m == 0:
        return n * math.log2(p), 1.0 - 1.0 / n_secrets
    vecs = all_vectors(n, p)
    # lik[s, a, b] = chi(b - <a, s>)
    centre = (vecs @ vecs.T) % p
    lik = chi.pmf[(np.arange(p)[None, None, :] - centre[:, :, None]) % p]
    norm = 1.0 / (n_secrets * n_secrets**m)
    a_tuples = np.array(list(itertools.product(range(n_secrets), repeat=m)), dtype=np.int64)
    chunk = max(1, 2_000_000 // (n_secrets * p**m))
    entropy = 0.0
    map_success = 0.0
    for start in range(0, len(a_tuples), chunk):
        idx = a_tuples[start:start + chunk]
        table = lik[:, idx[:, 0], :].transpose(1, 0, 2)
        for i in range(1, m):
            nxt = lik[:, idx[:, i], :].transpose(1, 0, 2)
            table = (table[..., None] * nxt[:, :, None, :]).reshape(len(idx), n_secrets, -1)
        joint = table * norm
        marg = joint.sum(axis=1, keepdims=True)
        mask = joint > 0
        ratio = np.divide(marg, joint, out=np.ones_like(joint), where=mask)
        entropy += float(np.sum(joint * np.log2(ratio)))
        map_success += float(joint.max(axis=1).sum())
    return max(entropy, 0.0), min(max(1.0 - map_success, 0.0), 1.0)


def fano_check(n: int, q, chi: DiscreteGaussian, m: int) -> BoundReport:
    h, p_e = exact_conditional_entropy(n, q, chi, m)
    return BoundReport("fano", h, fano_bound(p_e, as_modulus(q).q ** n))


def additive_channel_matrix(chi: DiscreteGaussian) -> np.ndarray:
    """W[x, y] = P(Y = y | X = x) for Y = X + E mod q, E ~ chi."""
    q = chi.q
    x = np.arange(q)
    return chi.pmf[(x[None, :] - x[:, None]) % q]


def _divergences(w: np.ndarray, p: np.ndarray):
    """Per-input relative entropy D(W(.|x) || pW) in nats, and the output law."""
    out = p @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log(w / out[None, :]), 0.0)
    return terms.sum(axis=1), out


def blahut_arimoto(w: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000, init=None):
    """Capacity (bits) of the channel with transition matrix ``w`` (rows: inputs).

    Stops once max_x D(x) - I, an upper bound on the distance to capacity,
    drops below ``tol`` bits. Returns (capacity, input distribution, iterations).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1) > 1e-9):
        raise DomainError("channel matrix rows must be probability distributions")
    k = w.shape[0]
    p = np.full(k, 1.0 / k) if init is None else np.asarray(init, dtype=float) / np.sum(init)
    trace = []
    for it in range(1, max_iter + 1):
        d, _ = _divergences(w, p)
        lower = float(p @ d)
        gap = (float(d.max()) - lower) / math.log(2)
        trace.append(gap)
        if gap < tol:
            return lower / math.log(2), p, it
        p = p * np.exp(d - d.max())
        p /= p.sum()
    raise NumericalFailure(f"Blahut-Arimoto did not converge in {max_iter} iterations", trace)


@dataclass(frozen=True)
class CapacityResult:
    closed_form: float
    numerical: float
    iterations: int

    @property
    def bits(self) -> float:
        return self.closed_form

    @property
    def discrepancy(self) -> float:
        return abs(self.closed_form - self.numerical)


def additive_channel_capacity(chi: DiscreteGaussian, tol: float = 1e-9, max_iter: int = 10_000,
                              agreement: float = 1e-6, init=None) -> CapacityResult:
    """Capacity of Y = X + E mod q, both as log2 q - H(chi) and by Blahut-Arimoto.

    The numerical path never assumes the uniform input is optimal; its
    stopping rule certifies the result through the max_x D(x) upper bound.
    """
    q = chi.q
    closed = max(math.log2(q) - shannon_entropy(chi.pmf), 0.0)
    numerical, _, iterations = blahut_arimoto(additive_channel_matrix(chi), tol, max_iter, init)
    if abs(closed - numerical) > agreement:
        raise NumericalFailure(f"capacity paths disagree: {closed} vs {numerical}")
    return CapacityResult(closed, numerical, iterations)


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite d x d matrix."""

    def __init__(self, entries, tol: float = TOL):
        mat = np.array(entries, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise DomainError(f"density matrix must be square, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > tol:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > tol:
            raise DomainError(f"density matrix has trace {np.trace(mat).real}")
        mat = (mat + mat.conj().T) / 2
        eig = np.linalg.eigvalsh(mat)
        if eig.min() < -tol:
            raise DomainError(f"density matrix has eigenvalue {eig.min()}")
        mat.flags.writeable = False
        self.entries = mat
        self.eigenvalues = np.clip(eig, 0.0, None)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def diagonal(cls, probs) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=float)))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    lam = rho.eigenvalues[rho.eigenvalues > 0]
    return max(float(-np.sum(lam * np.log2(lam))), 0.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dimension != sigma.dimension:
        raise DomainError(f"dimension mismatch: {rho.dimension} vs {sigma.dimension}")
    diff = rho.entries - sigma.entries
    t = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
    return min(t, 1.0)


def fannes_audenaert_check(rho: DensityMatrix, sigma: DensityMatrix) -> BoundReport:
    """|S(rho) - S(sigma)| against T log2(d - 1) + H(T)."""
    d = rho.dimension
    if d < 2:
        raise DomainError("the continuity bound needs dimension >= 2")
    t = trace_distance(rho, sigma)
    lhs = abs(von_neumann_entropy(rho) - von_neumann_entropy(sigma))
    rhs = t * math.log2(d - 1) + binary_entropy(t)
    return BoundReport("fannes_audenaert", lhs, rhs)


def random_density_matrix(d: int, seed, rank: Optional[int] = None) -> DensityMatrix:
    """Random state G G^dag / tr(G G^dag) with a complex Gaussian d x rank matrix G."""
    rng = make_rng(seed)
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


@dataclass(frozen=True)
class StatePair:
    rho: DensityMatrix
    sigma: DensityMatrix
    mode: str


def lwe_state_pair(n: int, q, chi: DiscreteGaussian, key: Optional[SecretKey] = None,
                   mode: str = "exact") -> StatePair:
    """Noiseless quantum sample rho and its chi-averaged noisy counterpart sigma.

    ``mode="exact"`` averages over independent errors e_a for every a; the
    mixture is computed entrywise, which is exact because distinct a carry
    independent errors. ``mode="shared"`` mixes over one error shared by all a.
    The reference key defaults to (1, ..., 1).
    """
    q = as_modulus(q)
    if chi.modulus != q:
        raise DomainError(f"modulus mismatch: q={q.q}, chi q={chi.q}")
    p = q.q
    dim = p ** (n + 1)
    if dim > MAX_PAIR_DIM:
        raise CapacityExceeded(f"density matrices of dimension {dim} exceed limit {MAX_PAIR_DIM}")
    key = key or SecretKey.of([1] * n, q)
    if key.n != n or key.modulus != q:
        raise DomainError("reference key does not match (n, q)")
    n_in = p**n
    centre = (all_vectors(n, p) @ key.to_array()) % p
    cols = np.arange(p)
    psi0 = np.zeros((n_in, p))
    psi0[np.arange(n_in), centre] = 1.0
    psi0 = psi0.reshape(-1) / math.sqrt(n_in)
    rho = DensityMatrix(np.outer(psi0, psi0))
    if mode == "exact":
        probs = chi.pmf[(cols[None, :] - centre[:, None]) % p]  # (a, b)
        flat = probs.reshape(-1)
        mix = np.outer(flat, flat)
        for a in range(n_in):
            blk = slice(a * p, (a + 1) * p)
            mix[blk, blk] = np.diag(probs[a])
        sigma = DensityMatrix(mix / n_in)
    elif mode == "shared":
        mix = np.zeros((dim, dim))
        for e in range(p):
            if chi.pmf[e] == 0:
                continue
            psi = np.zeros((n_in, p))
            psi[np.arange(n_in), (centre + e) % p] = 1.0
            psi = psi.reshape(-1) / math.sqrt(n_in)
            mix += chi.pmf[e] * np.outer(psi, psi)
        sigma = DensityMatrix(mix)
    else:
        raise DomainError(f"mode must be 'exact' or 'shared', got {mode!r}")
    return StatePair(rho, sigma, mode)
