"""LWE residuals treated as lattice displacement errors.

A residual b - <a, s'> mod q is read as a displacement from the nearest
lattice point (a multiple of q). Displacements within the correctable
radius are absorbed; larger ones are logical errors. Repetition with a
majority vote stands in for code concatenation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from lwelab.errors import DomainError
from lwelab.lwe import InstanceSet, SecretKey
from lwelab.ring import DiscreteGaussian, as_modulus, make_rng, sample_error


@dataclass(frozen=True)
class LatticeCode:
    """Decoder for residues mod q with signed representatives in (-q/2, q/2]."""

    q: int
    correctable_radius: Optional[float] = None

    def __post_init__(self):
        q = as_modulus(self.q).q
        object.__setattr__(self, "q", q)
        radius = q / 4 if self.correctable_radius is None else float(self.correctable_radius)
        if not 0 < radius <= q / 2:
            raise DomainError(f"correctable radius must lie in (0, q/2], got {radius}")
        object.__setattr__(self, "correctable_radius", radius)

    def signed(self, value):
        v = np.asarray(value) % self.q
        return np.where(2 * v > self.q, v - self.q, v)

    def within(self, residual):
        return np.abs(residual) <= self.correctable_radius


@dataclass(frozen=True)
class SyndromeRecord:
    residual: int
    within_radius: bool
    index: int = 0


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of decoding one residue; ``corrected`` is None on a logical error."""

    syndrome: SyndromeRecord

    @property
    def logical_error(self) -> bool:
        return not self.syndrome.within_radius

    @property
    def corrected(self) -> Optional[int]:
        return None if self.logical_error else 0


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


def decode_displacement(code: LatticeCode, value: int, index: int = 0) -> DecodeResult:
    if isinstance(value, bool) or int(value) != value or not 0 <= int(value) < code.q:
        raise DomainError(f"value must be a residue in [0, {code.q}), got {value!r}")
    r = int(code.signed(int(value)))
    return DecodeResult(SyndromeRecord(r, bool(code.within(r)), index))


def _check_modulus(code: LatticeCode, q: int):
    if code.q != q:
        raise DomainError(f"modulus mismatch: code q={code.q}, other q={q}")


def logical_error_probability(code: LatticeCode, chi: DiscreteGaussian) -> float:
    """Exact mass of chi on residues that decode to a neighbouring lattice point."""
    _check_modulus(code, chi.q)
    outside = ~code.within(code.signed(np.arange(code.q)))
    return float(np.sum(chi.pmf[outside]))


def logical_error_monte_carlo(code: LatticeCode, chi: DiscreteGaussian, trials: int, seed):
    """Empirical logical-error rate over ``trials`` draws; returns (rate, standard error)."""
    _check_modulus(code, chi.q)
    e = sample_error(chi, seed, trials)
    hits = ~code.within(code.signed(e))
    p = float(hits.mean())
    return p, math.sqrt(p * (1 - p) / trials)


def majority_failure(p: float, m: int) -> float:
    """P(more than half of m independent trials fail), each failing w.p. p."""
    if m < 1 or m % 2 == 0:
        raise DomainError(f"repetition count must be odd and >= 1, got {m}")
    return math.fsum(math.comb(m, k) * p**k * (1 - p) ** (m - k) for k in range(m // 2 + 1, m + 1))


def concatenated_error_rate(code: LatticeCode, chi: DiscreteGaussian, m: int) -> float:
    """Logical error rate after a majority vote over m independent decodings."""
    return majority_failure(logical_error_probability(code, chi), m)


def concatenated_monte_carlo(code: LatticeCode, chi: DiscreteGaussian, m: int, trials: int, seed):
    """Simulated majority-vote failure rate; returns (rate, standard error)."""
    _check_modulus(code, chi.q)
    if m < 1 or m % 2 == 0:
        raise DomainError(f"repetition count must be odd and >= 1, got {m}")
    rng = make_rng(seed)
    fails = np.zeros(trials, dtype=np.int64)
    for _ in range(m):
        fails += ~code.within(code.signed(sample_error(chi, rng, trials)))
    rate = float(np.mean(fails > m // 2))
    return rate, math.sqrt(rate * (1 - rate) / trials)


def residuals(samples: InstanceSet, candidate: SecretKey, code: LatticeCode) -> np.ndarray:
    """Signed residuals b_i - <a_i, candidate> for every sample, as an array."""
    _check_modulus(code, samples.q)
    if candidate.modulus.q != samples.q or candidate.n != samples.n:
        raise DomainError("candidate does not match the sample parameters")
    return code.signed(samples.b - samples.a @ candidate.to_array())


def lwe_residual_syndromes(samples: InstanceSet, candidate: SecretKey, code: LatticeCode) -> list:
    r = residuals(samples, candidate, code)
    flags = code.within(r)
    return [SyndromeRecord(int(v), bool(f), i) for i, (v, f) in enumerate(zip(r, flags))]


def key_confirmation(samples: InstanceSet, candidate: SecretKey, code: LatticeCode,
                     min_fraction: float = 0.9) -> Verdict:
    """ACCEPT iff at least ``min_fraction`` of the residual syndromes are correctable."""
    if samples.m == 0:
        raise DomainError("key confirmation needs at least one sample")
    frac = float(np.mean(code.within(residuals(samples, candidate, code))))
    return Verdict.ACCEPT if frac >= min_fraction else Verdict.REJECT
