"""Dense statevector simulation of LWE quantum samples and Fourier-sampling recovery.

A state lives on the register space Z_q^n x Z_q. Amplitudes are stored as
a tensor of shape ``(q,) * n + (q,)``: axes ``0..n-1`` are the input
coordinates a_1..a_n, the last axis is the output register b. Flattened,
this is row-major order with a varying slowest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lwelab.errors import CapacityExceeded, DomainError, UnsupportedModulus
from lwelab.gkp import LatticeCode, Verdict, key_confirmation
from lwelab.lwe import InstanceSet, SecretKey, all_vectors, gen_secret, sample_lwe
from lwelab.ring import (
    DiscreteGaussian,
    Modulus,
    ZqVector,
    as_modulus,
    derive_rng,
    fourier_coefficient,
    make_rng,
    sample_error,
)

MAX_AMPLITUDES = 2**24
NORM_TOL = 1e-10

INPUT = "input"
OUTPUT = "output"


def check_capacity(n: int, q: int):
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    if q ** (n + 1) > MAX_AMPLITUDES:
        raise CapacityExceeded(f"q^(n+1) = {q}^{n + 1} exceeds statevector limit 2^24")


class StateVector:
    """Mutable pure state over Z_q^n x Z_q; operations act in place and return self."""

    def __init__(self, amplitudes, n: int, q):
        q = as_modulus(q)
        check_capacity(n, q.q)
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape((q.q,) * (n + 1))
        self.tensor = amps.copy()
        self.n = n
        self.modulus = q

    @classmethod
    def basis(cls, n: int, q, a, b: int) -> "StateVector":
        q = as_modulus(q)
        check_capacity(n, q.q)
        amps = np.zeros((q.q,) * (n + 1), dtype=np.complex128)
        amps[tuple(a) + (b,)] = 1.0
        return cls(amps, n, q)

    @property
    def q(self) -> int:
        return self.modulus.q

    @property
    def amplitudes(self) -> np.ndarray:
        """Flat view in row-major (a slowest, b fastest) order."""
        return self.tensor.reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.tensor) ** 2)))

    def copy(self) -> "StateVector":
        return StateVector(self.tensor, self.n, self.modulus)

    def _axes(self, register: str) -> tuple:
        if register == INPUT:
            return tuple(range(self.n))
        if register == OUTPUT:
            return (self.n,)
        raise DomainError(f"register must be 'input' or 'output', got {register!r}")

    def qft(self, register: str) -> "StateVector":
        # numpy's ifft uses the +2 pi i kernel: ortho ifft is exactly F_q.
        self.tensor = np.fft.ifftn(self.tensor, axes=self._axes(register), norm="ortho")
        return self

    def inverse_qft(self, register: str) -> "StateVector":
        self.tensor = np.fft.fftn(self.tensor, axes=self._axes(register), norm="ortho")
        return self

    def marginal(self, register: str) -> np.ndarray:
        """Born probabilities of the register's outcomes (flattened row-major)."""
        probs = np.abs(self.tensor) ** 2
        if register == INPUT:
            return probs.sum(axis=self.n).reshape(-1)
        if register == OUTPUT:
            return probs.reshape(-1, self.q).sum(axis=0)
        raise DomainError(f"register must be 'input' or 'output', got {register!r}")

    def measure(self, register: str, seed):
        """Projective measurement; returns the outcome (int for output, tuple for input)."""
        rng = make_rng(seed)
        probs = self.marginal(register)
        cdf = np.cumsum(probs)
        total = cdf[-1]
        idx = int(np.searchsorted(cdf, rng.random() * total, side="right"))
        idx = min(idx, probs.size - 1)
        while probs[idx] == 0.0:
            # Numerical edge; step back to the nearest populated outcome.
            idx -= 1
        if register == OUTPUT:
            mask = np.zeros(self.q, dtype=bool)
            mask[idx] = True
            self.tensor = np.where(mask, self.tensor, 0.0)
            outcome = idx
        else:
            outcome = tuple(int(v) for v in np.unravel_index(idx, (self.q,) * self.n))
            keep = np.zeros((self.q,) * self.n, dtype=bool)
            keep[outcome] = True
            self.tensor = np.where(keep[..., None], self.tensor, 0.0)
        self.tensor /= math.sqrt(probs[idx])
        return outcome


def qft(state: StateVector, register: str) -> StateVector:
    return state.qft(register)


def inverse_qft(state: StateVector, register: str) -> StateVector:
    return state.inverse_qft(register)


def measure_register(state: StateVector, register: str, seed):
    """Measure ``register``; returns (outcome, collapsed state)."""
    outcome = state.measure(register, seed)
    return outcome, state


@dataclass(frozen=True, eq=False)
class ErrorRealization:
    """One error e_a per input vector a, flattened in row-major order of a."""

    e: np.ndarray
    n: int
    q: int

    def __post_init__(self):
        if self.e.shape != (self.q**self.n,):
            raise DomainError(f"need {self.q ** self.n} errors, got shape {self.e.shape}")
        self.e.flags.writeable = False

    def __getitem__(self, a) -> int:
        return int(self.e[np.ravel_multi_index(tuple(a), (self.q,) * self.n)])


def lwe_state(key: SecretKey, errors: ErrorRealization) -> StateVector:
    """Quantum sample q^(-n/2) sum_a |a>|<a, s> + e_a> for a given error realization."""
    n, q = key.n, key.modulus.q
    check_capacity(n, q)
    inputs = all_vectors(n, q)
    b = (inputs @ key.to_array() + errors.e) % q
    amps = np.zeros((q**n, q), dtype=np.complex128)
    amps[np.arange(q**n), b] = q ** (-n / 2)
    return StateVector(amps, n, key.modulus)


def prepare_lwe_state(key: SecretKey, chi: DiscreteGaussian, seed):
    """Fresh quantum sample; returns (state, error realization)."""
    if chi.modulus != key.modulus:
        raise DomainError(f"modulus mismatch: key q={key.modulus.q}, chi q={chi.q}")
    n, q = key.n, chi.q
    check_capacity(n, q)
    errors = ErrorRealization(sample_error(chi, seed, q**n), n, q)
    return lwe_state(key, errors), errors


def _require_odd_prime(q: Modulus):
    if not q.is_odd_prime:
        raise UnsupportedModulus(f"Fourier sampling needs an odd prime modulus, got {q.q}")


def gkz_extract_candidate(state: StateVector, seed):
    """Fourier-sample one candidate secret from a quantum sample.

    QFT the output register and measure y; y = 0 carries no information.
    Otherwise inverse-QFT the input register, measure z and return
    (y, y^-1 z). The state is consumed.
    """
    _require_odd_prime(state.modulus)
    rng = make_rng(seed)
    state.qft(OUTPUT)
    y = state.measure(OUTPUT, rng)
    if y == 0:
        return 0, None
    state.inverse_qft(INPUT)
    z = state.measure(INPUT, rng)
    y_inv = state.modulus.inverse(y)
    return y, SecretKey(ZqVector.of((y_inv * v for v in z), state.modulus))


def fourier_sampling_distribution(state: StateVector) -> np.ndarray:
    """Exact joint law P[y, z] of the two measurements in :func:`gkz_extract_candidate`.

    The two Fourier transforms act on different registers, so measuring y
    first and z afterwards has the same statistics as measuring both at the
    end. ``z`` is flattened row-major. The input state is left untouched.
    """
    work = state.copy().qft(OUTPUT).inverse_qft(INPUT)
    probs = np.abs(work.tensor) ** 2
    return np.moveaxis(probs, -1, 0).reshape(state.q, -1)


def predicted_success_probability(chi: DiscreteGaussian, n: int, y: int) -> float:
    """Expected probability that the input measurement gives z = y s, given outcome y.

    Averaging |q^-n sum_a w^(y e_a)|^2 over i.i.d. errors yields
    |chi_hat(y)|^2 + (1 - |chi_hat(y)|^2) / q^n. The output outcome y is
    uniform whatever the errors, so conditioning on it adds no bias.
    """
    if y % chi.q == 0:
        raise DomainError("y = 0 branch carries no information")
    c2 = abs(fourier_coefficient(chi, int(y) % chi.q)) ** 2
    c2 = min(c2, 1.0)
    return c2 + (1.0 - c2) / chi.q**n


def per_sample_success_probability(chi: DiscreteGaussian, n: int) -> float:
    """Probability that one quantum sample yields the correct candidate (y = 0 counted as a miss)."""
    q = chi.q
    return sum(predicted_success_probability(chi, n, y) for y in range(1, q)) / q


@dataclass(frozen=True)
class TrialRecord:
    y: int
    candidate: Optional[SecretKey]
    confirmed: bool


@dataclass
class AttackReport:
    recovered: Optional[SecretKey]
    samples_consumed: int
    per_trial_log: list = field(default_factory=list)
    confirmation_samples: Optional[InstanceSet] = None

    @property
    def success(self) -> bool:
        return self.recovered is not None

    @property
    def measured_y(self) -> list:
        return [rec.y for rec in self.per_trial_log]


def gkz_attack(
    key: SecretKey,
    chi: DiscreteGaussian,
    max_samples: int,
    confirm_threshold: int,
    seed,
    code: Optional[LatticeCode] = None,
    min_fraction: float = 0.9,
) -> AttackReport:
    """Repeat Fourier sampling on fresh quantum samples until a candidate is confirmed.

    Each candidate is checked against ``confirm_threshold`` fresh classical
    samples by residual-syndrome confirmation. ``key`` only drives the
    sample oracles; it is never consulted by the recovery logic.
    """
    _require_odd_prime(key.modulus)
    check_capacity(key.n, key.modulus.q)
    if max_samples < 0 or confirm_threshold < 1:
        raise DomainError("need max_samples >= 0 and confirm_threshold >= 1")
    code = code or LatticeCode(key.modulus.q)
    rng = make_rng(seed)
    log = []
    for _ in range(max_samples):
        state, _ = prepare_lwe_state(key, chi, rng)
        y, candidate = gkz_extract_candidate(state, rng)
        if candidate is None:
            log.append(TrialRecord(y, None, False))
            continue
        check = sample_lwe(key, chi, confirm_threshold, rng)
        confirmed = key_confirmation(check, candidate, code, min_fraction) is Verdict.ACCEPT
        log.append(TrialRecord(y, candidate, confirmed))
        if confirmed:
            return AttackReport(candidate, len(log), log, check)
    return AttackReport(None, len(log), log)


def _budget_for(consumed: np.ndarray, eta: float, max_samples: int) -> int:
    """Smallest budget B with empirical P(success within B) >= 1 - eta, or -1."""
    need = 1.0 - eta

    def ok(budget):
        return np.mean(consumed <= budget) >= need - 1e-12

    if not ok(max_samples):
        return -1
    lo, hi = 1, max_samples
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def attack_consumption(n: int, chi: DiscreteGaussian, seed: int, trials: int,
                       max_samples: int, confirm_threshold: int) -> np.ndarray:
    """Samples consumed by each seeded attack trial; failed trials map to +inf."""
    out = np.empty(trials)
    for t in range(trials):
        rng = derive_rng(seed, t)
        key = gen_secret(n, chi.modulus, rng)
        rep = gkz_attack(key, chi, max_samples, confirm_threshold, rng)
        out[t] = rep.samples_consumed if rep.recovered == key else np.inf
    return out


def sample_complexity_sweep(
    n_values,
    eta: float,
    chi: DiscreteGaussian,
    seed: int,
    trials: int = 300,
    max_samples: int = 64,
    confirm_threshold: int = 30,
) -> list:
    """Smallest sample budget reaching success rate >= 1 - eta, per dimension n.

    Point i of ``n_values`` uses seed + i. One batch of ``trials`` attacks
    is run per n with a generous cap; since a budget-B attack is the prefix
    of the same seeded run, the budget is found by binary search over the
    recorded consumption. Rows are dicts with n, budget, success_rate and
    mean_samples; budget is -1 when even ``max_samples`` is not enough.
    """
    if not 0 < eta < 1:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    if trials < 1:
        raise DomainError("need at least one trial")
    rows = []
    for i, n in enumerate(n_values):
        consumed = attack_consumption(int(n), chi, seed + i, trials, max_samples, confirm_threshold)
        finite = consumed[np.isfinite(consumed)]
        rows.append({
            "n": int(n),
            "budget": _budget_for(consumed, eta, max_samples),
            "success_rate": float(np.mean(np.isfinite(consumed))),
            "mean_samples": float(finite.mean()) if finite.size else float("nan"),
        })
    return rows


@dataclass(frozen=True)
class SamplingSummary:
    """Single-shot Fourier sampling statistics over seeded trials."""

    trials: int
    informative: int
    successes: int
    predicted: float
    stderr: float

    @property
    def empirical(self) -> float:
        return self.successes / self.informative if self.informative else float("nan")


def fourier_sampling_trials(n: int, chi: DiscreteGaussian, trials: int, seed) -> SamplingSummary:
    """Run one extraction per trial (fresh key and errors) and compare with the prediction.

    Only trials with y != 0 count. ``predicted`` averages the predicted
    success over the observed y; ``stderr`` is the standard error of the
    success fraction under that prediction.
    """
    _require_odd_prime(chi.modulus)
    check_capacity(n, chi.q)
    informative = successes = 0
    var = mean = 0.0
    cache = {}
    for t in range(trials):
        rng = derive_rng(seed, t)
        key = gen_secret(n, chi.modulus, rng)
        state, _ = prepare_lwe_state(key, chi, rng)
        y, candidate = gkz_extract_candidate(state, rng)
        if candidate is None:
            continue
        if y not in cache:
            cache[y] = predicted_success_probability(chi, n, y)
        p = cache[y]
        informative += 1
        successes += candidate == key
        mean += p
        var += p * (1 - p)
    if not informative:
        return SamplingSummary(trials, 0, 0, float("nan"), float("nan"))
    return SamplingSummary(trials, informative, successes, mean / informative,
                           math.sqrt(var) / informative)
