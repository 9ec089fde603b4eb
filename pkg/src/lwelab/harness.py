"""Experiment configuration, dispatch and reproducible output writing."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from lwelab import __version__
from lwelab.bounds import (
    MAX_PAIR_DIM,
    additive_channel_capacity,
    exact_conditional_entropy,
    fannes_audenaert_check,
    fano_bound,
    BoundReport,
    lwe_state_pair,
)
from lwelab.errors import CapacityExceeded, UsageError
from lwelab.gkp import (
    LatticeCode,
    concatenated_error_rate,
    concatenated_monte_carlo,
    logical_error_probability,
)
from lwelab.lwe import (
    BRUTE_FORCE_LIMIT,
    brute_force_search,
    decision_statistical_distance,
    gen_secret,
    sample_lwe,
)
from lwelab.quantum import (
    check_capacity,
    fourier_sampling_trials,
    gkz_attack,
    predicted_success_probability,
    prepare_lwe_state,
    sample_complexity_sweep,
)
from lwelab.ring import (
    MAX_MODULUS,
    SEED_BOUND,
    Modulus,
    derive_rng,
    make_gaussian,
    make_rng,
    shannon_entropy,
)

KINDS = ("gen", "attack-classical", "attack-quantum", "bounds", "gkp", "sweep")
SWEEP_TARGETS = ("quantum-success", "capacity", "gkp", "complexity")
RANGEABLE = ("n", "q", "sigma", "m", "radius", "eta")
DEFAULT_OUT = {
    "gen": "samples.json",
    "attack-classical": "classical.csv",
    "attack-quantum": "report.csv",
    "bounds": "bounds.json",
    "gkp": "gkp.csv",
    "sweep": "sweep.csv",
}


def format_real(x) -> str:
    """17 significant digits, '.' separator: round-trips every double."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_real(row[c]) for c in columns])
    return buf.getvalue()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_table(path, columns, rows, fmt: str):
    if fmt == "json":
        text = json.dumps(_json_safe([{c: r[c] for c in columns} for r in rows]), indent=1) + "\n"
    else:
        text = rows_to_csv(columns, rows)
    atomic_write_text(path, text)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. In a sweep exactly one parameter in RANGEABLE is a tuple."""

    kind: str
    n: object = 2
    q: object = 5
    sigma: object = 1.0
    m: object = 10
    radius: object = None
    trials: int = 100
    eta: object = 0.1
    seed: int = 0
    out: Optional[str] = None
    fmt: str = "csv"
    max_samples: int = 32
    confirm: int = 30
    min_fraction: float = 0.9
    m_list: tuple = (1, 3, 5, 7, 9)
    target: Optional[str] = None
    dump_state: Optional[str] = None
    jobs: int = 1

    @property
    def out_path(self) -> Path:
        return Path(self.out or DEFAULT_OUT[self.kind])

    def ranged(self) -> list:
        return [name for name in RANGEABLE if isinstance(getattr(self, name), (tuple, list))]

    def at(self, name: str, value) -> "ExperimentConfig":
        return replace(self, **{name: value})

    def echo(self) -> dict:
        d = asdict(self)
        d["out"] = str(self.out_path)
        return _json_safe(d)

    def validate(self):
        """Check the parameter block against the target operation's preconditions."""
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}", "kind")
        if self.fmt not in ("csv", "json"):
            raise UsageError("format must be csv or json", "format")
        if not isinstance(self.seed, int) or not 0 <= self.seed < SEED_BOUND:
            raise UsageError("seed must be an unsigned 64-bit integer", "seed")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1", "jobs")
        ranged = self.ranged()
        if self.kind == "sweep":
            if self.target not in SWEEP_TARGETS:
                raise UsageError(f"sweep target must be one of {SWEEP_TARGETS}", "target")
            if len(ranged) != 1:
                raise UsageError(f"a sweep needs exactly one ranged parameter, got {ranged or 'none'}",
                                 ",".join(ranged) or None)
            name = ranged[0]
            values = getattr(self, name)
            if not values:
                raise UsageError("ranged parameter has no values", name)
            for v in values:
                self.at(name, v).at("kind", "sweep")._validate_point()
            return
        if ranged:
            raise UsageError(f"only sweeps accept ranged parameters, got {ranged}", ranged[0])
        self._validate_point()

    def _validate_point(self):
        kind = self.kind if self.kind != "sweep" else self.target
        n, q, sigma = self.n, self.q, self.sigma
        if not isinstance(n, int) or n < 1:
            raise UsageError("n must be an integer >= 1", "n")
        if not isinstance(q, int) or not 2 <= q <= MAX_MODULUS:
            raise UsageError(f"q must be an integer in [2, {MAX_MODULUS}]", "q")
        if not isinstance(sigma, (int, float)) or not sigma > 0 or not math.isfinite(sigma):
            raise UsageError("sigma must be a positive real", "sigma")
        if not isinstance(self.m, int) or self.m < 0:
            raise UsageError("m must be an integer >= 0", "m")
        if self.trials < 1:
            raise UsageError("trials must be >= 1", "trials")
        if self.radius is not None and not 0 < self.radius <= q / 2:
            raise UsageError("radius must lie in (0, q/2]", "radius")
        if kind == "gen" and self.m < 1:
            raise UsageError("gen needs m >= 1", "m")
        if kind == "attack-classical" and q**n > BRUTE_FORCE_LIMIT:
            raise CapacityExceeded(f"q^n = {q}^{n} exceeds exhaustive-search limit {BRUTE_FORCE_LIMIT}")
        if kind in ("attack-quantum", "quantum-success", "complexity"):
            if not Modulus(q).is_odd_prime:
                raise UsageError("quantum experiments need an odd prime q", "q")
            check_capacity(n, q)
            if self.max_samples < 0:
                raise UsageError("max-samples must be >= 0", "max_samples")
            if self.confirm < 1:
                raise UsageError("confirm must be >= 1", "confirm")
            if not 0 <= self.min_fraction <= 1:
                raise UsageError("min-fraction must lie in [0, 1]", "min_fraction")
        if kind == "complexity" and not (isinstance(self.eta, (int, float)) and 0 < self.eta < 1):
            raise UsageError("eta must lie in (0, 1)", "eta")
        if kind == "gkp" and self.kind == "gkp":
            if not self.m_list or any(not isinstance(v, int) or v < 1 or v % 2 == 0 for v in self.m_list):
                raise UsageError("m-list must hold odd integers >= 1", "m_list")
        if kind == "gkp" and self.kind == "sweep" and (self.m < 1 or self.m % 2 == 0):
            raise UsageError("m must be odd and >= 1 for the gkp target", "m")


@dataclass
class RunManifest:
    config: dict
    version: str
    seed: int
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_json_safe(asdict(self)), indent=1, sort_keys=True) + "\n"


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _code(cfg: ExperimentConfig) -> LatticeCode:
    return LatticeCode(cfg.q, cfg.radius)


def _run_gen(cfg):
    rng = make_rng(cfg.seed)
    chi = make_gaussian(cfg.sigma, cfg.q)
    key = gen_secret(cfg.n, chi.modulus, rng)
    inst = sample_lwe(key, chi, cfg.m, rng)
    secret = inst.save(cfg.out_path)
    return [str(cfg.out_path), str(secret)], {"samples": inst.m}


def _run_attack_classical(cfg):
    chi = make_gaussian(cfg.sigma, cfg.q)
    rows = []
    for t in range(cfg.trials):
        rng = derive_rng(cfg.seed, t)
        key = gen_secret(cfg.n, chi.modulus, rng)
        inst = sample_lwe(key, chi, cfg.m, rng)
        rows.append({"trial": t, "success": int(brute_force_search(inst, chi) == key)})
    write_table(cfg.out_path, ["trial", "success"], rows, cfg.fmt)
    wins = sum(r["success"] for r in rows)
    return [str(cfg.out_path)], {"trials": cfg.trials, "successes": wins}


def _dump_state(cfg, chi):
    rng = derive_rng(cfg.seed, 0, 1)
    key = gen_secret(cfg.n, chi.modulus, rng)
    state, _ = prepare_lwe_state(key, chi, rng)
    amps = state.amplitudes
    rows = [{"index": i, "re": float(v.real), "im": float(v.imag)} for i, v in enumerate(amps)]
    write_table(cfg.dump_state, ["index", "re", "im"], rows, "csv")
    return str(cfg.dump_state)


def _run_attack_quantum(cfg):
    chi = make_gaussian(cfg.sigma, cfg.q)
    code = _code(cfg)
    rows = []
    for t in range(cfg.trials):
        rng = derive_rng(cfg.seed, t)
        key = gen_secret(cfg.n, chi.modulus, rng)
        rep = gkz_attack(key, chi, cfg.max_samples, cfg.confirm, rng, code, cfg.min_fraction)
        rows.append({
            "trial": t,
            "samples_consumed": rep.samples_consumed,
            "success": int(rep.recovered == key),
            "measured_y_sequence": ";".join(map(str, rep.measured_y)),
        })
    columns = ["trial", "samples_consumed", "success", "measured_y_sequence"]
    write_table(cfg.out_path, columns, rows, cfg.fmt)
    outputs = [str(cfg.out_path)]
    if cfg.dump_state:
        outputs.append(_dump_state(cfg, chi))
    wins = sum(r["success"] for r in rows)
    return outputs, {"trials": cfg.trials, "successes": wins}


def _run_bounds(cfg):
    chi = make_gaussian(cfg.sigma, cfg.q)
    q_n = cfg.q**cfg.n
    h, p_e = exact_conditional_entropy(cfg.n, cfg.q, chi, cfg.m)
    reports = [BoundReport("fano", h, fano_bound(p_e, q_n))]
    if cfg.q ** (cfg.n + 1) <= MAX_PAIR_DIM:
        pair = lwe_state_pair(cfg.n, cfg.q, chi)
        reports.append(fannes_audenaert_check(pair.rho, pair.sigma))
    cap = additive_channel_capacity(chi)
    result = {
        "n": cfg.n,
        "q": cfg.q,
        "sigma": cfg.sigma,
        "m": cfg.m,
        "reports": [r.to_dict() for r in reports],
        "conditional_entropy_bits": h,
        "map_error": p_e,
        "noise_entropy_bits": shannon_entropy(chi.pmf),
        "capacity_bits": cap.closed_form,
        "capacity_numerical_bits": cap.numerical,
        "capacity_iterations": cap.iterations,
        "decision_tv_distance": decision_statistical_distance(chi),
    }
    atomic_write_text(cfg.out_path, json.dumps(_json_safe(result), indent=1) + "\n")
    return [str(cfg.out_path)], {"all_satisfied": all(r.satisfied for r in reports)}


def _gkp_row(cfg, m, seed):
    chi = make_gaussian(cfg.sigma, cfg.q)
    code = _code(cfg)
    rate, se = concatenated_monte_carlo(code, chi, m, cfg.trials, seed)
    return {"m": m, "exact_rate": concatenated_error_rate(code, chi, m),
            "monte_carlo_rate": rate, "stderr": se}


def _run_gkp(cfg):
    rows = [_gkp_row(cfg, m, derive_rng(cfg.seed, m)) for m in cfg.m_list]
    write_table(cfg.out_path, ["m", "exact_rate", "monte_carlo_rate", "stderr"], rows, cfg.fmt)
    p = logical_error_probability(_code(cfg), make_gaussian(cfg.sigma, cfg.q))
    return [str(cfg.out_path)], {"logical_error_probability": p}


def sweep_point(cfg: ExperimentConfig, name: str, index: int) -> dict:
    """Evaluate one sweep point; ``cfg`` already carries the scalar value."""
    seed = cfg.seed + index
    value = getattr(cfg, name)
    chi = make_gaussian(cfg.sigma, cfg.q)
    if cfg.target == "quantum-success":
        summ = fourier_sampling_trials(cfg.n, chi, cfg.trials, seed)
        analytic = sum(predicted_success_probability(chi, cfg.n, y) for y in range(1, cfg.q)) / (cfg.q - 1)
        row = {"empirical_success": summ.empirical, "predicted_observed": summ.predicted,
               "predicted": analytic, "stderr": summ.stderr, "informative": summ.informative}
    elif cfg.target == "capacity":
        cap = additive_channel_capacity(chi)
        row = {"closed_form": cap.closed_form, "numerical": cap.numerical,
               "iterations": cap.iterations}
    elif cfg.target == "gkp":
        gk = _gkp_row(cfg, cfg.m, seed)
        del gk["m"]
        row = gk
    else:
        (row,) = sample_complexity_sweep([cfg.n], cfg.eta, chi, seed, cfg.trials,
                                         cfg.max_samples, cfg.confirm)
        del row["n"]
    return {"index": index, name: value, **row}


def _sweep_worker(args):
    cfg, name, index = args
    return sweep_point(cfg, name, index)


def sweep(cfg: ExperimentConfig) -> list:
    """Run every point of a one-parameter sweep; rows come back in point order.

    Point i uses seed + i. With ``jobs > 1`` points run in worker processes;
    the result does not depend on the number of workers.
    """
    cfg.validate()
    (name,) = cfg.ranged()
    values = list(getattr(cfg, name))
    tasks = [(cfg.at(name, v), name, i) for i, v in enumerate(values)]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            return list(pool.map(_sweep_worker, tasks))
    return [_sweep_worker(t) for t in tasks]


def _run_sweep(cfg):
    rows = sweep(cfg)
    columns = list(rows[0].keys())
    write_table(cfg.out_path, columns, rows, cfg.fmt)
    (name,) = cfg.ranged()
    return [str(cfg.out_path)], {"points": len(rows), "parameter": name}


_RUNNERS = {
    "gen": _run_gen,
    "attack-classical": _run_attack_classical,
    "attack-quantum": _run_attack_quantum,
    "bounds": _run_bounds,
    "gkp": _run_gkp,
    "sweep": _run_sweep,
}


def run(cfg: ExperimentConfig) -> RunManifest:
    """Validate, execute, then write results and a manifest next to them."""
    cfg.validate()
    start = time.perf_counter()
    outputs, summary = _RUNNERS[cfg.kind](cfg)
    manifest = RunManifest(cfg.echo(), __version__, cfg.seed,
                           round(time.perf_counter() - start, 6), outputs, summary)
    atomic_write_text(manifest_path(cfg.out_path), manifest.to_json())
    return manifest
