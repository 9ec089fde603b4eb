"""Command-line entry point ``lab``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from lwelab import __version__
from lwelab.errors import LabError, UsageError
from lwelab.harness import DEFAULT_OUT, SWEEP_TARGETS, ExperimentConfig, run


def _number_or_list(kind):
    def parse(text: str):
        parts = [p for p in text.split(",") if p.strip()]
        try:
            values = tuple(kind(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__} value(s), got {text!r}")
        if not values:
            raise argparse.ArgumentTypeError("empty value")
        return values[0] if len(values) == 1 and "," not in text else values

    return parse


def _int_list(text: str):
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p, *, fmt=True):
    p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed (default 0)")
    p.add_argument("--out", default=None, help="output file")
    if fmt:
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")


def _add_params(p, names, ranged=False):
    num = _number_or_list if ranged else (lambda k: k)
    defaults = {"n": 2, "q": 5, "sigma": 1.0, "m": 10, "radius": None, "eta": 0.1}
    kinds = {"n": int, "q": int, "sigma": float, "m": int, "radius": float, "eta": float}
    helps = {
        "n": "secret dimension",
        "q": "modulus",
        "sigma": "discrete Gaussian width",
        "m": "number of classical samples (repetitions for the gkp target)",
        "radius": "correctable radius (default q/4)",
        "eta": "target failure rate",
    }
    for name in names:
        p.add_argument(f"--{name}", type=num(kinds[name]), default=defaults[name], help=helps[name])


def _add_attack(p):
    p.add_argument("--max-samples", type=int, default=32, help="quantum samples per attack trial")
    p.add_argument("--confirm", type=int, default=30, help="classical samples used for key confirmation")
    p.add_argument("--min-fraction", type=float, default=0.9, help="confirmation acceptance fraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("gen", help="generate an LWE instance (JSON plus _secret sidecar)")
    _add_params(p, ["n", "q", "sigma", "m"])
    _add_common(p, fmt=False)

    p = sub.add_parser("attack-classical", help="maximum-likelihood exhaustive search trials")
    _add_params(p, ["n", "q", "sigma", "m"])
    p.add_argument("--trials", type=int, default=100)
    _add_common(p)

    p = sub.add_parser("attack-quantum", help="Fourier-sampling attack on simulated quantum samples")
    _add_params(p, ["n", "q", "sigma", "radius"])
    p.add_argument("--trials", type=int, default=100)
    _add_attack(p)
    p.add_argument("--dump-state", default=None, help="write one prepared state as index,re,im CSV")
    _add_common(p)

    p = sub.add_parser("bounds", help="Fano, Fannes-Audenaert and capacity calculators")
    _add_params(p, ["n", "q", "sigma", "m"])
    _add_common(p, fmt=False)

    p = sub.add_parser("gkp", help="lattice-decoding logical error rates under repetition")
    _add_params(p, ["q", "sigma", "radius"])
    p.add_argument("--m-list", type=_int_list, default=(1, 3, 5, 7, 9))
    p.add_argument("--trials", type=int, default=100_000, help="Monte Carlo trials per m")
    _add_common(p)

    p = sub.add_parser("sweep", help="one-parameter sweep; give exactly one parameter as a comma list")
    p.add_argument("target", choices=SWEEP_TARGETS)
    _add_params(p, ["n", "q", "sigma", "m", "radius", "eta"], ranged=True)
    p.add_argument("--trials", type=int, default=300)
    _add_attack(p)
    p.add_argument("--jobs", type=int, default=int(os.environ.get("LAB_JOBS", "1")),
                   help="parallel sweep points (default $LAB_JOBS or 1)")
    _add_common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = {k: v for k, v in vars(args).items() if v is not None}
    fields.setdefault("out", DEFAULT_OUT[args.kind])
    return ExperimentConfig(**fields)


def _error_record(err: LabError) -> str:
    rec = {"error": err.kind, "message": str(err)}
    if isinstance(err, UsageError) and err.field:
        rec["field"] = err.field
    return json.dumps(rec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = run(config_from_args(args))
    except LabError as err:
        print(_error_record(err), file=sys.stderr)
        return err.exit_code
    print(json.dumps({"outputs": manifest.outputs, "summary": manifest.summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
