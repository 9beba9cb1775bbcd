"""Command-line front end: synth, analyze, verify.

synth writes a controller ensemble as JSON with a spec sidecar and a run
manifest; analyze turns an ensemble into figure-ready records and
summaries CSV; verify runs the numerical invariant suite and reports a
pass/fail table. All floats in data files carry 17 significant digits,
all randomness flows from the master seed, and nothing wall-clock
dependent lands in a data file, so reruns are byte-identical. The run
manifest carries the config hash plus the SHA-256 of every data file it
produced; it is the one file with a timestamp.

Exit codes: 0 success, 1 validation error, 2 invariant failure,
3 input/output error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analytics import analyze
from .errors import InvariantViolation
from .network import NetworkSpec
from .synthesis import (SynthesisConfig, controllers_from_json,
                        controllers_to_json, f17, synthesize_ensemble)
from .verification import run_checks

RECORD_COLUMNS = ("controller_index", "structure_index", "F", "e", "zeta",
                  "abs_zeta", "f_n", "tf", "norm_K", "norm_Rs", "cos_phi",
                  "sin_phi", "cos_theta", "identity_residual", "pst_flag")
SUMMARY_COLUMNS = ("structure_index", "n_records", "pearson_loglog",
                   "kendall_tau_e_vs_sinphi", "mean_norm_K", "var_norm_K")
SCHEMA_VERSION = 1


class CommandLineError(Exception):
    """Bad invocation; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags, which collides with the
    # invariant-failure code; route through the validation path instead
    def error(self, message):
        raise CommandLineError(f"{self.prog}: {message}")


def resolve_threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise CommandLineError(f"--threads must be >= 1, got {value}")
        return value
    env = os.environ.get("SPINSENS_THREADS")
    if env:
        try:
            parsed = int(env)
        except ValueError:
            raise CommandLineError(f"SPINSENS_THREADS is not an integer: {env!r}")
        if parsed < 1:
            raise CommandLineError(f"SPINSENS_THREADS must be >= 1, got {parsed}")
        return parsed
    return os.cpu_count() or 1


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    master_seed: int
    config: dict
    inputs: dict
    outputs: dict

    def to_json(self) -> str:
        body = {
            "schema_version": SCHEMA_VERSION,
            "tool": f"spinsens {__version__}",
            "command": self.command,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "master_seed": self.master_seed,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        return json.dumps(body, indent=1, sort_keys=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_records_csv(path: Path, records) -> None:
    lines = [",".join(RECORD_COLUMNS)]
    for r in records:
        lines.append(",".join((
            str(r.controller_index), str(r.structure_index), f17(r.F),
            f17(r.e), f17(r.zeta), f17(r.abs_zeta), f17(r.f_n), f17(r.t_f),
            f17(r.norm_K), f17(r.norm_Rs), f17(r.cos_phi), f17(r.sin_phi),
            f17(r.cos_theta), f17(r.identity_residual), "1" if r.pst else "0")))
    _write(path, "\n".join(lines) + "\n")


def write_summaries_csv(path: Path, summaries) -> None:
    lines = [",".join(SUMMARY_COLUMNS)]
    for s in summaries:
        lines.append(",".join((
            str(s.structure_index), str(s.count), f17(s.pearson_r_loglog),
            f17(s.kendall_tau), f17(s.mean_norm_K), f17(s.var_norm_K))))
    _write(path, "\n".join(lines) + "\n")


def _spec_from_args(args) -> NetworkSpec:
    if args.spec is not None:
        if args.n is not None or args.topology is not None \
                or args.input_spin is not None or args.output_spin is not None:
            raise CommandLineError("give either --spec or the --n/--topology/"
                                   "--in/--out flags, not both")
        try:
            text = Path(args.spec).read_text(encoding="utf-8")
        except OSError as exc:
            raise IOError(f"cannot read network spec: {exc}") from exc
        return NetworkSpec.from_json(text)
    missing = [flag for flag, val in (("--n", args.n), ("--topology", args.topology),
                                      ("--in", args.input_spin), ("--out", args.output_spin))
               if val is None]
    if missing:
        raise CommandLineError("missing required flags: " + ", ".join(missing))
    return NetworkSpec(num_spins=args.n, topology=args.topology,
                       input_spin=args.input_spin, output_spin=args.output_spin,
                       coupling=args.coupling, kappa=args.kappa)


def cmd_synth(args) -> int:
    spec = _spec_from_args(args)
    config = SynthesisConfig(
        restarts=args.restarts,
        t_f_range=tuple(args.tf_range),
        bias_range=tuple(args.bias_range),
        tolerance=args.tolerance,
        seed=args.seed)
    threads = resolve_threads(args.threads)
    ensemble = synthesize_ensemble(spec, config, threads=threads)
    if not ensemble:
        raise CommandLineError("synthesis produced no controllers; "
                               "check ranges and restart count")

    out_path = Path(args.output)
    spec_path = out_path.with_name(out_path.stem + ".spec.json")
    manifest_path = out_path.with_name(out_path.stem + ".manifest.json")
    _write(out_path, controllers_to_json(ensemble))
    _write(spec_path, spec.to_json())
    manifest = RunManifest(
        command="synth",
        master_seed=config.seed,
        config={
            "spec": json.loads(spec.to_json()),
            "restarts": config.restarts,
            "t_f_range": list(config.t_f_range),
            "bias_range": list(config.bias_range),
            "tolerance": config.tolerance,
            "seed": config.seed,
        },
        inputs={},
        outputs={str(out_path): file_sha256(out_path),
                 str(spec_path): file_sha256(spec_path)})
    _write(manifest_path, manifest.to_json())
    best = ensemble[0]
    print(f"synth: {len(ensemble)} controllers -> {out_path} "
          f"(best error {1.0 - best.fidelity:.3e})")
    return 0


def cmd_analyze(args) -> int:
    controllers_path = Path(args.controllers)
    spec_path = Path(args.spec) if args.spec else \
        controllers_path.with_name(controllers_path.stem + ".spec.json")
    try:
        spec_text = spec_path.read_text(encoding="utf-8")
        controllers_text = controllers_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot read inputs: {exc}") from exc
    try:
        spec = NetworkSpec.from_json(spec_text)
        controllers = controllers_from_json(controllers_text, spec)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IOError(f"corrupt input file: {exc}") from exc
    if not controllers:
        raise CommandLineError(f"no controllers in {controllers_path}")

    threads = resolve_threads(args.threads)
    records, summaries = analyze(controllers, threads=threads,
                                 pst_tol=args.pst_tol)
    records_path = Path(args.records)
    summaries_path = Path(args.summaries)
    manifest_path = records_path.with_name(records_path.stem + ".manifest.json")
    write_records_csv(records_path, records)
    write_summaries_csv(summaries_path, summaries)
    manifest = RunManifest(
        command="analyze",
        master_seed=-1,
        config={"pst_tol": args.pst_tol,
                "columns": list(RECORD_COLUMNS),
                "summary_columns": list(SUMMARY_COLUMNS)},
        inputs={str(controllers_path): file_sha256(controllers_path),
                str(spec_path): file_sha256(spec_path)},
        outputs={str(records_path): file_sha256(records_path),
                 str(summaries_path): file_sha256(summaries_path)})
    _write(manifest_path, manifest.to_json())
    print(f"analyze: {len(records)} records over {len(summaries)} structures "
          f"-> {records_path}, {summaries_path}")
    return 0


def cmd_verify(args) -> int:
    threads = resolve_threads(args.threads)
    dims = tuple(args.n) if args.n else (2, 3, 4, 5, 6)
    results = run_checks(
        seed=args.seed,
        dims=dims,
        systems_per_dim=args.systems_per_dim,
        three_way_per_dim=args.three_way_per_dim,
        cross_count=args.cross_count,
        necessity_restarts=args.restarts,
        pst_only=args.pst,
        inject_sign_error=args.inject_sign_error,
        threads=threads)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.label:4s} {r.name:{width}s}  {r.detail}")
    failures = [r for r in results if not r.passed]
    warnings = [r for r in results if r.warning]
    print(f"verify: {len(results)} checks, {len(results) - len(failures)} passed, "
          f"{len(warnings)} warnings (seed {args.seed})")
    return 2 if failures else 0


def build_parser() -> _Parser:
    parser = _Parser(prog="spinsens",
                     description="Sensitivity geometry of bias-controlled "
                                 "spin-network state transfer.")
    parser.add_argument("--version", action="version",
                        version=f"spinsens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a controller ensemble")
    synth.add_argument("--spec", help="network spec JSON file")
    synth.add_argument("--n", type=int, help="number of spins")
    synth.add_argument("--topology", choices=("chain", "ring"))
    synth.add_argument("--in", dest="input_spin", type=int,
                       help="input spin (1-indexed)")
    synth.add_argument("--out", dest="output_spin", type=int,
                       help="output spin (1-indexed)")
    synth.add_argument("--coupling", type=float, default=1.0)
    synth.add_argument("--kappa", type=float, default=0.0,
                       help="next-nearest coupling; only 0 is supported")
    synth.add_argument("--restarts", type=int, default=100)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--tf-range", nargs=2, type=float, default=[1.0, 50.0],
                       metavar=("LO", "HI"))
    synth.add_argument("--bias-range", nargs=2, type=float, default=[0.0, 10.0],
                       metavar=("LO", "HI"))
    synth.add_argument("--tolerance", type=float, default=1e-8)
    synth.add_argument("--threads", type=int, default=None)
    synth.add_argument("-o", "--output", default="controllers.json")
    synth.set_defaults(func=cmd_synth)

    analyze_p = sub.add_parser("analyze", help="compute sensitivity records "
                                               "and summaries for an ensemble")
    analyze_p.add_argument("controllers", help="controller ensemble JSON")
    analyze_p.add_argument("--spec", default=None,
                           help="network spec JSON (default: <ensemble>.spec.json)")
    analyze_p.add_argument("--records", default="records.csv")
    analyze_p.add_argument("--summaries", default="summaries.csv")
    analyze_p.add_argument("--pst-tol", type=float, default=1e-12)
    analyze_p.add_argument("--threads", type=int, default=None)
    analyze_p.set_defaults(func=cmd_analyze)

    verify = sub.add_parser("verify", help="run the numerical invariant suite")
    verify.add_argument("--seed", type=int, default=2024)
    verify.add_argument("--n", type=int, nargs="+", default=None,
                        help="restrict instance dimensions")
    verify.add_argument("--pst", action="store_true",
                        help="run only the perfect-transfer sufficiency check")
    verify.add_argument("--systems-per-dim", type=int, default=14)
    verify.add_argument("--three-way-per-dim", type=int, default=50)
    verify.add_argument("--cross-count", type=int, default=100)
    verify.add_argument("--restarts", type=int, default=40,
                        help="ensemble size for the necessity check")
    verify.add_argument("--threads", type=int, default=None)
    verify.add_argument("--inject-sign-error", action="store_true",
                        help=argparse.SUPPRESS)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CommandLineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
