"""Command-line entry point: certify / simulate / verify / attractivity /
validate.

Exit codes are the machine contract:
    certify    0 CERTIFIED, 2 no certificate at the degree, 3 numerically
               suspect, 1 input error
    verify     0 no violation found, 4 violated (witness printed), 1 input
               error
    simulate / attractivity / validate
               0 success, 1 input error (validate returns 1 when any check
               fails)

Every output file records the hash of the run manifest (command, inputs,
config, seed) so reports can be traced back to the exact invocation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certify import (CERTIFIED, NO_CERTIFICATE, CertificationConfig,
                      certify, check_attractivity)
from .oracle import OracleConfig, verify_certificate
from .poly import PolynomialParseError, parse_polynomial
from .sim import SimConfig, simulate, write_trajectory
from .system import SystemFormatError, load_system

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_CERT = 2
EXIT_SUSPECT = 3
EXIT_VIOLATED = 4


class InputError(ValueError):
    pass


# -- run manifest -------------------------------------------------------------

def make_manifest(command: str, inputs, overrides: dict, seed: int,
                  out_dir: str) -> dict:
    manifest = {
        "command": command,
        "inputs": [str(p) for p in inputs],
        "config": {k: v for k, v in sorted(overrides.items())},
        "seed": seed,
        "out_dir": str(out_dir),
        "version": __version__,
    }
    blob = json.dumps(manifest, sort_keys=True).encode()
    manifest["hash"] = hashlib.sha256(blob).hexdigest()[:16]
    # timing is recorded but deliberately excluded from the hash so that
    # identical invocations produce identical report bytes
    manifest["started"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    return manifest


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


# -- input loading ------------------------------------------------------------

def _load_system(path: str):
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such file")
    try:
        return load_system(p)
    except SystemFormatError as exc:
        raise InputError(str(exc)) from exc


def load_lyapunov(path: str, sys_) -> dict:
    """Read a Lyapunov family file: {"lyapunov": {region id: polynomial}}.

    Certificate files written by cmd_certify are accepted too (their
    full-precision "lyapunov_full" entry wins over the cleaned display
    form).
    """
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such file")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    table = doc.get("lyapunov_full") or doc.get("lyapunov")
    if not isinstance(table, dict):
        raise InputError(f"{path}: missing 'lyapunov' table")
    out = {}
    for rid_s, text in table.items():
        try:
            rid = int(rid_s)
            out[rid] = parse_polynomial(text, sys_.dimension)
        except (ValueError, PolynomialParseError) as exc:
            raise InputError(f"{path}: entry {rid_s!r}: {exc}") from exc
    missing = set(sys_.regions) - set(out)
    extra = set(out) - set(sys_.regions)
    if missing or extra:
        raise InputError(
            f"{path}: lyapunov table must have exactly one entry per region "
            f"(missing {sorted(missing)}, unknown {sorted(extra)})")
    return out


def _parse_floats(text: str, what: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad {what} {text!r}: {exc}") from exc


def _theta_table(sys_, th11: float) -> dict:
    """Per-region simplex weights for a scalar sweep value.

    Two-vertex regions get (v, 1-v); everything else keeps its first
    vertex.  This is how a one-parameter uncertainty sweep is applied to a
    mixed system.
    """
    table = {}
    for rid, dyn in sys_.dynamics.items():
        if dyn.count == 2:
            table[rid] = (th11, 1.0 - th11)
        else:
            w = np.zeros(dyn.count)
            w[0] = 1.0
            table[rid] = tuple(w)
    return table


# -- commands ------------------------------------------------------------------

def cmd_certify(args) -> int:
    sys_ = _load_system(args.system)
    cfg = CertificationConfig(
        lyapunov_degree=args.degree,
        use_attractivity_filter=not args.no_attractivity_filter,
    )
    oracle_cfg = OracleConfig(seed=args.seed, tolerance=args.tolerance)
    manifest = make_manifest(
        "certify", [args.system],
        {"degree": args.degree,
         "no_attractivity_filter": args.no_attractivity_filter,
         "tolerance": args.tolerance},
        args.seed, args.out_dir)

    cert = certify(sys_, cfg, oracle_cfg=oracle_cfg)
    doc = cert.to_dict()
    doc["manifest"] = manifest

    out = Path(args.out_dir) / f"{Path(args.system).stem}.certificate.json"
    _write_json(out, doc)
    print(f"{cert.status}: {cert.detail or 'see ' + str(out)}")
    if cert.lyapunov:
        for rid in sorted(cert.lyapunov):
            print(f"  V_{rid} = {doc['lyapunov'][str(rid)]}")
    print(f"  written {out}")
    if cert.status == CERTIFIED:
        return EXIT_OK
    if cert.status == NO_CERTIFICATE:
        return EXIT_NO_CERT
    return EXIT_SUSPECT


def cmd_simulate(args) -> int:
    sys_ = _load_system(args.system)
    x0 = np.array(_parse_floats(args.x0, "--x0"))
    if x0.shape != (sys_.dimension,):
        raise InputError(f"--x0 needs {sys_.dimension} coordinates")
    if not sys_.in_box(x0):
        raise InputError(f"--x0 {x0.tolist()} is outside the system box")

    certificate = None
    if args.certificate:
        certificate = load_lyapunov(args.certificate, sys_)

    if args.theta_sweep:
        sweep = _parse_floats(args.theta_sweep, "--theta-sweep")
        thetas = [(f"theta{v:g}", _theta_table(sys_, v)) for v in sweep]
    elif args.theta:
        weights = _parse_floats(args.theta, "--theta")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise InputError(f"--theta {weights} is not on the simplex")
        table = {rid: tuple(weights) for rid, dyn in sys_.dynamics.items()
                 if dyn.count == len(weights)}
        if not table:
            raise InputError(
                f"--theta has {len(weights)} weights but no region has "
                f"that many vertices")
        thetas = [("theta", table)]
    else:
        thetas = [("theta-default", None)]

    manifest = make_manifest(
        "simulate", [args.system] + ([args.certificate] if args.certificate else []),
        {"x0": args.x0, "theta": args.theta, "theta_sweep": args.theta_sweep,
         "t_end": args.t_end, "step": args.step},
        args.seed, args.out_dir)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, table in thetas:
        cfg = SimConfig(step=args.step, t_end=args.t_end, theta=table)
        traj = simulate(sys_, x0, cfg, certificate=certificate)
        name = f"{Path(args.system).stem}__{label}.trajectory.tsv"
        with open(out_dir / name, "w") as fh:
            write_trajectory(traj, fh, manifest_hash=manifest["hash"])
        last = traj.events[-1] if traj.events else (traj.final_time, "t_end", "")
        print(f"{name}: {len(traj.points)} points, final event {last[1]} "
              f"at t={last[0]:.4g}, ||x||={np.linalg.norm(traj.final_state):.3e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    sys_ = _load_system(args.system)
    lyapunov = load_lyapunov(args.lyapunov, sys_)
    # certificate files record which boundaries can host sliding; cross-Lie
    # conditions only apply there.  Plain Lyapunov files check every pair.
    pairs = json.loads(Path(args.lyapunov).read_text()).get("attractive_pairs")
    if pairs is not None:
        pairs = {tuple(p) for p in pairs}
    cfg = OracleConfig(seed=args.seed, tolerance=args.tolerance)
    manifest = make_manifest("verify", [args.system, args.lyapunov],
                             {"tolerance": args.tolerance},
                             args.seed, args.out_dir)
    report = verify_certificate(sys_, lyapunov, cfg, attractive_pairs=pairs)
    doc = report.to_dict()
    doc["manifest"] = manifest
    out = Path(args.out_dir) / f"{Path(args.system).stem}.oracle.json"
    _write_json(out, doc)
    for rec in report.records:
        print(rec.summary())
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"verdict: {report.verdict}")
    print(f"  written {out}")
    return EXIT_OK if report.passed else EXIT_VIOLATED


def cmd_attractivity(args) -> int:
    sys_ = _load_system(args.system)
    try:
        i_s, j_s = args.pair.split(",")
        pair = (int(i_s), int(j_s))
    except ValueError as exc:
        raise InputError(f"bad --pair {args.pair!r}: expected i,j") from exc
    try:
        status = check_attractivity(sys_, pair)
    except KeyError as exc:
        raise InputError(str(exc)) from exc
    print(f"boundary ({pair[0]},{pair[1]}): {status}")
    return EXIT_OK


def cmd_validate(args) -> int:
    sys_ = _load_system(args.system)
    report = sys_.validate(rng=np.random.default_rng(args.seed))
    for name, status, detail in report.checks:
        print(f"[{status}] {name}" + (f": {detail}" if detail else ""))
    for caveat in report.caveats:
        print(f"caveat: {caveat}")
    return EXIT_INPUT if report.has_fail else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swsos",
        description="SOS certification and Filippov simulation for "
                    "polynomial switched systems")
    parser.add_argument("--seed", type=int, default=0,
                        help="RNG seed for all sampling (default 0)")
    parser.add_argument("--out-dir", default=".",
                        help="directory for report/trajectory files")
    parser.add_argument("--tolerance", type=float, default=1e-6,
                        help="oracle refutation tolerance (default 1e-6)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="search for a joint SOS certificate")
    p.add_argument("system")
    p.add_argument("--degree", type=int, default=6,
                   help="Lyapunov polynomial degree (even, default 6)")
    p.add_argument("--no-attractivity-filter", action="store_true",
                   help="enforce cross-Lie conditions on every boundary")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="integrate a Filippov trajectory")
    p.add_argument("system")
    p.add_argument("--x0", required=True, help="start point, comma-separated")
    p.add_argument("--theta", help="simplex weights, comma-separated")
    p.add_argument("--theta-sweep",
                   help="comma-separated first-vertex weights; one "
                        "trajectory file per value (two-vertex regions "
                        "get (v, 1-v))")
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--certificate",
                   help="Lyapunov file; records the switched Lyapunov "
                        "value on every trajectory point")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="sampling-oracle check of a "
                                      "Lyapunov family")
    p.add_argument("system")
    p.add_argument("lyapunov")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attractivity", help="SOS sliding-mode pre-test "
                                            "for one boundary")
    p.add_argument("system")
    p.add_argument("--pair", required=True, help="boundary pair i,j")
    p.set_defaults(func=cmd_attractivity)

    p = sub.add_parser("validate", help="structural checks of a system file")
    p.add_argument("system")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
