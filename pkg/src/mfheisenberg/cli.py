"""Command-line front end: ``heis-mf <command> [flags]``.

Resolution order for every setting is flag, then config file, then default.
Exit codes: 0 all checks pass, 1 some check failed, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, experiments, sampler

COMMANDS = (
    "analytic-table", "simulate", "verify-subcritical", "verify-supercritical",
    "verify-critical", "stein-check", "ldp-check", "macrostate-check", "microcanonical-check",
)

DEFAULTS = {
    "n": 2000, "beta": None, "sweeps": None, "burnin": None, "thin": 1, "chains": 8,
    "seed": 0, "threads": None, "out": None,
}
COMMAND_BETA = {
    "simulate": "2.0", "verify-subcritical": "2.0", "verify-supercritical": "5.0",
    "verify-critical": "3.0", "macrostate-check": "5.0",
}
INT_KEYS = {"n", "sweeps", "burnin", "thin", "chains", "seed", "threads"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="heis-mf", description="Mean-field Heisenberg simulator and checks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--n", type=int)
        c.add_argument("--beta", type=str, help="value, or start:stop:step for analytic-table")
        c.add_argument("--sweeps", type=int)
        c.add_argument("--burnin", type=int)
        c.add_argument("--thin", type=int)
        c.add_argument("--chains", type=int)
        c.add_argument("--seed", type=int)
        c.add_argument("--threads", type=int)
        c.add_argument("--out", type=str)
        c.add_argument("--config", type=str)
        c.add_argument("--force", action="store_true")
    return p


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys mirror flag names."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    cfg = read_config(args.config) if args.config else {}
    resolved = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key)
        value = flag if flag is not None else cfg.get(key, default)
        if value is not None and key in INT_KEYS:
            try:
                value = int(value)
            except ValueError as exc:
                raise UsageError(f"{key} must be an integer, got {value!r}") from exc
        resolved[key] = value
    if resolved["n"] < 2:
        raise UsageError("n must be at least 2")
    if resolved["chains"] < 1 or resolved["thin"] < 1:
        raise UsageError("chains and thin must be positive")
    if resolved["beta"] is None:
        resolved["beta"] = COMMAND_BETA.get(args.command)
    if args.command == "verify-critical" and resolved["beta"] is not None \
            and _beta(resolved["beta"]) != 3.0:
        raise UsageError("verify-critical runs at beta = 3")
    if resolved["threads"] is None:
        resolved["threads"] = sampler.default_threads()
    if resolved["out"] is None:
        resolved["out"] = str(Path("heis-mf-out") / args.command)
    return resolved


def parse_betas(text: str | None, default) -> list[float]:
    if text is None:
        return list(default)
    try:
        if ":" in text:
            lo, hi, step = (float(t) for t in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 12) for i in range(count)]
        return [float(text)]
    except ValueError as exc:
        raise UsageError(f"bad --beta {text!r}") from exc


def _beta(text) -> float | None:
    if text is None:
        return None
    vals = parse_betas(str(text), [])
    if len(vals) != 1 or vals[0] < 0:
        raise UsageError(f"bad --beta {text!r}")
    return vals[0]


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


class Emitter:
    """Collects output files and refuses to overwrite without ``--force``."""

    def __init__(self, out: Path, force: bool):
        self.out = out
        self.force = force
        self.paths: list[str] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        if p.exists() and not self.force:
            raise UsageError(f"{p} exists; pass --force to overwrite")
        self.paths.append(str(p))
        return p

    def check_clear(self, names) -> None:
        for name in names:
            p = self.out / name
            if p.exists() and not self.force:
                raise UsageError(f"{p} exists; pass --force to overwrite")


def _settings(r: dict) -> experiments.RunSettings:
    return experiments.RunSettings(r["n"], _beta(r["beta"]), r["sweeps"], r["burnin"], r["thin"],
                                   r["chains"], r["seed"], r["threads"])


def _run_verdict(command: str, r: dict) -> experiments.VerdictReport:
    s = _settings(r)
    if command == "verify-subcritical":
        return experiments.verify_subcritical(s)
    if command == "verify-supercritical":
        return experiments.verify_supercritical(s)
    if command == "verify-critical":
        return experiments.verify_critical(s)
    if command == "macrostate-check":
        return experiments.macrostate_check(s)
    if command == "stein-check":
        return experiments.stein_check(seed=s.seed)
    if command == "ldp-check":
        return experiments.ldp_check(seed=s.seed, threads=s.threads)
    if command == "microcanonical-check":
        return experiments.microcanonical_check(seed=s.seed)
    raise UsageError(f"unknown command {command}")


def run_experiment(command: str, r: dict, force: bool = False) -> int:
    out = Path(r["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from exc
    em = Emitter(out, force)
    em.check_clear(["manifest.json", "report.json", "summary.txt"])
    started = datetime.now(timezone.utc).isoformat()
    code = 0

    if command == "analytic-table":
        betas = parse_betas(r["beta"], np.round(np.arange(0.0, 6.0001, 0.1), 10))
        if any(b < 0 for b in betas):
            raise UsageError("beta must be nonnegative")
        rows = experiments.analytic_table(betas)
        _write_csv(em.path("analytic_table.csv"), experiments.TABLE_HEADER, rows)
        summary = f"analytic-table: {len(rows)} rows"
    elif command == "simulate":
        series = experiments.simulate(_settings(r))
        for cid, ser in enumerate(series):
            ser.to_csv(em.path(f"chain_{cid}.csv"))
        rep = {
            "command": command,
            "chains": [{"chain_id": cid, "burnin_used": ser.burnin_used, "samples": len(ser),
                        "mean_S2": float(ser.S2.mean()),
                        "mean_magnetization": float(ser.magnetization.mean())}
                       for cid, ser in enumerate(series)],
        }
        em.path("report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        summary = "\n".join(f"chain {c['chain_id']}: {c['samples']} samples, "
                            f"mean |S|^2 = {c['mean_S2']:.6g}" for c in rep["chains"])
    else:
        verdict = _run_verdict(command, r)
        for name, (header, rows) in verdict.tables.items():
            _write_csv(em.path(f"{name}.csv"), header, rows)
        em.path("report.json").write_text(
            json.dumps(verdict.to_dict(), indent=2, sort_keys=True) + "\n")
        summary = verdict.summary()
        code = 0 if verdict.passed else 1

    em.path("summary.txt").write_text(summary + "\n")
    manifest = {
        "command": command,
        "params": {k: v for k, v in r.items()},
        "seed": r["seed"],
        "chains": r["chains"],
        "code_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": em.paths + [str(out / "manifest.json")],
    }
    em.path("manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(summary)
    for p in em.paths:
        print(p)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        r = resolve(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return run_experiment(args.command, r, args.force)
    except UsageError as exc:
        print(f"heis-mf: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"heis-mf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
