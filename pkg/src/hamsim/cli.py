"""Experiment harness: single runs, parameter sweeps, CSV emission.

p can be given directly or derived as c*ln(n)/n^delta; a derived p above 1
is rejected, never clamped.  Trials use seeds seed, seed+1, ... so any row
is reproducible in isolation.  The CSV schema is fixed; wall_ms is the
only column excluded from byte-for-byte determinism.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from .dhc import run_dhc1, run_dhc2
from .graph import GnpParams, Graph, dump_text, generate_gnp, load_text
from .rotation import run_dra
from .runtime import Budgets, SimulationReport
from .upcast import run_upcast
from .verify import HcCertificate, check_certificate

ALGOS = ("dra", "dhc1", "dhc2", "upcast")

CSV_COLUMNS = [
    "algo", "n", "p", "c", "delta", "seed", "trial", "success", "rounds",
    "steps", "messages", "phase1_rounds", "phase2_rounds",
    "peak_mem_max_node", "peak_mem_root", "failure_reason", "wall_ms",
]

RETRY_SEED_STRIDE = 1_000_003


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    algo: str
    n: int
    p: Optional[float] = None
    c: Optional[float] = None
    delta: Optional[float] = None
    seed: int = 0
    trials: int = 1
    retries: int = 0
    cprime: float = 3.0
    max_steps_mult: float = 1.0
    out: Optional[str] = None
    transcript: Optional[str] = None
    cert_dir: Optional[str] = None

    def resolved_p(self) -> float:
        if self.p is not None:
            if not 0.0 <= self.p <= 1.0:
                raise ConfigError(f"p={self.p} outside [0, 1]")
            return self.p
        if self.c is None or self.delta is None:
            raise ConfigError("need either p or both c and delta")
        p = self.c * math.log(self.n) / self.n ** self.delta
        if p > 1.0:
            raise ConfigError(
                f"derived p = {self.c}*ln({self.n})/{self.n}^{self.delta} = {p:.4f} > 1"
            )
        return p

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.algo == "dhc2" and self.delta is None:
            raise ConfigError("dhc2 requires delta")
        self.resolved_p()


def _phase_split(algo: str, report: SimulationReport) -> tuple[int, int]:
    ph = report.phase_rounds
    if algo == "dra":
        return ph.get("census", 0), ph.get("build", 0)
    if algo in ("dhc1", "dhc2"):
        return ph.get("phase1", 0), ph.get("phase2", 0)
    setup = ph.get("setup", 0)
    return setup, sum(v for k, v in ph.items() if k != "setup")


def run_single(
    cfg: ExperimentConfig, seed: int, transcript: Optional[list] = None
) -> tuple[SimulationReport, Optional[HcCertificate], Graph]:
    p = cfg.resolved_p()
    g = generate_gnp(GnpParams(cfg.n, p, seed))
    budgets = Budgets.default_for(cfg.n)
    kw = dict(budgets=budgets, strict=transcript is not None, transcript=transcript,
              steps_mult=cfg.max_steps_mult)
    if cfg.algo == "dra":
        report, order = run_dra(g, seed=seed, **kw)
        cert = HcCertificate.from_cycle(order) if order is not None else None
    elif cfg.algo == "dhc1":
        report, cert = run_dhc1(g, seed=seed, **kw)
    elif cfg.algo == "dhc2":
        report, cert = run_dhc2(g, cfg.delta, seed=seed, **kw)
    else:
        report, cert = run_upcast(g, seed=seed, cprime=cfg.cprime, **kw)
    if report.success:
        if cert is None:
            raise RuntimeError("success without certificate")
        res = check_certificate(g, cert)
        if not res.ok:
            raise RuntimeError(f"success but certificate rejected: {res.reason}")
    return report, cert, g


def _row(cfg: ExperimentConfig, seed: int, trial: int,
         report: SimulationReport, wall_ms: int) -> dict:
    p1, p2 = _phase_split(cfg.algo, report)
    peaks = report.peak_memory_words
    root = report.extras.get("root")
    if root is not None and len(peaks) > 1:
        peak_root = peaks.get(root, 0)
        peak_max = max(w for v, w in peaks.items() if v != root)
    else:
        peak_root = 0
        peak_max = max(peaks.values()) if peaks else 0
    return {
        "algo": cfg.algo,
        "n": cfg.n,
        "p": format(cfg.resolved_p(), ".12g"),
        "c": "" if cfg.c is None else format(cfg.c, ".12g"),
        "delta": "" if cfg.delta is None else format(cfg.delta, ".12g"),
        "seed": seed,
        "trial": trial,
        "success": int(report.success),
        "rounds": report.rounds,
        "steps": report.steps,
        "messages": report.messages,
        "phase1_rounds": p1,
        "phase2_rounds": p2,
        "peak_mem_max_node": peak_max,
        "peak_mem_root": peak_root,
        "failure_reason": report.failure_reason.value if report.failure_reason else "",
        "wall_ms": wall_ms,
    }


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Execute cfg.trials trials (seeds seed, seed+1, ...) and return rows.

    With retries > 0, a failed trial is re-run with seeds displaced by a
    large stride; the reported row is the last attempt.
    """
    cfg.validate()
    rows = []
    for trial in range(cfg.trials):
        base_seed = cfg.seed + trial
        for attempt in range(cfg.retries + 1):
            seed = base_seed + attempt * RETRY_SEED_STRIDE
            t0 = time.perf_counter()
            report, cert, g = run_single(cfg, seed)
            wall_ms = int((time.perf_counter() - t0) * 1000)
            if report.success or attempt == cfg.retries:
                break
        rows.append(_row(cfg, base_seed, trial, report, wall_ms))
        if cfg.cert_dir and cert is not None and report.success:
            os.makedirs(cfg.cert_dir, exist_ok=True)
            path = os.path.join(cfg.cert_dir, f"{cfg.algo}_n{cfg.n}_seed{base_seed}.cert")
            with open(path, "w") as fh:
                fh.write(cert.dump_text())
    if cfg.out:
        write_csv(cfg.out, rows)
    return rows


def write_csv(path: str, rows: list[dict]) -> None:
    """Append rows; the whole batch lands via one atomic rename."""
    exists = os.path.exists(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if exists:
            with open(path, newline="") as old:
                fh.write(old.read())
        else:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)
    os.replace(tmp, path)


def sweep(cfg: ExperimentConfig, n_list: list[int]) -> dict:
    """Median rounds per n plus observed/predicted growth ratios.

    Prediction for consecutive sizes: (n2/n1)^delta * (ln n2 / ln n1)^2,
    with delta defaulting to 1/2 when the run is parameterized by explicit p.
    """
    if len(n_list) < 2:
        raise ConfigError("sweep needs at least two n values")
    all_rows: list[dict] = []
    medians = {}
    for n in n_list:
        sub = ExperimentConfig(**{**cfg.__dict__, "n": n, "out": None})
        rows = run_experiment(sub)
        all_rows.extend(rows)
        rounds = sorted(r["rounds"] for r in rows)
        medians[n] = rounds[len(rounds) // 2]
    if cfg.out:
        write_csv(cfg.out, all_rows)
    delta = cfg.delta if cfg.delta is not None else 0.5
    report = {"medians": medians, "ratios": []}
    ns = sorted(medians)
    for a, b in zip(ns, ns[1:]):
        predicted = (b / a) ** delta * (math.log(b) / math.log(a)) ** 2
        observed = medians[b] / max(medians[a], 1)
        report["ratios"].append(
            {"n1": a, "n2": b, "observed": observed, "predicted": predicted}
        )
    return report


# ---------------------------------------------------------------------------
# command line


def _load_config_file(path: str) -> dict:
    """Plain "key = value" lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


_FIELD_TYPES = {
    "algo": str, "n": int, "p": float, "c": float, "delta": float,
    "seed": int, "trials": int, "retries": int, "cprime": float,
    "max_steps_mult": float, "out": str, "transcript": str, "cert_dir": str,
}


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        for key, raw in _load_config_file(args.config).items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _FIELD_TYPES[key](raw)
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "algo" not in values or "n" not in values:
        raise ConfigError("algo and n are required")
    return ExperimentConfig(**values)


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key = value file; flags override")
    sp.add_argument("--algo", choices=ALGOS)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--cprime", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--retries", type=int)
    sp.add_argument("--max-steps-mult", dest="max_steps_mult", type=float)
    sp.add_argument("--out")
    sp.add_argument("--transcript", help="write a strict-mode message transcript here")
    sp.add_argument("--cert-dir", dest="cert_dir", help="write success certificates here")


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="hamsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run trials of one algorithm")
    _add_run_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run trials across several n")
    _add_run_flags(sweep_p)
    sweep_p.add_argument("--n-list", required=True,
                         help="comma-separated n values, e.g. 1024,4096")

    ver_p = sub.add_parser("verify-cert", help="check a certificate against a graph dump")
    ver_p.add_argument("--graph", required=True)
    ver_p.add_argument("--cert", required=True)

    dump_p = sub.add_parser("dump-graph", help="write a graph dump")
    dump_p.add_argument("--n", type=int, required=True)
    dump_p.add_argument("--p", type=float)
    dump_p.add_argument("--c", type=float)
    dump_p.add_argument("--delta", type=float)
    dump_p.add_argument("--seed", type=int, default=0)
    dump_p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _build_config(args)
            if cfg.transcript:
                cfg.validate()
                lines: list = []
                report, cert, _g = run_single(cfg, cfg.seed, transcript=lines)
                with open(cfg.transcript, "w") as fh:
                    fh.write("\n".join(lines) + ("\n" if lines else ""))
                rows = [_row(cfg, cfg.seed, 0, report, 0)]
                if cfg.out:
                    write_csv(cfg.out, rows)
            else:
                rows = run_experiment(cfg)
            ok = sum(r["success"] for r in rows)
            print(f"{len(rows)} trial(s), {ok} success(es)")
            for r in rows:
                print(f"  seed={r['seed']} success={r['success']} rounds={r['rounds']} "
                      f"steps={r['steps']} messages={r['messages']} "
                      f"fail={r['failure_reason'] or '-'}")
            return 0
        if args.command == "sweep":
            cfg = _build_config(args)
            n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
            rep = sweep(cfg, n_list)
            print("median rounds:")
            for n, med in sorted(rep["medians"].items()):
                print(f"  n={n}: {med}")
            print("growth ratios (observed vs predicted):")
            for r in rep["ratios"]:
                print(f"  {r['n1']} -> {r['n2']}: {r['observed']:.2f} vs {r['predicted']:.2f}")
            return 0
        if args.command == "verify-cert":
            with open(args.graph) as fh:
                g = load_text(fh.read())
            with open(args.cert) as fh:
                cert = HcCertificate.load_text(fh.read())
            res = check_certificate(g, cert)
            print("ACCEPT" if res.ok else f"REJECT {res.reason} {res.detail}")
            return 0 if res.ok else 1
        if args.command == "dump-graph":
            cfg = ExperimentConfig(algo="dra", n=args.n, p=args.p, c=args.c,
                                   delta=args.delta, seed=args.seed)
            g = generate_gnp(GnpParams(args.n, cfg.resolved_p(), args.seed))
            with open(args.out, "w") as fh:
                fh.write(dump_text(g))
            print(f"wrote {g.n} nodes / {g.m} edges")
            return 0
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
