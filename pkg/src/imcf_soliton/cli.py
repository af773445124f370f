"""Command-line front end: integrate, analyse and serialise parameter sweeps.

Example::

    imcf-soliton --n 2,3,5 --lambda "1.1/(n-1),1,5" --mu 0.5,1,2 --out results
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .analysis import DEFAULT_GROWTH_MARGIN, DEFAULT_TRIALS, full_report
from .core import Params
from .errors import ParamError
from .integrator import DEFAULT_Y_MAX, Tolerances, integrate_profile, reflect_even
from .io import emit_csv, emit_json_report, emit_svg

log = logging.getLogger("imcf_soliton")

FORMATS = ("csv", "json", "svg")
_CRIT = re.compile(r"^\s*([-+0-9.eE]+)\s*/\s*\(\s*n\s*-\s*1\s*\)\s*$")


@dataclass
class RunConfig:
    n: list
    lam: list
    mu: list
    y_max: float = DEFAULT_Y_MAX
    tol: Tolerances = field(default_factory=Tolerances)
    eta: Optional[float] = None
    output_dir: Path = Path("out")
    formats: tuple = ("csv", "json")
    seed: int = 0
    jobs: int = 1
    growth_margin: float = DEFAULT_GROWTH_MARGIN
    trials: int = DEFAULT_TRIALS

    def triples(self) -> list:
        """Validated Params for the full product; lambda tokens may be ``k/(n-1)``."""
        out = []
        for n, lam_tok, mu in itertools.product(self.n, self.lam, self.mu):
            lam = _resolve_lambda(lam_tok, n)
            out.append(Params(n, lam, mu))
        return out


def _resolve_lambda(tok, n: int) -> float:
    if isinstance(tok, str):
        m = _CRIT.match(tok)
        if m:
            return float(m.group(1)) / (n - 1)
        return float(tok)
    return float(tok)


def _num_label(x: float) -> str:
    return format(x, ".12g")


def stem(p: Params) -> str:
    return f"n{p.n}_lam{_num_label(p.lam)}_mu{_num_label(p.mu)}"


def _split(text: str) -> list:
    parts = []
    depth = 0
    cur = ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    parts.append(cur.strip())
    return [s for s in parts if s]


def _ints(field_name):
    def parse(text):
        try:
            return [int(s) for s in _split(text)]
        except ValueError:
            raise argparse.ArgumentTypeError(f"{field_name}: expected comma-separated integers, got {text!r}")
    return parse


def _floats(field_name, allow_crit=False):
    def parse(text):
        out = []
        for s in _split(text):
            if allow_crit and _CRIT.match(s):
                out.append(s)
                continue
            try:
                out.append(float(s))
            except ValueError:
                raise argparse.ArgumentTypeError(f"{field_name}: cannot parse {s!r}")
        return out
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="imcf-soliton",
        description="Integrate and check rotationally symmetric IMCF soliton profiles.",
    )
    ap.add_argument("--n", type=_ints("n"), default=[2], help="dimension(s), comma list")
    ap.add_argument("--lambda", dest="lam", type=_floats("lambda", allow_crit=True), default=[2.0],
                    help="soliton constant(s); entries like '1.1/(n-1)' scale the critical value")
    ap.add_argument("--mu", type=_floats("mu"), default=[1.0], help="initial radius/radii")
    ap.add_argument("--y-max", type=float, default=DEFAULT_Y_MAX)
    ap.add_argument("--rtol", type=float, default=Tolerances().rel)
    ap.add_argument("--atol", type=float, default=Tolerances().abs)
    ap.add_argument("--eta", type=float, default=None, help="Picard ball radius (default mu/4)")
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--format", default="csv,json", help="subset of csv,json,svg")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--growth-margin", type=float, default=DEFAULT_GROWTH_MARGIN,
                    help="growth proxy requires r(y_max) > (1 + margin) mu")
    ap.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="random pairs in the contraction check")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    formats = tuple(s.strip() for s in ns.format.split(",") if s.strip())
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        raise ParamError(f"unknown format(s) {bad}; choose from {FORMATS}", field="format")
    if ns.jobs < 1:
        raise ParamError("--jobs must be >= 1", field="jobs")
    if ns.trials < 1:
        raise ParamError("--trials must be >= 1", field="trials")
    if not ns.y_max > 0:
        raise ParamError(f"--y-max must be positive, got {ns.y_max}", field="y_max")
    cfg = RunConfig(
        n=ns.n, lam=ns.lam, mu=ns.mu, y_max=ns.y_max, tol=Tolerances(ns.rtol, ns.atol),
        eta=ns.eta, output_dir=ns.out, formats=formats, seed=ns.seed, jobs=ns.jobs,
        growth_margin=ns.growth_margin, trials=ns.trials,
    )
    for p in cfg.triples():
        if cfg.eta is not None and not (0 < cfg.eta <= p.mu / 4):
            raise ParamError(f"--eta must lie in (0, mu/4] for every mu (mu={p.mu:g})", field="eta")
    return cfg


def run_triple(p: Params, cfg: RunConfig) -> dict:
    """Full pipeline for one triple; writes its files and returns a summary record."""
    prof = integrate_profile(p, cfg.y_max, cfg.tol)
    report = full_report(
        p, cfg.y_max, cfg.tol, eta=cfg.eta, seed=cfg.seed, trials=cfg.trials,
        growth_margin=cfg.growth_margin, profile=prof,
    )
    full = reflect_even(prof)
    files = []
    base = cfg.output_dir / stem(p)
    if "csv" in cfg.formats:
        files.append(emit_csv(full, base.with_name(f"profile_{stem(p)}.csv")).name)
    if "json" in cfg.formats:
        files.append(emit_json_report(report, base.with_name(f"report_{stem(p)}.json")).name)
    if "svg" in cfg.formats:
        files.append(emit_svg(full, report, base.with_name(f"plot_{stem(p)}.svg")).name)
    a1 = report.a1_ci
    return {
        "params": {"n": p.n, "lambda": p.lam, "mu": p.mu},
        "regime": report.regime.value,
        "termination": report.termination.value,
        "y1": report.y1,
        "a1_bracket": list(a1) if a1 is not None else None,
        "checks_passed": report.n_passed,
        "checks_applicable": report.n_applicable,
        "failed": [c.name for c in report.checks if c.applicable and not c.passed],
        "passed": report.passed,
        "files": files,
        "error": None,
    }


def _run_triple_safe(args) -> dict:
    p, cfg = args
    try:
        return run_triple(p, cfg)
    except Exception as exc:  # one triple must not sink the sweep
        return {
            "params": {"n": p.n, "lambda": p.lam, "mu": p.mu},
            "passed": False,
            "files": [],
            "error": f"{type(exc).__name__}: {exc}",
        }


def summary_line(rec: dict) -> str:
    pr = rec["params"]
    head = f"n={pr['n']} lambda={pr['lambda']:.12g} mu={pr['mu']:.12g}"
    if rec.get("error"):
        return f"{head} ERROR {rec['error']}"
    y1 = "-" if rec["y1"] is None else f"{rec['y1']:.8g}"
    a1 = "-" if rec["a1_bracket"] is None else "[{:.6g}, {:.6g}]".format(*rec["a1_bracket"])
    verdict = "PASS" if rec["passed"] else "FAIL(" + ",".join(rec["failed"]) + ")"
    return (f"{head} regime={rec['regime']} end={rec['termination']} y1={y1} a1 in {a1} "
            f"checks {rec['checks_passed']}/{rec['checks_applicable']} {verdict}")


def run(cfg: RunConfig, stream=None) -> int:
    """Execute a sweep; returns the process exit status (0 all pass, 1 any failure)."""
    stream = stream or sys.stdout
    triples = cfg.triples()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    records = []
    manifest_path = cfg.output_dir / "manifest.json"
    complete = False
    try:
        work = [(p, cfg) for p in triples]
        if cfg.jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                for rec in pool.map(_run_triple_safe, work):
                    records.append(rec)
                    print(summary_line(rec), file=stream, flush=True)
        else:
            for item in work:
                rec = _run_triple_safe(item)
                records.append(rec)
                print(summary_line(rec), file=stream, flush=True)
        complete = True
    finally:
        manifest = {
            "schema_version": "1",
            "complete": complete,
            "triples": len(triples),
            "finished": len(records),
            "all_passed": complete and all(r["passed"] for r in records),
            "runs": records,
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, allow_nan=False) + "\n",
                                 encoding="utf-8", newline="\n")
    return 0 if manifest["all_passed"] else 1


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(ns)
        cfg.triples()
    except ParamError as exc:
        field_name = getattr(exc, "field", None)
        print(f"imcf-soliton: invalid {field_name or 'configuration'}: {exc}", file=sys.stderr)
        return 2
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"imcf-soliton: invalid out: {exc}", file=sys.stderr)
        return 2
    log.info("running %d triple(s) into %s", len(cfg.triples()), cfg.output_dir)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
