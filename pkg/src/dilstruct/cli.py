"""Experiment runner: declarative configs, deterministic seeds, report
bundles with a pass/fail rollup.

Exit codes: 0 all checks passed, 1 at least one check failed, 2
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import difflib
import io
import json
import pathlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dilstruct import gh as ghmod
from dilstruct import profiles as prof
from dilstruct.coherent import CoherentProjection, chow_connect
from dilstruct.dilation import verify_axioms, build_tangent_model, TangentConstructionError
from dilstruct.length import CCConfig, cc_distance, gamma_diagnostic, tempered_check
from dilstruct.metric import FiniteMetricSpace, PolylineCurve
from dilstruct.spaces import SpaceSpecError, construct_space


class ConfigError(ValueError):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, line: int, col: int, msg: str):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


@dataclass
class ExperimentConfig:
    name: str
    op: str
    params: dict
    seed: int


@dataclass
class ReportBundle:
    experiments: list = field(default_factory=list)  # dicts: name/op/passed/summary/tables

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.experiments)

    def to_json(self) -> str:
        doc = {
            "passed": self.passed,
            "experiments": [
                {k: e[k] for k in ("name", "op", "passed", "summary")} for e in self.experiments
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1)


def parse_config_text(text: str) -> tuple[dict, list[ExperimentConfig]]:
    """Key/value + [section] grammar; sections are experiments, top-level
    keys are suite defaults.  Values keep their string form; runners coerce."""
    defaults: dict = {}
    sections: list[tuple[str, dict]] = []
    current: dict | None = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigParseError(ln, len(line), "unterminated section header")
            name = stripped[1:-1].strip()
            if not name:
                raise ConfigParseError(ln, 2, "empty section name")
            current = {}
            sections.append((name, current))
            continue
        if "=" not in stripped:
            raise ConfigParseError(ln, raw.index(stripped[0]) + 1, "expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigParseError(ln, 1, "empty key")
        target = defaults if current is None else current
        target[key] = value.strip()
    experiments = []
    for name, body in sections:
        merged = dict(defaults)
        merged.update(body)
        if "op" not in merged:
            raise ConfigError(f"experiment {name!r} has no op")
        seed = merged.get("seed")
        if seed is None:
            raise ConfigError(f"experiment {name!r} has no seed (reproducibility)")
        experiments.append(
            ExperimentConfig(name=name, op=str(merged.pop("op")), params=merged, seed=int(seed))
        )
    return defaults, experiments


def parse_config_json(text: str) -> tuple[dict, list[ExperimentConfig]]:
    doc = json.loads(text)
    defaults = {str(k): v for k, v in doc.get("defaults", {}).items()}
    experiments = []
    for i, e in enumerate(doc.get("experiments", [])):
        merged = dict(defaults)
        merged.update(e)
        name = str(merged.pop("name", f"experiment{i}"))
        if "op" not in merged:
            raise ConfigError(f"experiment {name!r} has no op")
        seed = merged.get("seed")
        if seed is None:
            raise ConfigError(f"experiment {name!r} has no seed (reproducibility)")
        experiments.append(
            ExperimentConfig(name=name, op=str(merged.pop("op")), params=merged, seed=int(seed))
        )
    return defaults, experiments


def load_config(path) -> list[ExperimentConfig]:
    text = pathlib.Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_config_json(text)[1]
    return parse_config_text(text)[1]


# -- runners --------------------------------------------------------------

def _floats(value, default=None):
    if value is None:
        return default
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split()]


def _sample_points(S, x, n, radius, rng):
    pts = []
    while len(pts) < n:
        cand = x + radius * rng.uniform(-1.0, 1.0, size=S.dim)
        try:
            if S.dist(x, cand) <= radius:
                pts.append(cand)
        except Exception:
            continue
    return pts


def _base_point(S, params):
    x = params.get("base")
    if x is None:
        return np.zeros(S.dim)
    return np.asarray(_floats(x), dtype=float)


def run_validate_axioms(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "euclidean 2"))
    rng = np.random.default_rng(cfg.seed)
    x = _base_point(S, cfg.params)
    radius = float(cfg.params.get("radius", 0.3))
    n = int(cfg.params.get("samples", 6))
    sample = [x] + _sample_points(S, x, n, radius, rng)
    report = verify_axioms(S, sample, rng=rng)
    return {
        "passed": report.ok,
        "summary": report.to_dict(),
        "tables": {"axioms": report.csv_rows()},
    }


def run_tangent(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "heisenberg"))
    rng = np.random.default_rng(cfg.seed)
    x = _base_point(S, cfg.params)
    radius = float(cfg.params.get("radius", 0.3))
    n = int(cfg.params.get("samples", 5))
    sample = _sample_points(S, x, n, radius, rng)
    try:
        model = build_tangent_model(S, x, sample)
        return {
            "passed": True,
            "summary": {"residuals": {k: float(v) for k, v in model.residuals.items()}},
            "tables": {},
        }
    except TangentConstructionError as exc:
        return {"passed": False, "summary": {"error": str(exc)}, "tables": {}}


def run_gh(cfg: ExperimentConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.params.get("points", 3))
    dim = int(cfg.params.get("dim", 2))
    src = FiniteMetricSpace.from_points(rng.uniform(0, 1, (n, dim)))
    dst = FiniteMetricSpace.from_points(rng.uniform(0, 1, (n, dim)))
    if len(src) * len(dst) <= int(cfg.params.get("cap", ghmod.DEFAULT_CAP)):
        res = ghmod.gh_exact_small(src, dst)
    else:
        res = ghmod.gh_upper_bound(src, dst)
    return {
        "passed": True,
        "summary": {"value": res.value, "kind": res.kind},
        "tables": {"witness": [[a, b] for a, b in sorted(res.witness.pairs)]},
    }


def run_profile(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "sphere"))
    x = _base_point(S, cfg.params)
    n = int(cfg.params.get("samples", 8))
    eps_list = _floats(cfg.params.get("eps"), [0.4, 0.2, 0.1, 0.05])
    series = prof.sample_profile(S, x, n, eps_list, seed=cfg.seed)
    rows = series.csv_rows()
    return {
        "passed": True,
        "summary": {"distortions": {str(e): float(prof.profile_distortion(series, e)) for e in eps_list}},
        "tables": {"profile": rows},
    }


def run_curvdim(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "sphere"))
    x = _base_point(S, cfg.params)
    n = int(cfg.params.get("samples", 12))
    eps_list = _floats(cfg.params.get("eps"), [0.4, 0.2, 0.1, 0.05])
    series = prof.sample_profile(S, x, n, eps_list, seed=cfg.seed)
    est = prof.curvdim_estimate(series)
    summary = {
        "flat": est.flat,
        "slope": est.slope,
        "r2": est.r2,
    }
    passed = True
    if "expect_flat" in cfg.params:
        passed = est.flat == (str(cfg.params["expect_flat"]).lower() == "true")
    if est.slope is not None and "expect_slope" in cfg.params:
        lo, hi = _floats(cfg.params["expect_slope"])
        passed = passed and lo <= est.slope <= hi
    if not est.flat and "log3" in S.meta:
        k = prof.sectional_curvature_from_profile(series, est, S.meta["log3"])
        summary["curvature"] = k
        if "expect_curvature" in cfg.params:
            target, rel = _floats(cfg.params["expect_curvature"])
            passed = passed and abs(k - target) <= rel * abs(target)
    return {"passed": passed, "summary": summary, "tables": {"profile": series.csv_rows()}}


def run_cc_distance(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "heisenberg"))
    x = _base_point(S, cfg.params)
    y = np.asarray(_floats(cfg.params.get("target", "1 0 0")), dtype=float)
    cc_cfg = CCConfig(seed=cfg.seed)
    if "multistarts" in cfg.params:
        cc_cfg.multistarts = int(cfg.params["multistarts"])
    res = cc_distance(S, x, y, cc_cfg)
    passed = bool(res.converged)
    if "expect" in cfg.params:
        target, rel = _floats(cfg.params["expect"])
        passed = passed and abs(res.value - target) <= rel * abs(target)
    return {
        "passed": passed,
        "summary": {
            "value": res.value,
            "endpoint_error": res.endpoint_error,
            "converged": res.converged,
        },
        "tables": {"trace": [[int(s), float(w), float(l), float(e)] for s, w, l, e in res.trace]},
    }


def run_chow(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "heisenberg"))
    G = S.meta.get("group")
    if G is None:
        raise ConfigError("chow requires a Carnot space")
    P = CoherentProjection(group=G)
    rng = np.random.default_rng(cfg.seed)
    x = _base_point(S, cfg.params)
    n_targets = int(cfg.params.get("targets", 20))
    radius = float(cfg.params.get("radius", 0.5))
    n_letters = int(cfg.params.get("letters", 4))
    tol = float(cfg.params.get("tol", 1e-6))
    worst = 0.0
    rows = []
    for _ in range(n_targets):
        z = _sample_points(S, x, 1, radius, rng)[0]
        sol = chow_connect(P, x, z, n_letters=n_letters)
        worst = max(worst, sol.endpoint_error)
        rows.append([float(sol.endpoint_error), float(sol.fitted_constant)] + sol.segment_lengths)
    return {
        "passed": worst < tol,
        "summary": {"targets": n_targets, "max_endpoint_error": worst},
        "tables": {"solutions": rows},
    }


def run_tempered(cfg: ExperimentConfig) -> dict:
    S_test = construct_space(cfg.params.get("space", "euclidean 2"))
    S_bg = construct_space(cfg.params.get("background", cfg.params.get("space", "euclidean 2")))
    rng = np.random.default_rng(cfg.seed)
    x = _base_point(S_bg, cfg.params)
    radius = float(cfg.params.get("radius", 0.3))
    pts = _sample_points(S_bg, x, 8, radius, rng)
    pairs = list(zip(pts[::2], pts[1::2]))
    report = tempered_check(S_test, S_bg, x, pairs)
    passed = True
    if "expect_pass" in cfg.params:
        passed = report.passed == (str(cfg.params["expect_pass"]).lower() == "true")
    return {
        "passed": passed,
        "summary": {
            "c_low": report.c_low,
            "C_high": report.C_high,
            "tempered": report.passed,
            "slope": report.slope,
        },
        "tables": {},
    }


def run_gamma(cfg: ExperimentConfig) -> dict:
    S = construct_space(cfg.params.get("space", "euclidean 2"))
    x = _base_point(S, cfg.params)
    rng = np.random.default_rng(cfg.seed)
    n_knots = int(cfg.params.get("knots", 16))
    radius = float(cfg.params.get("radius", 0.2))
    ts = np.linspace(0.0, 1.0, n_knots)
    a, b = (x + radius * rng.standard_normal(S.dim) for _ in range(2))
    pts = np.array([x + t * (a - x) + t * (1 - t) * (b - x) for t in ts])
    curve = PolylineCurve(knots=ts, samples=pts)
    report = gamma_diagnostic(S, x, [curve])
    return {
        "passed": True,
        "summary": {
            "recovery_gap": report.max_recovery_gap,
            "liminf_slack": report.max_liminf_slack,
        },
        "tables": {"scales": [[i, v] for i, v in enumerate(report.curves[0].scale_values)]},
    }


RUNNERS = {
    "validate-axioms": run_validate_axioms,
    "tangent": run_tangent,
    "gh": run_gh,
    "profile": run_profile,
    "curvdim": run_curvdim,
    "cc-distance": run_cc_distance,
    "chow": run_chow,
    "tempered": run_tempered,
    "gamma": run_gamma,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.op not in RUNNERS:
        hints = difflib.get_close_matches(cfg.op, RUNNERS, n=3)
        raise ConfigError(f"unknown operation {cfg.op!r}; did you mean: {', '.join(hints) or '?'}")
    out = RUNNERS[cfg.op](cfg)
    out["name"] = cfg.name
    out["op"] = cfg.op
    return out


def run_suite(experiments, jobs: int = 1) -> ReportBundle:
    bundle = ReportBundle()
    if jobs <= 1:
        results = [run_experiment(e) for e in experiments]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_experiment, experiments))
    bundle.experiments = results  # submission order == config order
    return bundle


def emit_report(bundle: ReportBundle, out_dir, fmt: str = "both") -> list:
    """Write the bundle: bundle.json and one CSV per table.  Outputs are
    byte-stable for identical inputs."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        p = out / "bundle.json"
        p.write_text(bundle.to_json() + "\n")
        written.append(p)
    if fmt in ("csv", "both"):
        for e in bundle.experiments:
            for tname, rows in e.get("tables", {}).items():
                p = out / f"{e['name']}.{tname}.csv"
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                for row in rows:
                    w.writerow([repr(v) if isinstance(v, float) else v for v in row])
                p.write_text(buf.getvalue())
                written.append(p)
    return written


def _single_experiment_from_args(op: str, args) -> ExperimentConfig:
    params = {}
    if args.space:
        params["space"] = " ".join(args.space)
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"bad --param {item!r}, expected key=value")
        k, _, v = item.partition("=")
        params[k.strip()] = v.strip()
    return ExperimentConfig(name=op, op=op, params=params, seed=args.seed if args.seed is not None else 0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dilstruct", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default="dilstruct-report")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--format", choices=["json", "csv", "both"], default="both")

    sub.add_parser("run", parents=[common], help="run a config suite")
    rep = sub.add_parser("report", parents=[common], help="re-emit an existing bundle")
    rep.add_argument("bundle", type=str)
    for op in RUNNERS:
        p = sub.add_parser(op, parents=[common])
        p.add_argument("space", nargs="*", help="space spec, e.g. euclidean 2")
        p.add_argument("--param", action="append", help="extra key=value parameter")

    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2
    try:
        if args.command == "run":
            if not args.config:
                raise ConfigError("run requires --config")
            experiments = load_config(args.config)
            if args.seed is not None:
                for e in experiments:
                    e.seed = args.seed
        elif args.command == "report":
            doc = json.loads(pathlib.Path(args.bundle).read_text())
            bundle = ReportBundle(experiments=[dict(e, tables={}) for e in doc["experiments"]])
            emit_report(bundle, args.out, args.format)
            return 0 if bundle.passed else 1
        else:
            experiments = [_single_experiment_from_args(args.command, args)]
        bundle = run_suite(experiments, jobs=args.jobs)
        emit_report(bundle, args.out, args.format)
        for e in bundle.experiments:
            print(f"{'PASS' if e['passed'] else 'FAIL'} {e['name']} ({e['op']})")
        return 0 if bundle.passed else 1
    except (ConfigError, SpaceSpecError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
