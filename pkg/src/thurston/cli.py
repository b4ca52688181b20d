"""Batch front-end: ``thurston <command> --config run.json --out DIR``.

Commands write plot-ready CSV plus a ``summary.json``.  Every file starts
with the git-describe of the package checkout and a hash of the resolved
config, so two runs with equal config and seed produce identical bytes.

Exit codes: 0 on success, 1 when a computed invariant fails (outputs are
kept and the summary has ``"complete": false``), 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__

COMMANDS = ("decompose", "pressure", "equidistribute", "ldp", "tail-entropy", "witness")
ESTIMATORS = ("preimage_deg", "preimage_weighted", "periodic", "separated_oracle")

DEFAULTS = {
    "map": "shipped",
    "potential": "shipped",
    "n_min": 1,
    "n_max": 12,
    "weights": "localDegree",
    "estimators": ["preimage_deg", "preimage_weighted", "periodic"],
    "budgets": {"cells": None, "tree": 1 << 22, "time": 3600},
    "level": 3,
    "eps": [0.1, 0.2, 0.3],
    "ldp_n_max": 14,
    "burn_in": 8,
    "radii": [None, 0.2, 0.1, 0.05],
    "ref_level": 14,
    "equidist_levels": [8, 14],
    "separated": {"eps": 0.2, "n_max": 3, "grid": 60000},
    "witness": {"kind": "not_h_expansive", "m": 1, "l": None, "s": None, "rule": "shipped"},
    "tail": {"power": 3, "m_values": [40, 80, 160, 320], "l_offset": 5, "n_max": 12, "samples": 50000},
}


class ConfigError(ValueError):
    pass


# -- config ------------------------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {k!r}")
        out[k] = _merge(base[k], v) if isinstance(base[k], dict) and isinstance(v, dict) else v
    return out


def load_config(path: str | None, seed: int, strict: bool, jobs: int) -> dict:
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        base_dir = Path(path).resolve().parent
        for key in ("map",):
            if isinstance(raw.get(key), str) and raw[key] != "shipped":
                raw[key] = str((base_dir / raw[key]).resolve())
    cfg = _merge(DEFAULTS, raw)
    cfg["seed"] = seed
    cfg["strict_margins"] = strict
    cfg["jobs"] = jobs
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if not (isinstance(cfg["n_min"], int) and isinstance(cfg["n_max"], int) and 1 <= cfg["n_min"] <= cfg["n_max"]):
        raise ConfigError("n range must be nonempty with 1 <= n_min <= n_max")
    if cfg["weights"] not in ("localDegree", "unit"):
        raise ConfigError(f"unknown weight scheme {cfg['weights']!r}")
    bad = [e for e in cfg["estimators"] if e not in ESTIMATORS]
    if bad:
        raise ConfigError(f"unknown estimators {bad}")
    for name, value in cfg["budgets"].items():
        if value is not None and not (isinstance(value, (int, float)) and value > 0):
            raise ConfigError(f"budget {name!r} must be positive")
    if not isinstance(cfg["level"], int) or cfg["level"] < 0:
        raise ConfigError("level must be a nonnegative integer")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be positive")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=10, check=True,
        )
        return out.stdout.strip() or f"v{__version__}"
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"


# -- inputs ------------------------------------------------------------------------------------


def _load_map(spec):
    from .sphere_map import load_map_spec, map_from_spec, shipped_map

    if spec == "shipped":
        return shipped_map()
    if isinstance(spec, dict):
        return map_from_spec(spec)
    return load_map_spec(spec)


def _load_rule(spec):
    from .sphere_map import load_map_spec, shipped_subdivision_rule

    return shipped_subdivision_rule() if spec == "shipped" else load_map_spec(spec)


def _load_potential(spec):
    from .potentials import potential_from_spec, shipped_potential, zero_potential

    if spec == "shipped":
        return shipped_potential()
    if spec == "zero":
        return zero_potential()
    if isinstance(spec, dict):
        return potential_from_spec(spec)
    raise ConfigError(f"bad potential spec {spec!r}")


def _rational(backend):
    if getattr(backend, "kind", None) != "rational":
        raise ConfigError("this command needs a rational map")
    return backend


# -- output ------------------------------------------------------------------------------------


class Writer:
    """Single writer for one run; every file gets the same header."""

    def __init__(self, out: Path, cfg: dict):
        self.out = out
        self.header = {"git_describe": git_describe(), "config_hash": config_hash(cfg)}
        out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name: str, columns, rows) -> None:
        buf = io.StringIO()
        buf.write(f"# git-describe: {self.header['git_describe']}\n")
        buf.write(f"# config-hash: {self.header['config_hash']}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(columns)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])
        self._write(name, buf.getvalue())

    def text(self, name: str, body: str) -> None:
        head = f"# git-describe: {self.header['git_describe']}\n# config-hash: {self.header['config_hash']}\n"
        self._write(name, head + body)

    def json(self, name: str, data: dict) -> None:
        payload = {"header": self.header, **data}
        self._write(name, json.dumps(_jsonable(payload), indent=1, sort_keys=True) + "\n")

    def _write(self, name, body):
        (self.out / name).write_text(body)
        self.files.append(name)


def _fmt(x):
    if isinstance(x, float) or isinstance(x, np.floating):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Clock:
    def __init__(self, limit):
        self.start = time.monotonic()
        self.limit = limit

    def expired(self) -> bool:
        return self.limit is not None and time.monotonic() - self.start > self.limit


def _pool_map(fn, items, jobs):
    if jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- commands ----------------------------------------------------------------------------------


def cmd_decompose(cfg, w: Writer) -> dict:
    from .cell_complex import build_level, incidence_json, tiles_csv, vertices_csv

    backend = _load_map(cfg["map"])
    lev = build_level(backend, cfg["level"])
    w.text("tiles.csv", tiles_csv(lev))
    w.text("vertices.csv", vertices_csv(lev))
    w.json("incidence.json", json.loads(incidence_json(lev)))
    checks = lev.check_invariants(backend.degree)
    return {
        "level": lev.n,
        "counts": {"tiles": lev.n_tiles, "edges": lev.n_edges, "vertices": lev.n_vertices},
        "euler_characteristic": lev.euler_characteristic(),
        "checks": checks,
    }


def cmd_pressure(cfg, w: Writer) -> dict:
    from .sphere_map import WeightScheme
    from .thermo import cached_fixed_points, pressure_periodic, pressure_preimage, separated_growth

    backend = _rational(_load_map(cfg["map"]))
    phi = _load_potential(cfg["potential"])
    n_min, n_max = cfg["n_min"], cfg["n_max"]
    deg_w = WeightScheme("localDegree")

    def run(kind):
        if kind == "preimage_deg":
            return pressure_preimage(backend, phi, deg_w, n_max=n_max, n_min=n_min)
        if kind == "preimage_weighted":
            # Unit weights are undefined with a periodic critical point.
            if backend.has_periodic_critical_point():
                return None
            return pressure_preimage(backend, phi, WeightScheme("unit"), n_max=n_max, n_min=n_min)
        return pressure_periodic(backend, phi, deg_w, n_max=n_max, n_min=n_min)

    main = [e for e in cfg["estimators"] if e != "separated_oracle"]
    series = [s for s in _pool_map(run, main, cfg["jobs"]) if s is not None]
    rows = [(s.kind, n, ls, v) for s in series for n, ls, v in s.entries]
    summary = {"limits": {s.kind: s.limit for s in series}}
    if "separated_oracle" in cfg["estimators"]:
        sep = cfg["separated"]
        for n in range(1, sep["n_max"] + 1):
            g = separated_growth(backend, phi, sep["eps"], n, grid=sep["grid"])
            rows.append(("separated_oracle", n, "", g))
        summary["separated_growth_note"] = "value column holds log-sum growth relative to phi = 0"
    w.csv("pressure.csv", ["estimator", "n", "log_sum", "value"], rows)
    fp_rows = []
    for n in range(n_min, n_max + 1):
        fp = cached_fixed_points(backend, n)
        for z, wq, d in zip(fp.z, fp.w, fp.deg):
            if abs(wq) < 1e-300:
                fp_rows.append((n, "inf", "inf", int(d)))
            else:
                x = z / wq
                fp_rows.append((n, float(x.real), float(x.imag), int(d)))
    w.csv("fixed_points.csv", ["n", "re", "im", "deg"], fp_rows)
    limits = list(summary["limits"].values())
    gap = max(abs(a - b) for a in limits for b in limits) if limits else 0.0
    summary["consensus"] = math.fsum(limits) / len(limits) if limits else None
    summary["max_pairwise_gap"] = gap
    checks = {"consensus_within_0.05": gap <= 0.05}
    if phi.is_zero:
        deg_series = next((s for s in series if s.kind == "preimage_deg"), None)
        if deg_series is not None:
            checks["zero_potential_log_deg"] = all(
                abs(v - math.log(backend.degree)) <= 1e-12 for v in deg_series.values
            )
    checks["fixed_point_counts"] = all(
        cached_fixed_points(backend, n).weighted_count == 1 + backend.degree**n for n in range(n_min, n_max + 1)
    )
    summary["checks"] = checks
    return summary


def _trend_violations(values) -> int:
    return sum(1 for a, b in zip(values, values[1:]) if not b < a)


def cmd_equidistribute(cfg, w: Writer) -> dict:
    from .ldp import GAUGE, equidistribution_measures, reference_measure
    from .sphere_map import WeightScheme

    backend = _rational(_load_map(cfg["map"]))
    phi = _load_potential(cfg["potential"])
    lo, hi = cfg["equidist_levels"]
    weights = WeightScheme(cfg["weights"])
    ns = list(range(lo, hi + 1))
    ref = reference_measure(backend, phi, cfg["ref_level"])
    meas = _pool_map(lambda n: equidistribution_measures(backend, phi, weights, n_range=[n])[0], ns, cfg["jobs"])
    xi_hat = {n: reference_measure(backend, phi, n) for n in range(lo, hi + 2)}
    rows, mrows = [], []
    nu_eta, succ = [], []
    for n, nu, eta in meas:
        rows.append((n, "nu", GAUGE.distance(nu, ref)))
        rows.append((n, "eta", GAUGE.distance(eta, ref)))
        rows.append((n, "xi_hat", GAUGE.distance(xi_hat[n], ref)))
        rows.append((n, "nu_vs_eta", GAUGE.distance(nu, eta)))
        rows.append((n, "xi_hat_successive", GAUGE.distance(xi_hat[n], xi_hat[n + 1])))
        nu_eta.append(GAUGE.distance(nu, eta))
        succ.append(GAUGE.distance(xi_hat[n], xi_hat[n + 1]))
        for z, wq, p in zip(eta.z, eta.w, eta.weight):
            x = complex(z / wq) if abs(wq) > 1e-300 else complex(math.inf, math.inf)
            mrows.append(("eta", n, x.real, x.imag, float(p)))
    w.csv("equidist.csv", ["n", "kind", "gauge_distance_to_ref"], rows)
    w.csv("measures.csv", ["kind", "n", "re", "im", "weight"], mrows)
    v1, v2 = _trend_violations(nu_eta), _trend_violations(succ)
    return {
        "reference_level": cfg["ref_level"],
        "nu_vs_eta": nu_eta,
        "xi_hat_successive": succ,
        "trend_violations": {"nu_vs_eta": v1, "xi_hat_successive": v2},
        "checks": {"nu_vs_eta_decreasing": v1 <= 1, "xi_hat_successive_decreasing": v2 <= 1},
    }


def cmd_ldp(cfg, w: Writer) -> dict:
    from .ldp import (
        GAUGE,
        adversarial_base,
        concentration_curve,
        constrained_pressure,
        omega_sequence,
        rate_function_eval,
        reference_measure,
    )
    from .sphere_map import WeightScheme
    from .thermo import consensus_pressure

    backend = _rational(_load_map(cfg["map"]))
    phi = _load_potential(cfg["potential"])
    weights = WeightScheme(cfg["weights"])
    n_max = cfg["ldp_n_max"]
    if backend.degree**n_max > cfg["budgets"]["tree"]:
        raise ConfigError("tree budget exceeded")
    ref = reference_measure(backend, phi, cfg["ref_level"])
    sources = {
        "preimage": lambda: omega_sequence(backend, phi, weights, "preimage", None, n_max),
        "preimage_adversarial": lambda: omega_sequence(backend, phi, weights, "preimage", adversarial_base(backend), n_max),
        "periodic": lambda: omega_sequence(backend, phi, weights, "periodic", None, n_max),
    }
    names = list(sources)
    omegas = dict(zip(names, _pool_map(lambda k: sources[k](), names, cfg["jobs"])))
    rows, violations = [], {}
    for eps in cfg["eps"]:
        for name in names:
            curve = concentration_curve(omegas[name], ref, eps)
            rows.extend((n, f"{name}@eps={eps}", mass, rate) for n, mass, rate in curve)
            masses = [m for n, m, _ in curve if n >= cfg["burn_in"]]
            violations[f"{name}@eps={eps}"] = sum(1 for a, b in zip(masses, masses[1:]) if b > a)
    w.csv("ldp.csv", ["n", "source", "outside_mass", "empirical_rate"], rows)
    center = GAUGE.coords(ref)
    crow, by_radius = [], {}
    for r in cfg["radii"]:
        radius = math.inf if r is None else float(r)
        entries = constrained_pressure(omegas["preimage"], [(t, center[t], radius) for t in range(len(GAUGE))])
        by_radius[radius] = [v for _, v in entries]
        crow.extend((n, radius, v) for n, v in entries)
    w.csv("constrained.csv", ["n", "radius", "value"], crow)
    radii = sorted(by_radius)
    nested = all(
        all(a <= b for a, b in zip(by_radius[r1], by_radius[r2])) for r1, r2 in zip(radii, radii[1:])
    )
    cons = consensus_pressure(backend, phi, cfg["n_max"])
    rates = {lab: rate_function_eval(lab, backend, phi, cons["value"], cfg["n_max"])
             for lab in ("equilibrium", "max_entropy")}
    # Only the constant-base preimage curves are asserted; the others are reported.
    main_monotone = all(v <= 1 for k, v in violations.items() if k.startswith("preimage@"))
    return {
        "pressure_consensus": cons["value"],
        "rate_function": rates,
        "outside_mass_increases_after_burn_in": violations,
        "checks": {
            "outside_mass_monotone": main_monotone,
            "constrained_nested_radii": nested,
            "rate_function_nonnegative": rates["max_entropy"] >= -0.05,
        },
    }


def cmd_tail_entropy(cfg, w: Writer) -> dict:
    from .weak_expansion import conditional_entropy_upper, expansion_constants

    backend = _rational(_load_map(cfg["map"]))
    tail = cfg["tail"]
    consts = expansion_constants(backend, tail["power"], samples=tail["samples"], seed=cfg["seed"])
    rows, limits, symbolic = [], [], True
    for m in tail["m_values"]:
        res = conditional_entropy_upper(consts, m, m + tail["l_offset"], tail["n_max"])
        expected = consts.N_c * math.log(consts.degree) / res["M_m"]
        symbolic &= res["limit"] == expected
        limits.append(res["limit"])
        rows.extend((m, res["M_m"], n, v) for n, v in res["entries"])
        rows.append((m, res["M_m"], "limit", res["limit"]))
    w.csv("tail_entropy.csv", ["m", "M_m", "n", "bound"], rows)
    diagnostic = {}
    for p in (1, 2):
        c = expansion_constants(backend, p, samples=tail["samples"], seed=cfg["seed"])
        diagnostic[f"power_{p}"] = {"constants": c.to_dict(), "M": {m: c.M(m) for m in tail["m_values"]}}
    return {
        "constants": consts.to_dict(),
        "limits": dict(zip(map(str, tail["m_values"]), limits)),
        "diagnostic_lower_powers": diagnostic,
        "checks": {
            "limit_matches_formula": symbolic,
            "limits_decrease": all(b < a for a, b in zip(limits, limits[1:])),
        },
    }


def cmd_witness(cfg, w: Writer) -> dict:
    from .template import TemplateError
    from .weak_expansion import witness_not_asymp_h_expansive, witness_not_h_expansive

    wc = cfg["witness"]
    kind = wc["kind"]
    strict = cfg["strict_margins"]
    if kind == "not_h_expansive":
        backend = _load_map(cfg["map"])
        run = witness_not_h_expansive(backend.engine, wc["m"], wc["l"], wc["s"] or 3, strict=strict)
    elif kind == "not_asymptotically_h_expansive":
        try:
            rule = _load_rule(wc["rule"])
        except (TemplateError, ValueError) as exc:
            w.json("witness.json", {"kind": kind, "status": "blocked", "reason": str(exc)})
            return {"status": "blocked", "checks": {}}
        run = witness_not_asymp_h_expansive(rule.engine, wc["m"], wc["l"], wc["s"] or 2, strict=strict)
    else:
        raise ConfigError(f"unknown witness kind {kind!r}")
    w.json("witness.json", json.loads(run.to_json()))
    return {"status": "certified" if run.ok else "failed", "params": run.params, "cardinalities": run.cards,
            "bound": run.bound, "checks": run.checks}


HANDLERS = {
    "decompose": cmd_decompose,
    "pressure": cmd_pressure,
    "equidistribute": cmd_equidistribute,
    "ldp": cmd_ldp,
    "tail-entropy": cmd_tail_entropy,
    "witness": cmd_witness,
}


# -- entry point -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thurston", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run config (defaults apply when omitted)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strict-margins", action="store_true", help="use the wide margins of the proofs")
        p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    from .cell_complex import BudgetExceeded, HypothesesViolated
    from .weak_expansion import NoAdmissibleCriticalPoint, PeriodicCriticalPoint

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.strict_margins, args.jobs)
        cells = cfg["budgets"]["cells"]
        if cells is not None and "THURSTON_BUDGET_CELLS" not in os.environ:
            os.environ["THURSTON_BUDGET_CELLS"] = str(int(cells))
        writer = Writer(Path(args.out), cfg)
        clock = Clock(cfg["budgets"]["time"])
        summary = HANDLERS[args.command](cfg, writer)
    except (ConfigError, HypothesesViolated, BudgetExceeded, PeriodicCriticalPoint,
            NoAdmissibleCriticalPoint, ValueError) as exc:
        print(f"thurston {args.command}: {exc}", file=sys.stderr)
        return 2
    checks = summary.get("checks", {})
    complete = all(checks.values()) and not clock.expired()
    summary = {"command": args.command, "complete": complete, "files": sorted(writer.files), **summary}
    writer.json("summary.json", summary)
    if not complete:
        print(f"thurston {args.command}: invariant check failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
