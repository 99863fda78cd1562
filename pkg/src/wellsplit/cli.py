"""Command-line experiment runner.

Every subcommand turns the config into a set of named text artifacts (CSV or
JSON). The artifacts are stored in the result cache under a digest of the
config keys the command reads, then written to the output directory, so a
rerun with an unchanged config reproduces them byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .cache import ResultCache, ResultRecord, atomic_write, cache_gc
from .config import ExperimentConfig, load_config
from .dynamics import (LibrationTable, compute_instanton, compute_libration, floquet_spectrum_errors,
                       libration_scan, monodromy_and_floquet, symplectic_defect, truncation_time)
from .errors import AssumptionViolated, CacheCorruption, ConfigError, NoBracket, NumericalError, WellsplitError
from .formulas import (action_expansion_check, crossing_splitting, floquet_exponent_check, ground_splitting,
                       tee_splitting, transverse_splitting)
from .modeltori import CSV_HEADER as TORI_HEADER
from .modeltori import model_table
from .potentials import check_quasi1d_assumptions, locate_minima
from .spectral import full_domain_splittings, herring_splitting, splittings
from .wkb import WkbConstants, wkb_constants

log = logging.getLogger("wellsplit")

EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CACHE = 1, 2, 3


def fmt(x) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def to_csv(header: str, rows) -> str:
    lines = [header] + [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def to_json(obj) -> str:
    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple, np.ndarray)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, float)):
            return float(x)
        if isinstance(x, (np.integer,)):
            return int(x)
        if isinstance(x, np.bool_):
            return bool(x)
        return x
    return json.dumps(clean(obj), sort_keys=True, indent=1) + "\n"


def table_from_csv(text: str) -> LibrationTable:
    rows = read_csv(text)
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    pair = lambda p: np.column_stack([col(f"{p}_1"), col(f"{p}_2")])  # noqa: E731
    return LibrationTable(E=col("E"), T=col("T"), S_E=col("S_E"), beta=col("beta"),
                          x_E=pair("x_E"), yL=pair("yL"), yR=pair("yR"))


def wkb_from_json(text: str) -> WkbConstants:
    rec = json.loads(text)
    rec["x0"] = tuple(rec["x0"])
    return WkbConstants(**rec)


class Context:
    def __init__(self, cfg: ExperimentConfig, cache: ResultCache, jobs: int = 1, seed: int = 0):
        self.cfg = cfg
        self.cache = cache
        self.jobs = max(1, jobs)
        self.seed = seed
        self.pot = cfg.potential()
        self.tol = cfg["tolerances"]["dynamics"]
        self.from_cache = {}

    def key(self, command: str) -> str:
        keys = COMMANDS[command][1]
        picked = {}
        for k in keys:
            section, _, name = k.partition(".")
            if name:
                picked.setdefault(section, {})[name] = self.cfg[section][name]
            else:
                picked[section] = self.cfg[section]
        canon = ExperimentConfig(picked).canonical()
        return ExperimentConfig({"command": command, "config": canon, "seed": self.seed}).digest()

    def fetch(self, command: str) -> tuple[dict, str]:
        """Artifacts of ``command`` (cached or computed) and their config digest."""
        digest = self.key(command)
        rec = self.cache.get(command, digest)
        if rec is not None:
            self.from_cache[command] = True
            return json.loads(rec.payload), digest
        t0 = time.perf_counter()
        artifacts, upstream = COMMANDS[command][0](self)
        log.info("%s computed in %.2f s", command, time.perf_counter() - t0)
        payload = json.dumps(artifacts, sort_keys=True)
        self.cache.put(ResultRecord(command=command, config_digest=digest, payload=payload, upstream=upstream))
        self.from_cache[command] = False
        return artifacts, digest

    def pool_map(self, fn, items):
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(it) for it in items]
        with ProcessPoolExecutor(max_workers=min(self.jobs, len(items))) as ex:
            return list(ex.map(fn, items))


# ---- subcommands ------------------------------------------------------------

def run_inspect(ctx: Context):
    pot = ctx.pot
    left, right = locate_minima(pot)
    info = check_quasi1d_assumptions(pot)
    rec = {"family": pot.family, "params": pot.params, "box": list(pot.box), "lambda1": right.lam1,
           "lambda2": right.lam2, "barrier": pot.barrier, "gap_ok": info["gap_ok"],
           "saddle": list(pot.saddle), "minima": [list(left.minimum), list(right.minimum)],
           "unique_libration_family": info["unique_libration_family"]}
    return {"potential.json": to_json(rec)}, {}


def run_instanton(ctx: Context):
    inst = compute_instanton(ctx.pot, tol=ctx.tol)
    t = inst.times(8)
    path = inst.state(t)
    rec = {"S0": inst.S0, "eps": inst.eps, "t_start": inst.t_start, "crossing": list(inst.crossing),
           "arrival_direction_ok": inst.arrival_direction_ok, "curvature_max": inst.curvature_max,
           "segments": inst.half.n}
    rows = [(ti, *yi) for ti, yi in zip(t, path)]
    return {"instanton.json": to_json(rec), "instanton_path.csv": to_csv("t,x1,x2,xi1,xi2", rows)}, {}


def _scan_chunk(args):
    pot, grid, tol = args
    return list(libration_scan(pot, grid, tol=tol).rows())


def run_scan(ctx: Context):
    sw = ctx.cfg["sweep"]
    E = ctx.pot.barrier * np.geomspace(sw["e_min"], sw["e_max"], sw["n_e"])
    chunks = np.array_split(E, min(ctx.jobs, len(E)))
    rows = [r for part in ctx.pool_map(_scan_chunk, [(ctx.pot, c, ctx.tol) for c in chunks]) for r in part]
    return {"libration_scan.csv": to_csv(LibrationTable.HEADER, rows)}, {}


def run_wkb(ctx: Context):
    inst = compute_instanton(ctx.pot, tol=ctx.tol)
    return {"wkb_constants.json": to_json(wkb_constants(inst).as_record())}, {}


def run_tori(ctx: Context):
    left, right = locate_minima(ctx.pot)
    sw = ctx.cfg["sweep"]
    rows = model_table(left, right, sw["k"], sw["hbar"], ctx.cfg["flags"]["maslov_shift"])
    return {"modeltori.csv": to_csv(TORI_HEADER, rows)}, {}


def _theory_rows(ctx: Context, table: LibrationTable, w: WkbConstants, hbar: float, m: int, arrival_ok: bool):
    assumptions = check_quasi1d_assumptions(ctx.pot)
    out = []
    try:
        out.append(transverse_splitting(table, w.lambda1, w.lambda2, m, hbar, assumptions, arrival_ok,
                                        factor=ctx.cfg["flags"]["splitting_factor"]))
    except (NoBracket, AssumptionViolated) as exc:
        log.warning("transverse row skipped: %s", exc)
    out.append(crossing_splitting(w, m, hbar))
    E = hbar * (1 + 2 * m) * w.lambda1
    if table.E[0] <= E <= table.E[-1]:
        out.append(tee_splitting(w, m, hbar, float(table.S_of(E))))
    if m == 0 and table.E[0] <= w.lambda1 * hbar <= table.E[-1]:
        out.append(ground_splitting(hbar, w.lambda1, table.S_of))
    return out


def _upstream_theory(ctx: Context):
    scan, d_scan = ctx.fetch("libration-scan")
    wkb, d_wkb = ctx.fetch("wkb-constants")
    inst, d_inst = ctx.fetch("instanton")
    table = table_from_csv(scan["libration_scan.csv"])
    w = wkb_from_json(wkb["wkb_constants.json"])
    arrival_ok = json.loads(inst["instanton.json"])["arrival_direction_ok"]
    return table, w, arrival_ok, {"libration-scan": d_scan, "wkb-constants": d_wkb, "instanton": d_inst}


def run_theory(ctx: Context):
    table, w, arrival_ok, upstream = _upstream_theory(ctx)
    rows = []
    for hbar in ctx.cfg["sweep"]["hbar"]:
        for m in ctx.cfg["sweep"]["m"]:
            for est in _theory_rows(ctx, table, w, hbar, m, arrival_ok):
                rows.append(est.row()[:6])
    return {"splitting_theory.csv": to_csv("method,m,hbar,exponent,prefactor,value", rows)}, upstream


def _exact_point(args):
    pot, hbar, grid, count, tol, seed, mode = args
    res = splittings(pot, hbar, grid, count=count, tol=tol, seed=seed)
    full = full_domain_splittings(pot, hbar, grid, count, tol, seed) if mode == "full" else None
    return res, full


def run_exact(ctx: Context):
    cfg = ctx.cfg
    grid = cfg.grid()
    count = cfg["tolerances"]["count"]
    args = [(ctx.pot, h, grid, count, cfg["tolerances"]["lanczos"], ctx.seed, cfg["flags"]["parity_mode"])
            for h in cfg["sweep"]["hbar"]]
    rows, art = [], {}
    for (res, full), h in zip(ctx.pool_map(_exact_point, args), cfg["sweep"]["hbar"]):
        for i, (Ee, Eo) in enumerate(res.pairs):
            lab = res.labels[i] or (-1, -1)
            rows.append((h, lab[0], lab[1], Ee, Eo, Eo - Ee, i in res.ambiguous,
                         float("nan") if full is None else full[i]))
        art[f"spectrum_h{fmt(h)}.csv"] = to_csv("index,parity,E,residual", res.rows())
    art["splitting_exact.csv"] = to_csv("hbar,m,n,E_even,E_odd,splitting,ambiguous,full_domain", rows)
    return art, {}


def _exact_lookup(artifacts: dict) -> dict:
    out = {}
    for r in read_csv(artifacts["splitting_exact.csv"]):
        if r["ambiguous"] == "false" and r["n"] == "0":
            out[(float(r["hbar"]), int(r["m"]))] = float(r["splitting"])
    return out


def run_compare(ctx: Context):
    table, w, arrival_ok, upstream = _upstream_theory(ctx)
    exact_art, d_exact = ctx.fetch("splitting-exact")
    upstream["splitting-exact"] = d_exact
    exact = _exact_lookup(exact_art)
    rows = []
    for hbar in ctx.cfg["sweep"]["hbar"]:
        for m in ctx.cfg["sweep"]["m"]:
            ref = exact.get((hbar, m))
            for est in _theory_rows(ctx, table, w, hbar, m, arrival_ok):
                rows.append(est.row(ref))
            if ref is not None:
                rows.append(("exact", m, hbar, float("nan"), float("nan"), ref, ref, 1.0))
    header = "method,m,hbar,exponent,prefactor,value,exact,ratio"
    return {"splitting_compare.csv": to_csv(header, rows)}, upstream


def _herring_point(args):
    pot, hbar, grid, m, tol, seed, wall = args
    est, x2, f = herring_splitting(pot, hbar, grid, m, tol=tol, seed=seed, wall_offset=wall)
    return est, x2, f


def run_herring(ctx: Context):
    cfg = ctx.cfg
    exact_art, d_exact = ctx.fetch("splitting-exact")
    exact = _exact_lookup(exact_art)
    wall = cfg["flags"]["herring_wall"] * ctx.pot.a
    points = [(h, m) for h in cfg["sweep"]["hbar"] for m in cfg["sweep"]["m"]]
    args = [(ctx.pot, h, cfg.grid(), m, cfg["tolerances"]["lanczos"], ctx.seed, wall) for h, m in points]
    rows, curve = [], []
    for (h, m), (est, x2, f) in zip(points, ctx.pool_map(_herring_point, args)):
        ref = exact.get((h, m), float("nan"))
        rows.append((h, m, est, ref, abs(est - ref) / ref))
        curve.extend((h, m, a, b) for a, b in zip(x2, f))
    return {"herring.csv": to_csv("hbar,m,herring,parity,relative_gap", rows),
            "herring_integrand.csv": to_csv("hbar,m,x2,integrand", curve)}, {"splitting-exact": d_exact}


def run_floquet(ctx: Context):
    wkb, d_wkb = ctx.fetch("wkb-constants")
    w = wkb_from_json(wkb["wkb_constants.json"])
    pot = ctx.pot
    inst = compute_instanton(pot, tol=ctx.tol)
    assumptions = check_quasi1d_assumptions(pot)
    rows = []
    for frac in ctx.cfg["sweep"]["floquet_fractions"]:
        E = frac * pot.barrier
        lib = compute_libration(pot, E, tol=ctx.tol, inst=inst)
        M, beta = monodromy_and_floquet(pot, lib)
        _, formula, gap = floquet_exponent_check(beta, w.lambda2, lib.T, w.T_const, assumptions)
        spec = floquet_spectrum_errors(M, beta, lib.T)
        rows.append((frac, E, lib.T, beta, formula, gap, symplectic_defect(M), spec["unit_mean"],
                     spec["unit_product"]))
    header = "E_fraction,E,T,beta_direct,beta_formula,gap,symplectic_defect,unit_mean_error,unit_product_error"
    return {"floquet_check.csv": to_csv(header, rows)}, {"wkb-constants": d_wkb}


def run_action(ctx: Context):
    pot = ctx.pot
    inst = compute_instanton(pot, tol=ctx.tol)
    lam1 = inst.left.lam1
    rows = []
    for E in ctx.cfg["sweep"]["action_energies"]:
        lib = compute_libration(pot, E, tol=ctx.tol, inst=inst)
        T_full = truncation_time(inst, E)
        rp, qp = action_expansion_check(E, lib.S_E, inst.S0, lam1, T_full, "printed")
        rc, qc = action_expansion_check(E, lib.S_E, inst.S0, lam1, T_full, "corrected")
        rows.append((E, lib.S_E, T_full, rp, qp, rc, qc))
    header = "E,S_E,T_E,r_printed,r_printed_over_E,r_corrected,r_corrected_over_E"
    return {"action_check.csv": to_csv(header, rows)}, {}


# command -> (runner, config keys it reads)
_POT = ["potential", "tolerances.dynamics"]
_SCAN = _POT + ["sweep.e_min", "sweep.e_max", "sweep.n_e"]
_EXACT = ["potential", "grid", "sweep.hbar", "tolerances.lanczos", "tolerances.count", "flags.parity_mode"]
COMMANDS = {
    "inspect-potential": (run_inspect, ["potential"]),
    "instanton": (run_instanton, _POT),
    "libration-scan": (run_scan, _SCAN),
    "wkb-constants": (run_wkb, _POT),
    "modeltori-table": (run_tori, ["potential", "sweep.k", "sweep.hbar", "flags.maslov_shift"]),
    "splitting-theory": (run_theory, _SCAN + ["sweep.hbar", "sweep.m", "flags.splitting_factor"]),
    "splitting-exact": (run_exact, _EXACT),
    "splitting-compare": (run_compare, _SCAN + _EXACT + ["sweep.m", "flags.splitting_factor"]),
    "herring": (run_herring, _EXACT + ["sweep.m", "flags.herring_wall"]),
    "floquet-check": (run_floquet, _POT + ["sweep.floquet_fractions"]),
    "action-check": (run_action, _POT + ["sweep.action_energies"]),
}


def _summary(command: str, art: dict) -> str:
    if command == "inspect-potential":
        r = json.loads(art["potential.json"])
        return (f"lambda1={r['lambda1']:.6g} lambda2={r['lambda2']:.6g} barrier={r['barrier']:.6g} "
                f"gap_ok={str(r['gap_ok']).lower()}")
    if command == "instanton":
        r = json.loads(art["instanton.json"])
        return f"S0={r['S0']:.12g} curvature_max={r['curvature_max']:.4g}"
    if command == "wkb-constants":
        r = json.loads(art["wkb_constants.json"])
        return " ".join(f"{k}={r[k]:.8g}" for k in ("J", "sigma", "P0", "D", "T_const"))
    name = next(k for k in sorted(art) if not k.startswith("spectrum_"))
    rows = read_csv(art[name])
    if command == "splitting-compare":
        parts = [f"{r['method']}(m={r['m']},h={r['hbar']}) ratio={float(r['ratio']):.4g}"
                 for r in rows if r["method"] != "exact"]
        return "; ".join(parts)
    if command == "splitting-exact":
        return "; ".join(f"h={r['hbar']} ({r['m']},{r['n']}) dE={float(r['splitting']):.6e}" for r in rows)
    if command == "floquet-check":
        return "; ".join(f"E/barrier={r['E_fraction']} gap={float(r['gap']):.3e}" for r in rows)
    if command == "herring":
        return "; ".join(f"h={r['hbar']} m={r['m']} gap={float(r['relative_gap']):.3e}" for r in rows)
    return f"{len(rows)} rows in {name}"


def resolve_config(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    stem = p.name if p.suffix == ".ini" else p.name + ".ini"
    bundled = resources.files("wellsplit") / "configs" / stem
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"no config file {name!r} (and no bundled config of that name)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wellsplit", description="Tunneling splittings for symmetric 2-D double wells.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["cache-gc"]:
        p = sub.add_parser(name)
        p.add_argument("--cache-dir", default=".wellsplit-cache")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "cache-gc":
            p.add_argument("--keep-latest", type=int, default=1)
            continue
        p.add_argument("--config", required=True, help="INI file, or the name of a bundled config")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--out", default=None, help="output directory (default: output.directory)")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--hbar", type=float, action="append", help="shortcut for --set sweep.hbar=...")
        p.add_argument("--m", type=int, action="append", help="shortcut for --set sweep.m=...")
    return ap


def run(command: str, config, overrides=(), cache_dir=".wellsplit-cache", out=None, jobs: int = 1,
        seed: int = 0) -> tuple[dict, str, bool]:
    """Run one subcommand; returns (artifacts, config digest, served from cache)."""
    cfg = load_config(resolve_config(str(config)), overrides)
    try:
        cache = ResultCache(cache_dir)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    ctx = Context(cfg, cache, jobs=jobs, seed=seed)
    art, digest = ctx.fetch(command)
    outdir = Path(out if out is not None else cfg["output"]["directory"])
    for name, text in sorted(art.items()):
        atomic_write(outdir / name, text.encode())
    return art, digest, ctx.from_cache[command]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "cache-gc":
        n = cache_gc(args.cache_dir, args.keep_latest)
        print(f"cache-gc: removed {n}")
        return 0
    overrides = list(args.set)
    if args.hbar:
        overrides.append("sweep.hbar=" + ",".join(repr(h) for h in args.hbar))
    if args.m:
        overrides.append("sweep.m=" + ",".join(str(m) for m in args.m))
    t0 = time.perf_counter()
    try:
        art, digest, hit = run(args.command, args.config, overrides, args.cache_dir, args.out, args.jobs, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CacheCorruption as exc:
        print(f"cache corruption: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except (NumericalError, WellsplitError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if hit:
        log.info("%s served from cache in %.3f s", args.command, time.perf_counter() - t0)
    print(f"{args.command} [{digest[:12]}{' cached' if hit else ''}]: {_summary(args.command, art)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
