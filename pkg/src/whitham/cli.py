"""Command-line front end: ``whitham {run,verify,sweep,kernel-study,compare}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import diagnostics, evolve, io, operators, verify
from .config import ConfigError, SweepSpec, load_config
from .evolve import RunRecord, SolverConfig
from .picard import mollify
from .spectral_core import Grid, SpectralField

log = logging.getLogger("whitham")


def _write_record(record: RunRecord, directory: Path, figures: bool = True) -> dict:
    """Persist series, snapshots, energy audit and figures of one run."""
    cfg = record.config
    paths = {"series": str(io.write_csv(directory / "series.csv",
                                        [record.series_header()] + record.series_rows()))}
    snap_dir = directory / "snapshots"
    record.snapshot_paths = []
    for i, t in enumerate(record.times):
        p = io.save_field(snap_dir / f"snap_{i:05d}.bin", record.field_at(i), t,
                          cfg.variant, cfg.eps)
        record.snapshot_paths.append(str(p))
    paths["snapshots"] = record.snapshot_paths
    audit = diagnostics.energy_audit(record)
    paths["energy_series"] = str(io.write_csv(directory / "energy.csv", audit.rows()))
    paths["energy_report"] = str(io.write_json(directory / "energy.json", audit.summary()))
    if figures and record.times:
        from .plotting import plot_run
        paths["figures"] = plot_run(record, directory, audit)
    return paths


def execute_run(cfg: SolverConfig, out_dir, u0: Optional[SpectralField] = None,
                extra_id: Optional[dict] = None, figures: bool = True
                ) -> Tuple[io.RunManifest, Optional[RunRecord]]:
    """Create the manifest, integrate, persist, finalize."""
    manifest = io.RunManifest.create(cfg, out_dir, extra_id)
    directory = Path(manifest.directory)
    try:
        integ = evolve.Integrator(cfg, u0)
        record = integ.run()
        paths = _write_record(record, directory, figures)
        paths["checkpoint"] = str(io.save_checkpoint(directory / "checkpoint.bin", cfg,
                                                     integ.checkpoint()))
    except Exception as exc:  # recorded in the manifest, not swallowed silently
        log.error("run %s failed: %s", manifest.run_id, exc)
        manifest.finalize("error", f"{type(exc).__name__}: {exc}")
        return manifest, None
    manifest.finalize(record.status, record.message, **paths)
    return manifest, record


def cmd_run(config_path, out_dir, figures: bool = True) -> io.RunManifest:
    cfg, _ = load_config(config_path)
    manifest, _ = execute_run(cfg, out_dir, figures=figures)
    return manifest


def _family_member(args):
    cfg, u0, out_dir, e = args
    m, rec = execute_run(cfg, out_dir, u0, extra_id={"mollify": e}, figures=False)
    return m, rec


def cmd_sweep(config_path, out_dir, jobs: int = 1, seed: int = 0) -> List[io.RunManifest]:
    cfg, spec = load_config(config_path, allow_sweep=True)
    spec = spec or SweepSpec()
    out_dir = Path(out_dir)
    if spec.kind == "family":
        return _sweep_family(cfg, spec, out_dir, jobs)
    return _sweep_twin(cfg, spec, out_dir, seed)


def _sweep_family(cfg, spec, out_dir, jobs) -> List[io.RunManifest]:
    header = ("eps", "eps_next", "status", "consecutive", "to_zero")
    eps_list = sorted(spec.eps, reverse=True)
    if not eps_list:
        io.write_csv(out_dir / "sweep_summary.csv", [header])
        return []
    u0 = cfg.initial.build(cfg.grid)
    all_eps = eps_list + [0.0]
    members = []
    for e in all_eps:
        data = mollify(u0, e) if spec.mollify and e > 0 else u0
        members.append((cfg.with_(eps=e, adaptive_dt=False), data, str(out_dir),
                        e if spec.mollify else 0.0))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_family_member, members))
    else:
        results = [_family_member(m) for m in members]
    recs = [r for _, r in results]
    zero = recs[-1]
    rows = [header]
    for i, e in enumerate(all_eps[:-1]):
        r, nxt = recs[i], recs[i + 1]
        ok = r is not None and r.completed
        cons = evolve.sup_l2_distance(r, nxt) if ok and nxt is not None and nxt.completed \
            else float("nan")
        to0 = evolve.sup_l2_distance(r, zero) if ok and zero is not None and zero.completed \
            else float("nan")
        rows.append((e, all_eps[i + 1], results[i][0].status, cons, to0))
    io.write_csv(out_dir / "sweep_summary.csv", rows)
    if len(rows) > 1 and all(np.isfinite(r[3]) for r in rows[1:]):
        from .plotting import plot_family
        study = evolve.FamilyStudy(all_eps, [r[3] for r in rows[1:]], [r[4] for r in rows[1:]])
        plot_family(study, out_dir / "family.png")
    return [m for m, _ in results]


def _sweep_twin(cfg, spec, out_dir, seed) -> List[io.RunManifest]:
    header = ("scale", "status", "max_w", "ratio_to_previous", "scale_ratio",
              "within_envelope", "K")
    if not spec.scales:
        io.write_csv(out_dir / "sweep_summary.csv", [header])
        return []
    u0 = cfg.initial.build(cfg.grid)
    direction = evolve.random_smooth_field(cfg.grid, np.random.default_rng(seed), 1.0)
    ref_manifest, ref = execute_run(cfg.with_(adaptive_dt=False), out_dir, u0,
                                    extra_id={"twin": "reference"}, figures=False)
    manifests = [ref_manifest]
    rows, reports, labels = [header], [], []
    prev = None
    for s in spec.scales:
        try:
            if ref is None or not ref.completed:
                raise RuntimeError("reference run failed")
            rep = diagnostics.twin_run_stability(u0, direction * s, cfg, reference=ref)
            ratio = prev[1] / rep.max_w if prev else float("nan")
            sratio = prev[0] / s if prev else float("nan")
            rows.append((s, "completed", rep.max_w, ratio, sratio, rep.within_envelope, rep.K))
            io.write_csv(out_dir / f"twin_{s:g}.csv", rep.rows())
            reports.append(rep)
            labels.append(f"scale {s:g}")
            prev = (s, rep.max_w)
        except Exception as exc:
            log.error("twin member scale=%g failed: %s", s, exc)
            rows.append((s, f"error: {exc}", float("nan"), float("nan"), float("nan"),
                         False, float("nan")))
    io.write_csv(out_dir / "sweep_summary.csv", rows)
    if reports:
        from .plotting import plot_twins
        plot_twins(reports, labels, out_dir / "twins.png")
    return manifests


def cmd_verify(suite: str, out_dir, seed: int = 0) -> Tuple[int, dict]:
    results = verify.run_suites(suite, seed)
    report = {"seed": seed, "passed": all(r.passed for r in results),
              "suites": [r.to_dict() for r in results]}
    io.write_json(Path(out_dir) / f"verify_{suite}.json", report)
    for r in results:
        for c in r.checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {r.suite}: {c.name} = {c.value:.6g} "
                  f"({c.bound})")
    return (0 if report["passed"] else 1), report


def cmd_kernel_study(out_dir, symbol: str = "quartic", n_points: int = 1024,
                     half_length: float = 8 * math.pi, t_min: float = 1e-4,
                     t_max: float = 1e-1, count: int = 13,
                     orders=(1.0, 1.5, 2.0)) -> dict:
    out_dir = Path(out_dir)
    gen = operators.make_symbol(symbol, Grid(n_points, half_length))
    times = np.geomspace(t_min, t_max, count)
    studies = [operators.kernel_norm_study(gen, p, times) for p in orders]
    slopes = {}
    for st in studies:
        io.write_csv(out_dir / f"kernel_{symbol}_p{st.derivative_order:g}.csv", st.rows())
        slopes[f"{st.derivative_order:g}"] = st.slope
        print(f"{symbol} |D|^{st.derivative_order:g}: slope {st.slope:.6f}")
    from .plotting import plot_kernel_studies
    plot_kernel_studies(studies, out_dir / f"kernel_{symbol}.png")
    report = {"symbol": symbol, "n_points": n_points, "half_length": half_length,
              "times": times, "slopes": slopes}
    io.write_json(out_dir / f"kernel_{symbol}.json", report)
    return report


def cmd_compare(config_path, out_dir) -> dict:
    cfg, _ = load_config(config_path)
    out_dir = Path(out_dir)
    u0 = cfg.initial.build(cfg.grid)
    recs = {v: evolve.run(cfg.with_(variant=v), u0) for v in evolve.VARIANTS}
    a, b = recs["modified"], recs["whitham_classic"]
    n = min(len(a.times), len(b.times))
    rows = [("t", "l2_modified", "l2_classic", "max_dx_modified", "max_dx_classic")]
    rows += [(a.times[i], a.norms[i].l2, b.norms[i].l2, a.max_dx[i], b.max_dx[i])
             for i in range(n)]
    io.write_csv(out_dir / "compare.csv", rows)
    from .plotting import plot_compare
    plot_compare(a, b, out_dir / "compare.png")
    report = {v: {"status": r.status, "message": r.message, "final_l2": r.norms[-1].l2,
                  "max_dx": max(r.max_dx)} for v, r in recs.items()}
    io.write_json(out_dir / "compare.json", report)
    return report


def _parse_orders(text: str):
    return tuple(float(p) for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output directory (default: $WHITHAM_OUT or ./whitham_out)")
    common.add_argument("--seed", type=int, default=0, help="seed for random corpora")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="whitham", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="integrate one configuration")
    r.add_argument("--no-figures", action="store_true")
    v = sub.add_parser("verify", parents=[common], help="run property suites")
    v.add_argument("--suite", default="all", choices=verify.SUITES + ("all",))
    sub.add_parser("sweep", parents=[common], help="eps family or twin-run sweep")
    k = sub.add_parser("kernel-study", parents=[common], help="kernel norm decay slopes")
    k.add_argument("--symbol", default="quartic", choices=operators.SYMBOL_NAMES)
    k.add_argument("--n-points", type=int, default=1024)
    k.add_argument("--half-length", type=float, default=8 * math.pi)
    k.add_argument("--t-min", type=float, default=1e-4)
    k.add_argument("--t-max", type=float, default=1e-1)
    k.add_argument("--count", type=int, default=13)
    k.add_argument("--orders", type=_parse_orders, default=(1.0, 1.5, 2.0))
    sub.add_parser("compare", parents=[common], help="modified vs classic from shared data")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = io.output_dir(args.out)
    needs_config = args.command in ("run", "sweep", "compare")
    if needs_config and not args.config:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            m = cmd_run(args.config, out, figures=not args.no_figures)
            print(f"{m.run_id} {m.status} {m.directory}")
            return 0 if m.status == "completed" else 1
        if args.command == "verify":
            code, _ = cmd_verify(args.suite, out, args.seed)
            return code
        if args.command == "sweep":
            ms = cmd_sweep(args.config, out, args.jobs, args.seed)
            print(f"{len(ms)} member runs; summary in {out / 'sweep_summary.csv'}")
            return 0
        if args.command == "kernel-study":
            cmd_kernel_study(out, args.symbol, args.n_points, args.half_length, args.t_min,
                             args.t_max, args.count, args.orders)
            return 0
        if args.command == "compare":
            rep = cmd_compare(args.config, out)
            for v, d in rep.items():
                print(f"{v}: {d['status']} final L2 {d['final_l2']:.6g}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
