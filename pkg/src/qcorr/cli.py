"""Command-line interface: simulate, analytic, estimate, replica scans, compare.

Every float written to CSV uses 17 significant digits so values round-trip
exactly; a fixed seed therefore yields byte-identical outputs across runs
and worker counts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .analytic import (
    BRUTE_FORCE_MAX_EVENTS,
    CorrelatorSpec,
    brute_force_correlator,
    chain_correlator,
    factorized_correlator,
)
from .config import parse_config
from .empirical import Window, estimate_correlator
from .errors import FactorizationInapplicableError, QcorrError
from .recordio import read_records, write_records
from .replica import ReplicaConfig, four_time_scan, three_time_scan
from .trajectory import simulate_ensemble

FLOAT_FMT = ".17g"


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, FLOAT_FMT)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _events_key(pairs) -> str:
    return ";".join(f"{ch}@{format(t, FLOAT_FMT)}" for ch, t in pairs)


def _load_spec_entries(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return raw if isinstance(raw, list) else [raw]


def _parse_float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _do_simulate(args) -> int:
    setup = parse_config(args.config)
    sim = setup.sim
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.n_traj is not None:
        overrides["n_traj"] = args.n_traj
    if args.dt is not None:
        overrides["dt"] = args.dt
    if overrides:
        from dataclasses import replace
        sim = replace(sim, **overrides)
    out = args.out or setup.outputs.get("records")
    if not out:
        raise QcorrError("no output path: pass --out or set outputs.records in the config")
    progress = None
    if args.progress:
        def progress(done, total):
            print(f"\r{done}/{total} trajectories", end="", file=sys.stderr, flush=True)
    records = simulate_ensemble(sim, workers=args.workers, progress=progress)
    if args.progress:
        print(file=sys.stderr)
    write_records(out, records)
    print(
        f"wrote {records.n_traj} trajectories x {records.n_channels} channels "
        f"x {records.n_samples} samples to {out} "
        f"(clip fraction {records.clip_fraction:.3e})"
    )
    return 0


def _spec_from_entry(entry, setup):
    """Split one spec-file entry into (absolute_events, windowed) forms."""
    r_in = tuple(setup.sim.r_init)
    t_in = 0.0
    if "initial" in entry:
        init = entry["initial"]
        r_in = tuple(float(v) for v in init.get("r", r_in))
        t_in = float(init.get("t_us", 0.0))
    if "events" in entry:
        events = tuple((int(e["channel"]), float(e["t_us"])) for e in entry["events"])
        return CorrelatorSpec(events, r_in, t_in), None, None
    window = Window(float(entry["window"]["t_a_us"]), float(entry["window"]["T_us"]))
    gaps = [(int(g["channel"]), float(g["dt_us"])) for g in entry["gaps"]]
    return None, gaps, window


def _windowed_analytic(setup, gaps, window, kind):
    """Window-averaged correlator on the estimator's snapped grid."""
    dt = setup.sim.dt
    i0 = round(window.t_a / dt)
    i1 = round((window.t_a + window.length) / dt)
    snapped = [(ch, round(g / dt)) for ch, g in gaps]
    values = []
    for i in range(i0, i1 + 1):
        t1 = i * dt
        events = tuple((ch, t1 + g * dt) for ch, g in snapped)
        spec = CorrelatorSpec(events, tuple(setup.sim.r_init), 0.0)
        if kind == "chain":
            values.append(chain_correlator(setup.model, setup.channels, spec))
        else:
            values.append(factorized_correlator(setup.model, setup.channels, spec))
    key = _events_key((ch, g * dt) for ch, g in snapped)
    return float(np.mean(values)), key, (i0 * dt, (i1 - i0) * dt)


def _do_analytic(args) -> int:
    setup = parse_config(args.config)
    rows = []
    for entry in _load_spec_entries(args.spec):
        spec, gaps, window = _spec_from_entry(entry, setup)
        if spec is not None:
            chain = chain_correlator(setup.model, setup.channels, spec)
            try:
                fact = factorized_correlator(setup.model, setup.channels, spec)
            except FactorizationInapplicableError:
                fact = float("nan")
            brute = (
                brute_force_correlator(setup.model, setup.channels, spec)
                if spec.n_events <= BRUTE_FORCE_MAX_EVENTS else float("nan")
            )
            key = _events_key(spec.events)
            rows.append((key, float("nan"), float("nan"), chain, chain, fact, brute))
        else:
            chain, key, (w0, wlen) = _windowed_analytic(setup, gaps, window, "chain")
            try:
                fact, _, _ = _windowed_analytic(setup, gaps, window, "factorized")
            except FactorizationInapplicableError:
                fact = float("nan")
            rows.append((key, w0, wlen, chain, chain, fact, float("nan")))
    header = ["events", "window_start_us", "window_len_us", "value",
              "chain", "factorized", "brute_force"]
    for row in rows:
        print(f"{row[0]}: chain={_fmt(row[4])} factorized={_fmt(row[5])} "
              f"brute_force={_fmt(row[6])}")
    if args.out:
        _write_csv(args.out, header, rows)
    return 0


def _do_estimate(args) -> int:
    records = read_records(args.records)
    rows = []
    for entry in _load_spec_entries(args.spec):
        if "gaps" not in entry or "window" not in entry:
            raise QcorrError("estimate specs need 'gaps' and 'window' sections")
        window = Window(float(entry["window"]["t_a_us"]), float(entry["window"]["T_us"]))
        gaps = [(int(g["channel"]), float(g["dt_us"])) for g in entry["gaps"]]
        est = estimate_correlator(records, gaps, window)
        key = _events_key(zip((ch for ch, _ in est.events), est.snapped_gaps_us))
        w0 = est.window_bins[0] * est.dt
        wlen = (est.window_bins[1] - est.window_bins[0]) * est.dt
        rows.append((key, w0, wlen, est.value, est.std_error,
                     est.n_traj, est.n_window_samples))
        print(f"{key}: value={_fmt(est.value)} +- {_fmt(est.std_error)}")
    header = ["events", "window_start_us", "window_len_us", "value",
              "std_error", "n_traj", "n_window_samples"]
    if args.out:
        _write_csv(args.out, header, rows)
    return 0


def _replica_config(args, phi) -> ReplicaConfig:
    kwargs = dict(phi=phi, include_mc=args.mc, workers=args.workers)
    if args.n_traj is not None:
        kwargs["n_traj"] = args.n_traj
    if args.dt is not None:
        kwargs["dt"] = args.dt
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    return ReplicaConfig(**kwargs)


def _do_replica_fig1(args) -> int:
    rows = []
    for phi in _parse_float_list(args.phi):
        config = _replica_config(args, phi)
        grid21 = _parse_float_list(args.dt21_grid) if args.dt21_grid else None
        grid32 = _parse_float_list(args.dt32_grid) if args.dt32_grid else None
        rows.extend(three_time_scan(config, grid21, grid32))
    _write_csv(
        args.out,
        ["phi", "dt21_us", "dt32_us", "analytic", "mc_value", "mc_se"],
        [(r.phi, r.dt21, r.dt32, r.analytic, r.mc_value, r.mc_se) for r in rows],
    )
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _do_replica_fig2(args) -> int:
    rows = []
    summaries = []
    for phi in _parse_float_list(args.phi):
        config = _replica_config(args, phi)
        grid32 = _parse_float_list(args.dt32_grid) if args.dt32_grid else None
        phi_rows, summary = four_time_scan(config, grid32)
        rows.extend(phi_rows)
        summaries.append(summary)
    _write_csv(
        args.out,
        ["phi", "dt21_us", "dt32_us", "dt43_us", "analytic", "mc_value", "mc_se"],
        [(r.phi, r.dt21, r.dt32, r.dt43, r.analytic, r.mc_value, r.mc_se) for r in rows],
    )
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.summary_out:
        _write_csv(
            args.summary_out,
            ["phi", "mc_mean", "mc_std", "mc_pooled_se", "analytic", "n_traj"],
            [(s.phi, s.mc_mean, s.mc_std, s.mc_pooled_se, s.analytic, s.n_traj)
             for s in summaries],
        )
        print(f"wrote {len(summaries)} summary rows to {args.summary_out}")
    return 0


_VALUE_COLUMNS = {"value", "std_error", "chain", "factorized", "brute_force",
                  "n_traj", "n_window_samples", "mc_value", "mc_se"}


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, row)) for row in reader]


def _do_compare(args) -> int:
    a_header, a_rows = _read_csv(args.analytic)
    e_header, e_rows = _read_csv(args.empirical)
    if "value" not in a_header:
        raise QcorrError(f"{args.analytic} has no 'value' column")
    if "value" not in e_header or "std_error" not in e_header:
        raise QcorrError(f"{args.empirical} needs 'value' and 'std_error' columns")
    keys = [c for c in a_header if c in set(e_header) and c not in _VALUE_COLUMNS]
    if not keys:
        raise QcorrError("the two files share no key columns to join on")
    analytic = {tuple(row[k] for k in keys): float(row["value"]) for row in a_rows}
    worst = 0.0
    matched = 0
    failures = 0
    for row in e_rows:
        key = tuple(row[k] for k in keys)
        if key not in analytic:
            continue
        matched += 1
        delta = float(row["value"]) - analytic[key]
        se = float(row["std_error"])
        sigma = abs(delta) / se if se > 0 else float("inf") if delta else 0.0
        worst = max(worst, sigma)
        if sigma > args.max_sigma:
            failures += 1
            print(f"MISMATCH {dict(zip(keys, key))}: |delta|/se = {sigma:.2f}")
    if matched == 0:
        raise QcorrError("no rows matched between the two files")
    print(f"compared {matched} rows on {keys}: max |delta|/se = {worst:.3f} "
          f"(threshold {args.max_sigma})")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcorr",
        description="Simulate continuous qubit measurement records and "
                    "compute multi-time output correlators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate trajectories and write a record file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-traj", type=int, dest="n_traj")
    p.add_argument("--dt", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=_do_simulate)

    p = sub.add_parser("analytic", help="evaluate correlators of a spec file exactly")
    p.add_argument("--config", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_do_analytic)

    p = sub.add_parser("estimate", help="estimate correlators from a record file")
    p.add_argument("--records", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_do_estimate)

    for name, fn in (("replica-fig1", _do_replica_fig1), ("replica-fig2", _do_replica_fig2)):
        p = sub.add_parser(name, help=f"run the two-detector {name[-4:]} scan")
        p.add_argument("--phi", required=True,
                       help="comma-separated measurement-axis angles in radians")
        p.add_argument("--out", required=True)
        p.add_argument("--n-traj", type=int, dest="n_traj")
        p.add_argument("--dt", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--mc", action=argparse.BooleanOptionalAction, default=True)
        p.add_argument("--dt32-grid", dest="dt32_grid",
                       help="comma-separated gap values in microseconds")
        if name == "replica-fig1":
            p.add_argument("--dt21-grid", dest="dt21_grid",
                           help="comma-separated gap values in microseconds")
        else:
            p.add_argument("--summary-out", dest="summary_out")
        p.set_defaults(func=fn)

    p = sub.add_parser("compare", help="join analytic and empirical CSVs, check agreement")
    p.add_argument("--analytic", required=True)
    p.add_argument("--empirical", required=True)
    p.add_argument("--max-sigma", type=float, default=4.0, dest="max_sigma")
    p.set_defaults(func=_do_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QcorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
