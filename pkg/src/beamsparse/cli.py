"""Command-line entry point: generate, evaluate, sweep, bench, dump-factors."""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from .baselines import RateParams, estimate_empirical_covariance
from .bench import bench_operator, fit_loglog_slope
from .channels import generate_channel
from .config import ConfigError, RunConfig, load_config
from .dataset import ChannelDataset, read_dataset, write_dataset
from .figures import save_bench_figure, save_nmse_figure, save_rate_figure, save_sweep_figure
from .montecarlo import (
    DdRkhsEstimator,
    EmpiricalLmmseEstimator,
    GenieLmmseEstimator,
    LsEstimator,
    RkhsEstimator,
    records_to_csv,
    records_to_json,
    run_monte_carlo,
)
from .operators import build_operator
from .unfolded import load_params

KNOWN_ESTIMATORS = ("ls", "lmmse", "genie", "rkhs", "dd_rkhs")

FACTORS_MAGIC = b"BSFC0001"


def _build_dataset(cfg: RunConfig, count: int, seed: int) -> ChannelDataset:
    grid = cfg.delay_beam_grid()
    gen = cfg.generation
    bounds = (grid.delay_span_s, grid.beam_span_h_cpm, grid.beam_span_v_cpm)
    tensors = []
    paths = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        p, chan = generate_channel(rng, cfg.ofdm, cfg.geometry, gen.cluster_count,
                                   gen.paths_per_cluster, gen.spreads(grid), bounds,
                                   gen.center_fractions())
        tensors.append(chan.values.astype(np.complex64))
        paths.append(p)
    return ChannelDataset(
        geometry=cfg.geometry,
        grid=cfg.ofdm,
        tensors=np.stack(tensors),
        paths=paths,
        generation={
            "count": count,
            "cluster_count": gen.cluster_count,
            "paths_per_cluster": gen.paths_per_cluster,
            "delay_spread_frac": gen.delay_spread_frac,
            "beam_spread_frac_h": gen.beam_spread_frac_h,
            "beam_spread_frac_v": gen.beam_spread_frac_v,
            "center_fraction_delay": gen.center_fraction_delay,
            "center_fraction_h": gen.center_fraction_h,
            "center_fraction_v": gen.center_fraction_v,
        },
        seed=seed,
    )


def _build_estimators(names, cfg: RunConfig, dataset: ChannelDataset,
                      oversampling: int | None = None, est_overrides: dict | None = None):
    overrides = est_overrides or {}
    est_cfg = cfg.estimator
    estimators = []
    op = None
    for name in names:
        if name not in KNOWN_ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}; valid names: {', '.join(KNOWN_ESTIMATORS)}")
        if name == "ls":
            estimators.append(LsEstimator())
        elif name == "genie":
            estimators.append(GenieLmmseEstimator())
        elif name == "lmmse":
            n_samples = min(est_cfg.covariance_samples, len(dataset))
            cov = estimate_empirical_covariance(dataset.tensors, n_samples)
            estimators.append(EmpiricalLmmseEstimator(cov))
        elif name in ("rkhs", "dd_rkhs"):
            if op is None:
                grid = cfg.delay_beam_grid(oversampling)
                op = build_operator(cfg.ofdm, cfg.geometry, grid,
                                    overrides.get("rank", est_cfg.rank))
            if name == "rkhs":
                estimators.append(RkhsEstimator(
                    op,
                    lambda_multiplier=overrides.get("lambda_multiplier", est_cfg.lambda_multiplier),
                    t_max=overrides.get("t_max", est_cfg.t_max),
                    t_prime_max=overrides.get("t_prime_max", est_cfg.t_prime_max),
                    step_size=overrides.get("step_size", est_cfg.step_size),
                    debias=overrides.get("debias", est_cfg.debias),
                    gamma=est_cfg.gamma,
                    debias_snr_factor=est_cfg.debias_snr_factor,
                ))
            else:
                schedules = [load_params(p) for p in est_cfg.schedule_paths]
                estimators.append(DdRkhsEstimator(op, schedules))
    return estimators


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    count = cfg.generation.count if args.count is None else args.count
    if count < 1:
        raise ValueError("generation count must be >= 1")
    dataset = _build_dataset(cfg, count, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, dataset)
    gains = np.array([np.mean(np.abs(t) ** 2) for t in dataset.tensors])
    print(f"wrote {count} channels to {out}")
    print(f"mean-square gain: mean={gains.mean():.4f} min={gains.min():.4f} max={gains.max():.4f}")
    return 0


def _eval_outputs(records, outdir: Path, stem: str, meta: dict, with_rate: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    records_to_csv(records, outdir / f"{stem}.csv")
    records_to_json(records, outdir / f"{stem}.json", meta=meta)
    save_nmse_figure(records, outdir / f"{stem}_nmse.png")
    if with_rate:
        save_rate_figure(records, outdir / f"{stem}_rate.png")


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    dataset = read_dataset(args.dataset)
    names = args.estimators.split(",") if args.estimators else cfg.evaluation.estimator_names
    estimators = _build_estimators(names, cfg, dataset)
    rate = RateParams(cfg.evaluation.bs_power_dbm, cfg.evaluation.ue_noise_dbm,
                      cfg.ofdm.symbol_duration_s)
    records = run_monte_carlo(dataset, estimators, cfg.evaluation.snr_grid_db,
                              cfg.evaluation.trials, seed=seed, rate_params=rate,
                              n_jobs=cfg.evaluation.n_jobs)
    meta = {"seed": seed, "trials": cfg.evaluation.trials, "estimators": names,
            "uplink_downlink_offset_db": cfg.evaluation.bs_power_dbm - 23.0 - (cfg.evaluation.ue_noise_dbm + 89.0)}
    _eval_outputs(records, Path(args.out), "results", meta, with_rate=True)
    for rec in records:
        print(f"snr={rec.snr_db:+.1f} {rec.estimator:8s} nmse={rec.nmse:.4e} rate={rec.rate:.4e}")
    print(f"results written to {args.out}")
    return 0


SWEEP_AXES = ("rank", "lambda_multiplier", "oversampling", "step_size", "t_max", "debias")


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    if args.sweep_axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {args.sweep_axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    values = cfg.sweep.get(args.sweep_axis)
    if not values:
        raise ValueError(f"sweep.{args.sweep_axis}: no sweep values configured")
    dataset = read_dataset(args.dataset)
    rate = RateParams(cfg.evaluation.bs_power_dbm, cfg.evaluation.ue_noise_dbm,
                      cfg.ofdm.symbol_duration_s)

    all_records = []
    per_value = []
    for value in values:
        overrides = {}
        oversampling = None
        if args.sweep_axis == "oversampling":
            oversampling = int(value)
        else:
            overrides[args.sweep_axis] = value
        estimators = _build_estimators(["rkhs"], cfg, dataset, oversampling=oversampling,
                                       est_overrides=overrides)
        records = run_monte_carlo(dataset, estimators, cfg.evaluation.snr_grid_db,
                                  cfg.evaluation.trials, seed=seed, rate_params=rate,
                                  n_jobs=cfg.evaluation.n_jobs)
        for rec in records:
            rec.estimator = "rkhs"
        per_value.append(records)
        all_records.extend(records)
        for rec in records:
            print(f"{args.sweep_axis}={value} snr={rec.snr_db:+.1f} nmse={rec.nmse:.4e} "
                  f"diverged={rec.diverged}/{rec.trials}")

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{args.sweep_axis}"
    flat_values = [v for v, recs in zip(values, per_value) for _ in recs]
    records_to_csv(all_records, outdir / f"{stem}.csv",
                   extra_columns={"sweep_axis": args.sweep_axis, "sweep_value": flat_values})
    records_to_json(all_records, outdir / f"{stem}.json",
                    meta={"sweep_axis": args.sweep_axis, "sweep_values": list(values), "seed": seed})
    save_sweep_figure(args.sweep_axis, values, per_value, outdir / f"{stem}.png")
    print(f"sweep results written to {outdir}")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    bench = cfg.bench
    rows = bench_operator(
        sizes_log2=bench.get("sizes_log2", [10, 11, 12, 13, 14, 15, 16]),
        rank=int(bench.get("rank", 2)),
        repeats=int(bench.get("repeats", 5)),
        dense_sizes_log2=bench.get("dense_sizes_log2", [10, 11, 12, 13]),
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    import csv as _csv

    with open(outdir / "bench.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["path", "n_boxes", "mean_s", "std_s", "repeats"])
        for row in rows:
            writer.writerow([row.path, row.n_boxes, row.mean_s, row.std_s, row.repeats])
    save_bench_figure(rows, outdir / "bench.png")
    for name in ("fast", "dense"):
        pts = [(r.n_boxes, r.mean_s) for r in rows if r.path == name]
        if len(pts) >= 2:
            slope = fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
            print(f"{name} path: fitted log-log slope {slope:.3f}")
    print(f"bench results written to {outdir}")
    return 0


def cmd_dump_factors(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.delay_beam_grid()
    op = build_operator(cfg.ofdm, cfg.geometry, grid, cfg.estimator.rank)
    blocks = [
        ("s_t_full", op.factors.s_t_full),
        ("s_t_pilot", op.factors.s_t_pilot),
        ("s_h", op.factors.s_h),
        ("s_v", op.factors.s_v),
    ]
    header = {
        "format_version": 1,
        "rank": op.rank,
        "grid": {"n1": grid.n1, "n2": grid.n2, "n3": grid.n3},
        "spans": {"delay_s": grid.delay_span_s, "beam_h_cpm": grid.beam_span_h_cpm,
                  "beam_v_cpm": grid.beam_span_v_cpm},
        "ofdm": {"n_subcarriers": cfg.ofdm.n_subcarriers,
                 "subcarrier_spacing_hz": cfg.ofdm.subcarrier_spacing_hz,
                 "carrier_frequency_hz": cfg.ofdm.carrier_frequency_hz,
                 "pilot_stride": cfg.ofdm.pilot_stride},
        "geometry": {"n_rows": cfg.geometry.n_rows, "n_cols": cfg.geometry.n_cols,
                     "row_spacing_m": cfg.geometry.row_spacing_m,
                     "col_spacing_m": cfg.geometry.col_spacing_m},
        # span-scaled, sign-flipped axis coordinates as used by the operator
        "axes": {
            "delay_points_full": [float(v) for v in -cfg.ofdm.frequencies * grid.delay_span_s],
            "pilot_indices": [int(v) for v in cfg.ofdm.pilot_indices],
            "h_points": [float(v) for v in -cfg.geometry.positions_row * grid.beam_span_h_cpm],
            "v_points": [float(v) for v in -cfg.geometry.positions_col * grid.beam_span_v_cpm],
            "delay_center_offset": 0.5,
        },
        "eigenvalues": {
            "delay": [float(v) for v in op.factors.eig_t],
            "horizontal": [float(v) for v in op.factors.eig_h],
            "vertical": [float(v) for v in op.factors.eig_v],
        },
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks],
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        fh.write(FACTORS_MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr.astype(np.complex64)).view(np.float32)
                     .astype("<f4", copy=False).tobytes())
    print(f"factors (rank {op.rank}, grid {grid.shape}) written to {out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamsparse",
                                     description="Band-sparse delay-beamspace channel estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run config (defaults: built-in desk scale)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("generate", parents=[common], help="generate a channel dataset file")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--count", type=int, default=None, help="override generation.count")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="Monte Carlo NMSE/rate evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--estimators", default=None, help="comma-separated estimator names")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep for the rkhs estimator")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep-axis", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", parents=[common], help="operator timing benchmark")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-factors", parents=[common], help="dump low-rank factors to a container")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_factors)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
