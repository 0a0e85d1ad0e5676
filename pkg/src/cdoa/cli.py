"""``cdoa`` command line.

Exit codes: 0 success, 2 validation error, 3 data/model mismatch,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import KERNEL_BACKEND
from .aperture import (ApertureConfig, build_transfer_function, load_transfer_function,
                       mask_diversity, save_transfer_function)
from .config import load_config
from .dataset import AngleGrid, DatasetSpec, generate_dataset, read_dataset
from .errors import CdoaError, ValidationError
from .forward import SourceAngle, measure
from .gatnet.checkpoint import load_model, save_model
from .gatnet.train import TrainConfig, train
from .harness import GatEstimator, MatchedFilter, SweepSpec, parse_range, run_sweep, write_rows
from .pipeline import experiment_from_config, run_experiment
from .plotting import plot_csv
from .recon import doa_from_projection, matched_filter, sensed_atom_norms

log = logging.getLogger("cdoa")


def _out(args, name):
    return name if os.path.isabs(name) else os.path.join(args.out_dir, name)


def _grid(args, cfg_section) -> AngleGrid:
    step = args.grid_step if args.grid_step is not None else cfg_section.get("grid_step", 1.0)
    limit = args.grid_limit if args.grid_limit is not None else cfg_section.get("grid_limit", 30.0)
    return AngleGrid.uniform(-float(limit), float(limit), float(step))


def cmd_aperture(args, cfg):
    section = dict(cfg.get("aperture", {}))
    if args.masks is not None:
        section["num_masks"] = args.masks
    section["seed"] = args.seed if args.seed is not None else section.get("seed", 0)
    config = ApertureConfig.from_dict(section)
    tf = build_transfer_function(config)
    path = _out(args, args.output)
    digest = save_transfer_function(tf, path)
    print(f"elements: {config.num_elements}")
    print(f"pixels (N): {tf.num_pixels}")
    print(f"masks (M): {tf.num_masks}")
    print(f"sha256: {digest}")
    print(f"written: {path}")


def cmd_dataset(args, cfg):
    section = cfg.get("dataset", {})
    tf = load_transfer_function(args.tf)
    samples = args.samples if args.samples is not None else section.get("samples_total", 50000)
    snr = args.snr if args.snr is not None else section.get("snr_db", 50.0)
    spec = DatasetSpec(samples_total=int(samples), snr_db=None if args.noiseless else float(snr),
                       seed=args.seed if args.seed is not None else section.get("seed", 0),
                       grid=_grid(args, section), cover=not args.iid, tf_reference=tf.digest())
    path = _out(args, args.output)
    data = generate_dataset(spec, tf, path)
    print(f"samples: {len(data)}  M: {data.num_masks}  grid pairs: {spec.grid.size}")
    print(f"written: {path}")


def cmd_train(args, cfg):
    section = dict(cfg.get("train", {}))
    arch = {k: tuple(section.pop(k)) for k in ("gal_widths", "dense_widths") if k in section}
    for key in ("learning_rate", "max_epochs", "patience", "batch_size"):
        val = getattr(args, key)
        if val is not None:
            section[key] = val
    tc = TrainConfig(**section)
    data = read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else 0
    if args.dense_only:
        arch.pop("gal_widths", None)
    model, tlog = train(data, tc, seed=seed, dense_only=args.dense_only, **arch)
    path = _out(args, args.output)
    digest = save_model(model, path)
    log_path = os.path.splitext(path)[0] + "_log.csv"
    tlog.write_csv(log_path, include_timing=not args.no_timing)
    print(f"epochs: {tlog.stopped_epoch}  best: {tlog.best_epoch}  "
          f"train MAE: {tlog.records[tlog.best_epoch].train_loss:.4f}  "
          f"val MAE: {tlog.records[tlog.best_epoch].val_loss:.4f}")
    print(f"sha256: {digest}")
    print(f"written: {path}, {log_path}")


def _sweep(args, cfg, mask_counts) -> SweepSpec:
    section = cfg.get("sweep", {})
    snrs = parse_range(args.snr) if args.snr is not None else tuple(
        section.get("snr_points_db", range(-20, 31, 5)))
    samples = args.samples if args.samples is not None else section.get("samples_per_point", 5000)
    return SweepSpec(mask_counts=tuple(mask_counts), snr_points_db=tuple(float(s) for s in snrs),
                     samples_per_point=int(samples), grid=_grid(args, section),
                     seed=args.seed if args.seed is not None else 0)


def _finish_csv(args, rows, name):
    csv_path = _out(args, name + ".csv")
    write_rows(rows, csv_path)
    plot_csv(csv_path, _out(args, name + ".svg"))
    for r in rows:
        print(f"{r['estimator']:>15} M={r['num_masks']:<5} SNR={r['snr_db']:>6.1f} dB  "
              f"MAE theta={r['mae_theta']:.3f}  phi={r['mae_phi']:.3f}  joint={r['mae_joint']:.3f}")
    print(f"written: {csv_path}")


def cmd_eval(args, cfg):
    if len(args.model) != len(args.tf):
        raise ValidationError("give one --tf per --model")
    entries = []
    for mpath, tpath in zip(args.model, args.tf):
        entries.append((load_transfer_function(tpath), [GatEstimator(load_model(mpath))]))
    spec = _sweep(args, cfg, [tf.num_masks for tf, _ in entries])
    rows = run_sweep(entries, spec, threads=args.threads)
    _finish_csv(args, rows, args.name)


def cmd_compare(args, cfg):
    tf = load_transfer_function(args.tf)
    spec = _sweep(args, cfg, [tf.num_masks])
    estimators = [GatEstimator(load_model(args.gat_model), name="gat")]
    if args.dense_model:
        estimators.append(GatEstimator(load_model(args.dense_model), name="dense"))
    estimators.append(MatchedFilter(tf, spec.grid))
    rows = run_sweep([(tf, estimators)], spec, threads=args.threads)
    _finish_csv(args, rows, args.name)


def cmd_recon(args, cfg):
    tf = load_transfer_function(args.tf)
    grid = _grid(args, cfg.get("dataset", {}))
    snr = None if args.snr is None else float(args.snr)
    m = measure(tf, SourceAngle(args.theta, args.phi), snr, args.seed or 0)
    est = matched_filter(tf, m.s, mode=args.mode)
    norms = None if args.plain else sensed_atom_norms(tf, grid)
    res = doa_from_projection(est.p_est, tf.plane_coords, tf.k0, grid, atom_norms=norms,
                              signal_norm=None if args.plain else float(np.linalg.norm(m.s)))
    print(f"truth: theta={args.theta:g} phi={args.phi:g}")
    print(f"estimate: theta={res.theta_deg:g} phi={res.phi_deg:g}  peak correlation {res.peak:.4f}")
    print(f"residual |E p - s|: {est.residual_norm:.4g}")
    if args.correlation_csv:
        res.write_csv(_out(args, args.correlation_csv))


def cmd_diversity(args, cfg):
    tf = load_transfer_function(args.tf)
    rep = mask_diversity(tf)
    sv = rep.singular_values
    print(f"masks: {tf.num_masks}  pixels: {tf.num_pixels}")
    print(f"median off-diagonal row correlation: {rep.median_offdiagonal:.4f}")
    print(f"condition number: {rep.condition_number:.4g}")
    print("leading singular values (normalised): " + " ".join(f"{x:.3f}" for x in sv[:8] / sv[0]))


def cmd_experiment(args, cfg):
    exp, aperture, tc, arch = experiment_from_config(cfg)
    if args.masks:
        exp = type(exp)(**{**exp.__dict__, "mask_counts": tuple(args.masks)})
    summary = run_experiment(exp, args.out_dir, seed=args.seed or 0, aperture=aperture,
                             train_config=tc, arch=arch, threads=args.threads)
    for r in summary["rows"]:
        print(f"{r['estimator']:>15} M={r['num_masks']:<5} SNR={r['snr_db']:>6.1f} dB  "
              f"joint MAE={r['mae_joint']:.3f}")
    print(f"written: {os.path.join(args.out_dir, 'results.csv')}")


def cmd_plot(args, cfg):
    plot_csv(args.csv, _out(args, args.output))


def build_parser() -> argparse.ArgumentParser:
    def common_parser(suppress):
        # subcommands repeat the shared flags without clobbering values given before them
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        c = argparse.ArgumentParser(add_help=False)
        c.add_argument("--seed", type=int, default=d(None), help="run seed (default 0)")
        c.add_argument("--config", default=d(None), help="JSON or key=value config file")
        c.add_argument("--out-dir", default=d("."), help="directory for outputs")
        c.add_argument("--threads", type=int, default=d(1), help="parallel sweep cells")
        c.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return c

    common = common_parser(True)
    p = argparse.ArgumentParser(prog="cdoa", parents=[common_parser(False)],
                                description=f"coded-aperture DoA toolkit (kernels: {KERNEL_BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    def grid_args(sp):
        sp.add_argument("--grid-step", type=float, default=None)
        sp.add_argument("--grid-limit", type=float, default=None)

    sp = sub.add_parser("aperture", parents=[common], help="build and save a transfer function")
    sp.add_argument("--masks", type=int, default=None)
    sp.add_argument("-o", "--output", default="transfer_function.tf")
    sp.set_defaults(func=cmd_aperture)

    sp = sub.add_parser("dataset", parents=[common], help="simulate a training/test dataset")
    sp.add_argument("--tf", required=True)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--snr", type=float, default=None)
    sp.add_argument("--noiseless", action="store_true")
    sp.add_argument("--iid", action="store_true", help="i.i.d. uniform pairs instead of balanced cover")
    grid_args(sp)
    sp.add_argument("-o", "--output", default="dataset.ds")
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("train", parents=[common], help="train a GAT (or dense baseline)")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--dense-only", action="store_true")
    sp.add_argument("--learning-rate", type=float, default=None)
    sp.add_argument("--max-epochs", type=int, default=None)
    sp.add_argument("--patience", type=int, default=None)
    sp.add_argument("--batch-size", type=int, default=None)
    sp.add_argument("--no-timing", action="store_true", help="write 0 for wall_seconds in the log")
    sp.add_argument("-o", "--output", default="model.nn")
    sp.set_defaults(func=cmd_train)

    for name, func, hlp in (("eval", cmd_eval, "MAE-vs-SNR sweep for trained models"),
                            ("compare", cmd_compare, "GAT vs dense baseline vs matched filter")):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        if name == "eval":
            sp.add_argument("--model", action="append", required=True)
            sp.add_argument("--tf", action="append", required=True)
        else:
            sp.add_argument("--tf", required=True)
            sp.add_argument("--gat-model", required=True)
            sp.add_argument("--dense-model", default=None)
        sp.add_argument("--snr", default=None, help="'lo:hi:step' or comma list (dB)")
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--name", default=name)
        grid_args(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("recon", parents=[common], help="matched-filter DoA for one simulated source")
    sp.add_argument("--tf", required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--phi", type=float, required=True)
    sp.add_argument("--snr", type=float, default=None, help="omit for noiseless")
    sp.add_argument("--mode", choices=("matched", "ridge"), default="matched")
    sp.add_argument("--plain", action="store_true", help="normalise atoms by |P| instead of |E P|")
    sp.add_argument("--correlation-csv", default=None)
    grid_args(sp)
    sp.set_defaults(func=cmd_recon)

    sp = sub.add_parser("diversity", parents=[common], help="mask correlation and singular values")
    sp.add_argument("--tf", required=True)
    sp.set_defaults(func=cmd_diversity)

    sp = sub.add_parser("experiment", parents=[common], help="aperture -> dataset -> train -> eval")
    sp.add_argument("--masks", type=int, nargs="*", default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("plot", parents=[common], help="re-render a plot from a result CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("-o", "--output", default="results.svg")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        os.makedirs(args.out_dir, exist_ok=True)
        np.seterr(all="ignore")
        args.func(args, cfg)
    except CdoaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
