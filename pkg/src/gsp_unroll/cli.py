"""Command line entry point: ``gsp-unroll {synth,inpaint,learn,train,sweep}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, fields

import numpy as np

from .core import AlphaParams, Hyperparams, validate_laplacian
from .errors import GSPUnrollError
from .experiments import ExperimentConfig, run_experiment
from .graphlearn import knn_graph
from .inpaint import emd
from .io import dump_model, emit_results, load_csv, load_laplacian_csv, save_matrix_csv
from .synth import SynthConfig, gsd, sample_mask
from .unroll import forward, train_alpha

# flag name -> Hyperparams field
_HP_FLAGS = {
    "k_unroll": int, "k1": int, "k2": int, "eta": float, "beta": float,
    "gamma": float, "lam": float, "k_poly": int, "train_lr": float, "train_epochs": int,
}


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_hyperparams(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--k-unroll", dest="k_unroll", type=int)
    g.add_argument("--k1", type=int)
    g.add_argument("--k2", type=int)
    g.add_argument("--eta", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--k-poly", dest="k_poly", type=int)
    g.add_argument("--lr", dest="train_lr", type=float)
    g.add_argument("--epochs", dest="train_epochs", type=int)
    g.add_argument("--cold-start", action="store_true",
                   help="restart every CG solve from zero instead of the previous layer")


def _hyperparams(args, base=None):
    base = base or Hyperparams()
    changes = {k: getattr(args, k) for k in _HP_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "cold_start", False):
        changes["warm_start"] = False
    return base.replace(**changes)


def _add_common(p, data_required=False):
    p.add_argument("--data", required=data_required, help="CSV, rows = vertices")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--alpha", type=_floats, help="comma-separated alpha, e.g. 1,1,1")
    _add_hyperparams(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="gsp-unroll", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset and its graph")
    p.add_argument("--n-vertices", type=int, default=20)
    p.add_argument("--n-timestamps", type=int, default=500)
    p.add_argument("--edge-prob", type=float, default=0.3)
    p.add_argument("--alpha-true", type=_floats, default=[1.0, 4.0, 1.66])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-fraction", type=float, default=0.0,
                   help="also blank this fraction of cells in the written data")
    p.add_argument("--out", required=True, help="data CSV")
    p.add_argument("--graph-out", help="ground-truth Laplacian CSV")

    p = sub.add_parser("inpaint", help="fill missing cells with a fixed graph")
    _add_common(p, data_required=True)
    p.add_argument("--graph", help="Laplacian CSV (default: kNN graph)")
    p.add_argument("--knn", type=int, default=3)

    for name, text in (("learn", "learn a graph (joint network, optional alpha training)"),
                       ("train", "train alpha and run the joint network")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--mask-fraction", type=float,
                       help="cells to remove artificially before running")
        p.add_argument("--model-out", help="JSON dump of alpha and the learned Laplacian")
        p.add_argument("--completed-out", help="CSV of the completed data matrix")

    p = sub.add_parser("sweep", help="seeded experiment grid, writes result records")
    _add_common(p)
    p.add_argument("--graph", help="ground-truth Laplacian CSV for F-scores")
    p.add_argument("--mask-fraction", type=_floats, dest="fractions",
                   help="comma-separated missing fractions")
    p.add_argument("--snr-db", type=_floats, dest="snrs", help="comma-separated SNRs")
    p.add_argument("--repeats", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--baselines", action="store_true", default=None)
    p.add_argument("--stability", action="store_true", default=None)
    p.add_argument("--timing", dest="record_timing", action="store_true", default=None)
    p.add_argument("--n-vertices", type=int)
    p.add_argument("--n-timestamps", type=int)
    p.add_argument("--id", dest="experiment_id")
    return parser


def _cmd_synth(args):
    cfg = SynthConfig(args.n_vertices, args.n_timestamps, args.edge_prob,
                      AlphaParams(args.alpha_true), args.seed)
    x, L = gsd(cfg)
    psi = None
    if args.mask_fraction > 0:
        psi = sample_mask(*x.shape, args.mask_fraction, np.random.default_rng([args.seed, 1]))
    save_matrix_csv(args.out, x, psi)
    if args.graph_out:
        save_matrix_csv(args.graph_out, L.matrix)
    return 0


def _load(args):
    x, psi = load_csv(args.data)
    return x, psi


def _cmd_inpaint(args):
    x, psi = _load(args)
    hp = _hyperparams(args)
    alpha = AlphaParams(args.alpha or [0.0, 1.0, 0.0])
    y = psi * x
    if args.graph:
        L = validate_laplacian(load_laplacian_csv(args.graph))
    else:
        L = knn_graph(y, psi, args.knn)
    res = emd(y, psi, L, alpha, hp.lam, hp.k1)
    out = args.out or "completed.csv"
    save_matrix_csv(out, res.x_hat)
    print(f"{res.iterations_run} CG iterations, gradient norm {res.final_gradient_norm:.3g}; "
          f"wrote {out}")
    return 0


def _cmd_joint(args):
    hp = _hyperparams(args)
    if args.data:
        x, psi = _load(args)
    else:
        x, _ = gsd(SynthConfig(seed=args.seed or 0))
        psi = np.ones_like(x)
    fraction = args.mask_fraction
    if fraction is None:
        fraction = 0.05 if args.command == "learn" else 0.0
    if fraction > 0:
        psi = psi * sample_mask(*x.shape, fraction, np.random.default_rng(args.seed or 0))
    y = psi * x
    alpha = AlphaParams(args.alpha or np.ones(hp.k_poly + 1))
    # learn trains only when --epochs is given explicitly
    if args.command == "train" or (args.train_epochs or 0) > 0:
        alpha, trace = train_alpha(y, psi, alpha, hp)
        print(f"trained alpha {alpha.coeffs.tolist()} after {len(trace)} epochs")
    state = forward(y, psi, alpha, hp)
    model_out = args.model_out or args.out
    if model_out:
        dump_model(model_out, alpha.coeffs, state.laplacian.matrix,
                   extra={"hyperparams": asdict(hp)})
        print(f"wrote {model_out}")
    if args.completed_out:
        save_matrix_csv(args.completed_out, state.x_hat)
    return 0


def _cmd_sweep(args):
    overrides = {
        f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
        if f.name not in ("hyperparams", "mode") and getattr(args, f.name, None) is not None
    }
    if args.data:
        overrides["data_path"] = args.data
    if args.graph:
        overrides["graph_path"] = args.graph
    if args.alpha:
        overrides["alpha0"] = args.alpha
    if args.out:
        overrides["output_path"] = args.out
    if args.config:
        config = ExperimentConfig.from_json(args.config, **overrides)
    else:
        config = ExperimentConfig(**overrides)
    config.mode = "sweep"
    config.hyperparams = _hyperparams(args, config.hyperparams)
    records = run_experiment(config)
    out = config.output_path or f"results.{config.format}"
    emit_results(records, out, config.format)
    n_failed = sum(r.status != "ok" for r in records if r.kind == "trial")
    print(f"wrote {len(records)} records to {out} ({n_failed} failed trials)")
    return 0


COMMANDS = {"synth": _cmd_synth, "inpaint": _cmd_inpaint, "learn": _cmd_joint,
            "train": _cmd_joint, "sweep": _cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (GSPUnrollError, OSError, ValueError) as exc:
        print(f"gsp-unroll {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
