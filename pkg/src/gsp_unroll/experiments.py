"""Seeded experiment driver: mask and noise sweeps over the joint pipeline,
with the open-loop baselines alongside."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import AlphaParams, GraphLaplacian, Hyperparams, validate_laplacian
from .errors import GSPUnrollError
from .graphlearn import covariance_init, knn_graph
from .inpaint import emd
from .io import ResultRecord, load_csv, load_laplacian_csv
from .metrics import binarize, f_score, normalized_error, stability_score
from .synth import SynthConfig, add_noise, gsd, sample_mask
from .unroll import forward, train_alpha

log = logging.getLogger(__name__)

MODES = ("synth", "inpaint", "learn", "train", "sweep")


@dataclass
class ExperimentConfig:
    mode: str = "sweep"
    experiment_id: str = "experiment"
    data_path: str | None = None
    graph_path: str | None = None
    fractions: list = field(default_factory=lambda: [0.3])
    snrs: list | None = None
    repeats: int = 20
    seed: int = 0
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    alpha0: list | None = None  # default: all ones, length k_poly + 1
    # synthetic data (used when data_path is None)
    n_vertices: int = 20
    n_timestamps: int = 500
    edge_prob: float = 0.3
    alpha_true: list = field(default_factory=lambda: [1.0, 4.0, 1.66])
    # evaluation
    threshold: float = 0.1
    knn_k: int = 3
    baseline_alpha: list = field(default_factory=lambda: [0.0, 1.0, 0.0])
    baselines: bool = False
    stability: bool = False
    record_timing: bool = False
    workers: int = 1
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if isinstance(self.hyperparams, dict):
            self.hyperparams = Hyperparams(**self.hyperparams)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.fractions:
            raise ValueError("fraction grid is empty")
        if self.snrs is not None and len(self.snrs) == 0:
            raise ValueError("SNR grid is empty")
        for p in (self.data_path, self.graph_path):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"no such file: {p}")
        if self.stability and self.repeats < 2:
            raise ValueError("stability needs repeats >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")

    @classmethod
    def from_json(cls, path, **overrides):
        """Load a config file; keyword overrides win over file values."""
        raw = json.loads(Path(path).read_text())
        hp = dict(raw.pop("hyperparams", {}))
        hp.update(overrides.pop("hyperparams", {}) or {})
        raw.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(hyperparams=Hyperparams(**hp), **raw)

    def to_dict(self):
        d = asdict(self)
        d["hyperparams"] = asdict(self.hyperparams)
        return d


@dataclass
class Dataset:
    x: np.ndarray
    psi: np.ndarray  # cells present in the source data
    truth: GraphLaplacian | None


def load_dataset(config):
    if config.data_path is not None:
        x, psi = load_csv(config.data_path)
    else:
        synth = SynthConfig(config.n_vertices, config.n_timestamps, config.edge_prob,
                            AlphaParams(config.alpha_true), config.seed)
        x, truth = gsd(synth)
        psi = np.ones_like(x)
        if config.graph_path is None:
            return Dataset(x, psi, truth)
    truth = None
    if config.graph_path is not None:
        truth = validate_laplacian(load_laplacian_csv(config.graph_path))
    return Dataset(x, psi, truth)


def grid_points(config):
    """(missing_fraction, snr_db) pairs; an SNR grid runs at the first fraction."""
    if config.snrs is not None:
        return [(float(config.fractions[0]), float(s)) for s in config.snrs]
    return [(float(f), None) for f in config.fractions]


def _trial_seed(seed, point, repeat):
    ss = np.random.SeedSequence([int(seed), int(point), int(repeat)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class TrialOutput:
    record: ResultRecord
    laplacian: np.ndarray | None


def run_trial(config, data, point_index, repeat):
    """One mask draw: sample, corrupt, train alpha, run the network, score."""
    fraction, snr = grid_points(config)[point_index]
    seed = _trial_seed(config.seed, point_index, repeat)
    rng = np.random.default_rng(seed)
    hp = config.hyperparams
    n, m = data.x.shape
    t0 = time.perf_counter()
    record = ResultRecord(config.experiment_id, "trial", repeat, fraction, snr_db=snr, seed=seed)
    try:
        removed = sample_mask(n, m, fraction, rng)
        psi = removed * data.psi
        x_obs = data.x if snr is None else add_noise(data.x, snr, rng)
        y = psi * x_obs
        # error is scored only where the truth is known
        psi_eval = 1.0 - (1.0 - removed) * data.psi
        alpha = AlphaParams(config.alpha0 if config.alpha0 is not None
                            else np.ones(hp.k_poly + 1))
        if config.mode in ("train", "sweep", "learn"):
            alpha, _ = train_alpha(y, psi, alpha, hp)
        record.alpha = alpha.coeffs.tolist()
        if config.mode == "inpaint":
            graph = data.truth if data.truth is not None else knn_graph(y, psi, config.knn_k)
            x_hat = emd(y, psi, graph, alpha, hp.lam, hp.k1).x_hat
            learned = graph
        else:
            state = forward(y, psi, alpha, hp)
            x_hat, learned = state.x_hat, state.laplacian
        if fraction > 0:
            record.normalized_error = normalized_error(data.x, x_hat, psi_eval)
        if data.truth is not None:
            truth_edges = binarize(data.truth, config.threshold)
            record.f_score = f_score(binarize(learned, config.threshold), truth_edges)
        if config.baselines:
            _baselines(record, config, data, y, psi, psi_eval)
        learned_matrix = learned.matrix
    except GSPUnrollError as exc:
        log.warning("trial %s/%s failed: %s", point_index, repeat, exc)
        record.status = f"failed: {type(exc).__name__}"
        record.normalized_error = record.f_score = None
        learned_matrix = None
    if config.record_timing:
        record.seconds = time.perf_counter() - t0
    return TrialOutput(record, learned_matrix)


def _baselines(record, config, data, y, psi, psi_eval):
    hp = config.hyperparams
    balpha = AlphaParams(config.baseline_alpha)
    L_cov = covariance_init(y, psi)
    scored = record.missing_fraction > 0
    if scored:
        record.error_covariance_graph = normalized_error(
            data.x, emd(y, psi, L_cov, balpha, hp.lam, hp.k1).x_hat, psi_eval)
        L_knn = knn_graph(y, psi, config.knn_k)
        record.error_knn_graph = normalized_error(
            data.x, emd(y, psi, L_knn, balpha, hp.lam, hp.k1).x_hat, psi_eval)
    if data.truth is not None:
        if scored:
            record.error_true_graph = normalized_error(
                data.x, emd(y, psi, data.truth, balpha, hp.lam, hp.k1).x_hat, psi_eval)
        record.f_score_covariance_graph = f_score(binarize(L_cov, config.threshold),
                                                  binarize(data.truth, config.threshold))


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    total = 0.0
    for v in vals:
        total += v
    mean = total / len(vals)
    sq = 0.0
    for v in vals:
        sq += (v - mean) ** 2
    return mean, (sq / len(vals)) ** 0.5


def aggregate(config, point_index, outputs):
    fraction, snr = grid_points(config)[point_index]
    recs = [o.record for o in outputs if o.record.status == "ok"]
    agg = ResultRecord(config.experiment_id, "aggregate", None, fraction, snr_db=snr,
                       seed=config.seed)
    agg.normalized_error, agg.normalized_error_std = _mean_std(r.normalized_error for r in recs)
    agg.f_score, agg.f_score_std = _mean_std(r.f_score for r in recs)
    for name in ("error_covariance_graph", "error_knn_graph", "error_true_graph",
                 "f_score_covariance_graph"):
        setattr(agg, name, _mean_std(getattr(r, name) for r in recs)[0])
    if config.stability:
        graphs = [o.laplacian for o in outputs if o.laplacian is not None]
        if len(graphs) >= 2:
            agg.stability = stability_score([GraphLaplacian(g) for g in graphs], config.threshold)
    if len(recs) < len(outputs):
        agg.status = f"partial: {len(outputs) - len(recs)} failed"
    if not recs:
        agg.status = "failed"
    return agg


def _run_one(args):
    config, data, p, r = args
    return run_trial(config, data, p, r)


def run_experiment(config, data=None):
    """All trials for every grid point, each followed by its aggregate record.

    Trials are independent and may run on ``config.workers`` processes;
    aggregation is sequential in trial order, so output is deterministic.
    """
    config.validate()
    if config.mode == "synth":
        raise ValueError("synth mode only writes data; nothing to run")
    data = load_dataset(config) if data is None else data
    jobs = [(config, data, p, r)
            for p in range(len(grid_points(config))) for r in range(config.repeats)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(_run_one, jobs))
    else:
        outputs = [_run_one(j) for j in jobs]
    records = []
    for p in range(len(grid_points(config))):
        chunk = outputs[p * config.repeats:(p + 1) * config.repeats]
        records.extend(o.record for o in chunk)
        records.append(aggregate(config, p, chunk))
    return records
