"""Twin experiments, inflation sweeps and the Darcy inversion driver.

Results are written as CSV with 17 significant digits so that a rerun with
the same configuration reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import glob
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .darcy import darcy_forward
from .dynamics import OdeModel, integrate, lorenz63, lorenz96, propagate_ensemble
from .eki import EkiProblem, EkiTrace, run_eki
from .ensemble import StatePartition, perturbed_constant_ensemble
from .errors import NumericalError
from .gaussian import Localization, MeasurementModel, eakf_update
from .update import NlbuConfig, nlbu_update

log = logging.getLogger(__name__)

CYCLE_COLUMNS = ("cycle", "prior_error", "post_error", "fallback")
SUMMARY_COLUMNS = ("method", "prior", "post", "fallback_fraction", "diverged")
SWEEP_COLUMNS = ("inflation", "prior", "post", "fallback_fraction", "best")
EKI_COLUMNS = ("iteration", "error", "misfit", "fallback", "subsample_size")


def fmt(x) -> str:
    return f"{float(x):.17g}"


def error_metric(estimate_mean, truth) -> float:
    """Root-mean-square error ``||estimate - truth|| / sqrt(d)``."""
    diff = np.asarray(estimate_mean, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.linalg.norm(diff) / math.sqrt(diff.size))


def build_model(cfg: ExperimentConfig) -> OdeModel:
    if cfg.experiment == "l63":
        return lorenz63(cfg.sigma, cfg.rho, cfg.beta)
    if cfg.experiment == "l96":
        return lorenz96(cfg.F, cfg.dim)
    raise ValueError(f"{cfg.experiment} has no dynamical model")


def nlbu_config(cfg: ExperimentConfig, subsampling=None, clustering=None) -> NlbuConfig:
    return NlbuConfig(
        radius=cfg.radius,
        m_min=cfg.m_min,
        clustering_enabled=cfg.clustering if clustering is None else clustering,
        subsampling_enabled=cfg.subsampling if subsampling is None else subsampling,
        oversample_factor=cfg.oversample_factor,
        inflation=cfg.inflation,
        localization=localization(cfg),
    )


def localization(cfg: ExperimentConfig) -> Localization | None:
    if cfg.localization_half_width is None:
        return None
    period = cfg.dim if cfg.experiment == "l96" else None
    return Localization(cfg.localization_half_width, period)


def method_label(cfg: ExperimentConfig) -> str:
    if cfg.method == "eakf":
        return "EAKF"
    return nlbu_config(cfg).label


def run_tag(cfg: ExperimentConfig) -> str:
    label = method_label(cfg).lower().replace(" w/ ", "_").replace(" ", "_")
    extra = f"_F{cfg.F:g}" if cfg.experiment == "l96" else ""
    return f"{cfg.experiment}{extra}_{label}_infl{cfg.inflation:g}_seed{cfg.seed}"


@dataclass
class ExperimentRecord:
    method: str
    prior_error: np.ndarray
    post_error: np.ndarray
    fallback: np.ndarray
    diverged_at: int | None = None
    truth: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_cycles(self) -> int:
        return self.prior_error.size

    @property
    def window(self) -> slice:
        """The last ``ceil(n/2)`` cycles."""
        return slice(self.n_cycles - math.ceil(self.n_cycles / 2), self.n_cycles)

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def prior_mean_error(self) -> float:
        return math.inf if self.diverged else float(np.mean(self.prior_error[self.window]))

    @property
    def post_mean_error(self) -> float:
        return math.inf if self.diverged else float(np.mean(self.post_error[self.window]))

    @property
    def fallback_fraction(self) -> float:
        return float(np.mean(self.fallback))

    def summary_row(self) -> dict:
        return dict(method=self.method, prior=self.prior_mean_error, post=self.post_mean_error,
                    fallback_fraction=self.fallback_fraction, diverged=int(self.diverged))


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_twin_experiment(cfg: ExperimentConfig, keep_truth: bool = False) -> ExperimentRecord:
    """Synthetic-truth data assimilation run of ``cfg.n_cycles`` forecast/update cycles.

    A filter divergence does not raise: the record is cut at the failing
    cycle and flagged.
    """
    model = build_model(cfg)
    d = model.dim
    partition = StatePartition(d, cfg.observed)
    truth_rng, ens_rng, obs_rng, upd_rng = _streams(cfg.seed, 4)
    steps = cfg.steps_per_cycle

    truth0 = cfg.init_value + np.sqrt(cfg.init_variance) * truth_rng.standard_normal(d)
    truth = integrate(model, truth0, cfg.dt, cfg.spinup_steps)
    ens = perturbed_constant_ensemble(np.full(d, cfg.init_value), cfg.init_variance,
                                      cfg.ensemble_size, ens_rng, partition)
    gamma = cfg.obs_variance * np.eye(partition.d2)
    nl_cfg = nlbu_config(cfg) if cfg.method == "nlbu" else None
    loc = localization(cfg)

    n = cfg.n_cycles
    prior_err = np.full(n, np.nan)
    post_err = np.full(n, np.nan)
    fallback = np.zeros(n, dtype=bool)
    truths = np.full((n, d), np.nan) if keep_truth else None
    diverged_at = None
    for c in range(n):
        try:
            truth = integrate(model, truth, cfg.dt, steps)
            ens = propagate_ensemble(model, ens, cfg.dt, steps)
            prior_err[c] = error_metric(ens.mean, truth)
            m = truth[partition.v_index] + np.sqrt(cfg.obs_variance) * obs_rng.standard_normal(partition.d2)
            meas = MeasurementModel(partition, gamma, m)
            # a blown-up ensemble overflows here; the error check below reports it
            with np.errstate(over="ignore", invalid="ignore"):
                if nl_cfg is None:
                    ens = eakf_update(ens, meas, cfg.inflation, loc)
                    estimate = ens.mean
                else:
                    out = nlbu_update(ens, meas, nl_cfg, upd_rng.integers(2**63))
                    ens, estimate, fallback[c] = out.posterior, out.posterior_mean, out.used_fallback
            post_err[c] = error_metric(estimate, truth)
        except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("filter diverged at cycle %d: %s", c, exc)
            diverged_at = c
            break
        if keep_truth:
            truths[c] = truth
        if not (np.isfinite(post_err[c]) and post_err[c] < 1e6):
            diverged_at = c
            break
    return ExperimentRecord(method_label(cfg), prior_err, post_err, fallback, diverged_at, truths)


def write_cycles_csv(record: ExperimentRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CYCLE_COLUMNS)
        for c in range(record.n_cycles):
            if record.diverged_at is not None and c > record.diverged_at:
                break
            w.writerow([c + 1, fmt(record.prior_error[c]), fmt(record.post_error[c]),
                        int(record.fallback[c])])


def write_summary_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r["method"], fmt(r["prior"]), fmt(r["post"]), fmt(r["fallback_fraction"]),
                        r["diverged"]])


def save_run(cfg: ExperimentConfig, record: ExperimentRecord) -> tuple[str, str]:
    os.makedirs(cfg.output_dir, exist_ok=True)
    tag = run_tag(cfg)
    cycles = os.path.join(cfg.output_dir, f"{tag}.csv")
    summary = os.path.join(cfg.output_dir, f"{tag}_summary.csv")
    write_cycles_csv(record, cycles)
    write_summary_csv([record.summary_row()], summary)
    return cycles, summary


@dataclass(frozen=True)
class SweepRow:
    inflation: float
    prior: float
    post: float
    fallback_fraction: float
    best: bool = False


def sweep_inflation(cfg: ExperimentConfig, values, n_jobs: int | None = None):
    """Run the experiment once per inflation value with the same seed.

    Returns ``(rows, records)``; the row with the lowest time-averaged
    posterior error is marked best (diverged runs rank last).
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("need at least one inflation value")
    cfgs = [cfg.replace(inflation=v) for v in values]
    n_jobs = cfg.n_jobs if n_jobs is None else n_jobs
    if n_jobs == 1:
        records = [run_twin_experiment(c) for c in cfgs]
    else:
        from joblib import Parallel, delayed
        records = Parallel(n_jobs=n_jobs)(delayed(run_twin_experiment)(c) for c in cfgs)
    posts = [r.post_mean_error for r in records]
    best = int(np.argmin(posts))
    rows = [SweepRow(v, r.prior_mean_error, r.post_mean_error, r.fallback_fraction, i == best)
            for i, (v, r) in enumerate(zip(values, records))]
    return rows, records


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.inflation), fmt(r.prior), fmt(r.post), fmt(r.fallback_fraction),
                        int(r.best)])


def parse_range(spec: str) -> list[float]:
    """``"1.0:1.5:0.05"`` -> ``[1.0, 1.05, ..., 1.5]`` (endpoint included)."""
    parts = [float(p) for p in spec.split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0:
        raise ValueError(f"expected start:stop:step, got {spec!r}")
    start, stop, step = parts
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def eki_rule(method: str, cfg: ExperimentConfig):
    """``"eakf"`` or ``"nlbu"`` with optional ``+ss`` / ``+cl`` suffixes."""
    parts = method.lower().split("+")
    if parts[0] == "eakf":
        return "EAKF", "linear"
    if parts[0] != "nlbu":
        raise ValueError(f"unknown method {method!r}")
    flags = set(parts[1:])
    if flags - {"ss", "cl"}:
        raise ValueError(f"unknown method flags in {method!r}")
    rule = nlbu_config(cfg, subsampling="ss" in flags, clustering="cl" in flags)
    return rule.label, rule


def darcy_problem(cfg: ExperimentConfig, noise: bool = True) -> EkiProblem:
    """Synthetic Darcy inversion problem; the measurement noise uses its own seed stream."""
    n = cfg.grid_n
    truth = np.asarray(cfg.truth, dtype=float)
    noise_rng = _streams(cfg.seed, 3)[0]
    m = darcy_forward(truth, n)
    if noise:
        m = m + np.sqrt(cfg.obs_variance) * noise_rng.standard_normal(m.size)
    forward = _DarcyForward(n)
    return EkiProblem(forward, m, cfg.obs_variance * np.eye(m.size), cfg.max_iters, cfg.rel_tol,
                      truth)


class _DarcyForward:
    # picklable for joblib workers
    def __init__(self, n):
        self.n = n

    def __call__(self, u):
        return darcy_forward(u, self.n)


def darcy_initial_ensemble(cfg: ExperimentConfig) -> np.ndarray:
    rng = _streams(cfg.seed, 3)[1]
    return cfg.init_value + np.sqrt(cfg.init_variance) * rng.standard_normal((cfg.ensemble_size, 2))


def run_eki_experiment(cfg: ExperimentConfig, methods=None, noise: bool = True,
                       write: bool = True) -> dict[str, EkiTrace]:
    """Run the Darcy inversion for each method; returns ``{label: trace}``."""
    problem = darcy_problem(cfg, noise)
    init = darcy_initial_ensemble(cfg)
    update_seed = int(_streams(cfg.seed, 3)[2].integers(2**63))
    traces = {}
    for method in methods or cfg.methods:
        label, rule = eki_rule(method, cfg)
        log.info("EKI with %s", label)
        traces[label] = run_eki(problem, init, rule, update_seed, inflation=cfg.inflation,
                                n_jobs=cfg.n_jobs)
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        for label, trace in traces.items():
            slug = label.lower().replace(" w/ ", "_").replace(" ", "_")
            write_eki_csv(trace, os.path.join(cfg.output_dir, f"darcy_{slug}_seed{cfg.seed}.csv"))
    return traces


def write_eki_csv(trace: EkiTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EKI_COLUMNS)
        for i in range(len(trace.mean_u)):
            M = trace.subsample_size[i]
            w.writerow([i, fmt(trace.error[i]) if trace.error else "", fmt(trace.misfit[i]),
                        int(trace.fallback[i]), "" if M is None else M])


def read_summaries(directory) -> list[dict]:
    rows = []
    for path in sorted(glob.glob(os.path.join(directory, "*_summary.csv"))):
        with open(path, encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                r["source"] = os.path.basename(path)[: -len("_summary.csv")]
                rows.append(r)
    return rows


def format_table(rows) -> str:
    """Plain-text table of method, prior and posterior errors."""
    header = ("run", "method", "prior error", "post error", "fallback")
    body = [(r["source"], r["method"], f"{float(r['prior']):.3e}", f"{float(r['post']):.3e}",
             f"{100 * float(r['fallback_fraction']):.0f}%") for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(x.ljust(w) for x, w in zip(line, widths)) for line in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
