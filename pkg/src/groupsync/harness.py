"""Seeded Monte Carlo experiments, parameter sweeps and perturbation-bound audits.

Trial ``i`` of an experiment draws its instance from ``RngStream(seed, i)``
and its eigensolver start block from ``SeedSequence(seed, spawn_key=(i, 1))``,
so trials are independent of each other and of the execution order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    DegenerateImage,
    first_order_orthogonal,
    first_order_phase,
    population_eigenspace,
    population_eigenvector,
    spectral_orthogonal_estimate,
    spectral_phase_estimate,
)
from .metrics import (
    NORM_CEILINGS,
    PerturbationCertificate,
    audit_norm_lemmas,
    audit_subspace_perturbation,
    audit_vector_perturbation,
    gauge_distance_subspace,
    gauge_distance_vector,
    minimax_reference,
    orthogonal_loss,
    phase_loss,
)
from .model import (
    GENERATOR_VERSION,
    RngStream,
    assemble_orthogonal_instance,
    assemble_phase_instance,
    block_mask,
    haar_orthogonal,
    sample_orthogonal_truth,
    sample_phase_truth,
    stack_blocks,
)
from .numlin import NonConvergence, RankDeficient, operator_norm_estimate, top_eigenspace

__all__ = [
    "CHECKS",
    "CSV_COLUMNS",
    "ExperimentAborted",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentResult",
    "SweepResult",
    "AuditResult",
    "run_trial",
    "run_experiment",
    "summarize",
    "evaluate_checks",
    "run_sweep",
    "sweep_trend",
    "lemma_audit_pair",
    "run_lemma_audit",
    "emit_results",
    "emit_sweep",
    "emit_audit",
    "load_results",
]

CHECKS = ("risk_ratio", "exact_recovery", "perturbation_audit", "norm_audit", "first_order_gap")

CSV_COLUMNS = (
    "trial_id", "n", "p", "sigma", "d", "seed", "loss", "minimax_ref", "ratio",
    "lambda1", "gap", "residual", "dist_u_tilde", "dist_u_star", "runtime_ms",
)

MAX_FAILURE_FRACTION = 0.05
# first_order_gap: fraction of trials in which the sample eigenvector is closer
# to its first-order approximation than to the population eigenvector
FIRST_ORDER_FRACTION = 0.95
SWEEP_AXES = ("n", "p", "sigma")
# solver failures are not raised out of a trial; they are recorded
_TRIAL_ERRORS = (NonConvergence, RankDeficient, DegenerateImage)


class ExperimentAborted(RuntimeError):
    """More than 5% of trials failed in the solver."""


@dataclass
class ExperimentConfig:
    mode: str = "phase"
    n: int = 200
    d: int = 1
    p: float = 0.5
    sigma: float = 1.0
    trials: int = 10
    seed: int = 0
    truth_kind: str | None = None
    # "per_trial": fresh truth each trial; "fixed": one truth shared by all trials
    truth_policy: str = "per_trial"
    out: str | None = None
    format: str = "csv"
    checks: tuple = ()
    ratio_window: tuple = (0.8, 1.3)
    exact_tol: float = 1e-16
    workers: int = 1

    def __post_init__(self):
        self.checks = tuple(self.checks)
        self.ratio_window = tuple(self.ratio_window)
        if self.mode == "orthogonal" and self.d == 1:
            self.d = 2
        if self.truth_kind is None:
            self.truth_kind = "uniform" if self.mode == "phase" else "haar"

    def validate(self) -> "ExperimentConfig":
        if self.mode not in ("phase", "orthogonal"):
            raise ValueError(f"mode must be 'phase' or 'orthogonal', got {self.mode!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.mode == "phase" and self.d != 1:
            raise ValueError("phase mode has d = 1")
        if self.mode == "orthogonal" and self.d < 2:
            raise ValueError("orthogonal mode needs d >= 2")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.truth_policy not in ("per_trial", "fixed"):
            raise ValueError("truth_policy must be 'per_trial' or 'fixed'")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ValueError(f"unknown checks {sorted(bad)}; known: {CHECKS}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["checks"] = list(self.checks)
        out["ratio_window"] = list(self.ratio_window)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrialRecord:
    trial_id: int
    n: int
    p: float
    sigma: float
    d: int
    seed: int
    loss: float = math.nan
    minimax_ref: float = math.nan
    # None when minimax_ref == 0; exact_recovery carries the verdict instead
    ratio: float | None = None
    exact_recovery: bool | None = None
    lambda1: float = math.nan
    gap: float = math.nan
    residual: float = math.nan
    residual_scale: float = math.nan
    gap_warning: bool = False
    dist_u_tilde: float = math.nan
    dist_u_star: float = math.nan
    runtime_ms: float = 0.0
    failed: bool = False
    error: str | None = None
    certificate: dict | None = None
    norms: dict | None = None

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def _solver_rng(seed: int, trial_id: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(trial_id), 1)))
    )


def _fixed_truth(cfg: ExperimentConfig):
    # stream id 2**32 is reserved for the shared truth
    gen = RngStream(cfg.seed, 2**32).generator()
    if cfg.mode == "phase":
        return sample_phase_truth(cfg.n, gen, cfg.truth_kind)
    return sample_orthogonal_truth(cfg.n, cfg.d, gen, cfg.truth_kind)


def run_trial(cfg: ExperimentConfig, trial_id: int, truth=None) -> TrialRecord:
    """One trial: generate, estimate, score, and collect diagnostics."""
    t0 = time.perf_counter()
    rec = TrialRecord(trial_id, cfg.n, cfg.p, cfg.sigma, cfg.d, cfg.seed)
    stream = RngStream(cfg.seed, trial_id)
    solver_rng = _solver_rng(cfg.seed, trial_id)
    try:
        if cfg.mode == "phase":
            inst = assemble_phase_instance(cfg.n, cfg.p, cfg.sigma, stream, cfg.truth_kind, truth)
            z_hat, pair = spectral_phase_estimate(inst.data, rng=solver_rng)
            rec.loss = phase_loss(z_hat, inst.truth).loss
            rec.lambda1, rec.gap, rec.residual = pair.value, pair.gap, pair.residual
            rec.residual_scale = abs(pair.value)
            rec.gap_warning = pair.gap_warning
            pop = population_eigenvector(inst.A, inst.truth, rng=solver_rng)
            u_tilde = first_order_phase(inst.data, pop)
            rec.dist_u_tilde = gauge_distance_vector(pair.vector, u_tilde)
            rec.dist_u_star = gauge_distance_vector(pair.vector, pop.u_star)
            if "perturbation_audit" in cfg.checks:
                Y_star = inst.A * np.outer(inst.truth, inst.truth.conj())
                cert = audit_vector_perturbation(inst.data, Y_star, rng=solver_rng)
                rec.certificate = cert.to_dict()
        else:
            inst = assemble_orthogonal_instance(
                cfg.n, cfg.d, cfg.p, cfg.sigma, stream, cfg.truth_kind, truth
            )
            Z_hat, space = spectral_orthogonal_estimate(inst.data, cfg.d, rng=solver_rng)
            rec.loss = orthogonal_loss(Z_hat, inst.truth).loss
            rec.lambda1 = float(space.values[0])
            rec.gap = float(space.values[-1] - space.next_value)
            rec.residual = space.residual
            rec.residual_scale = float(np.max(np.abs(space.values)))
            rec.gap_warning = space.gap_warning
            pop = population_eigenspace(inst.A, inst.truth, rng=solver_rng)
            U_tilde = first_order_orthogonal(inst.data, pop)
            U = np.real(space.basis)
            rec.dist_u_tilde = gauge_distance_subspace(U, U_tilde).upper
            rec.dist_u_star = gauge_distance_subspace(U, pop.U_star).upper
            if "perturbation_audit" in cfg.checks:
                Zs = stack_blocks(inst.truth)
                Y_star = block_mask(inst.A, cfg.d) * (Zs @ Zs.T)
                Y_star = np.triu(Y_star) + np.triu(Y_star, 1).T
                cert = audit_subspace_perturbation(inst.data, Y_star, cfg.d, rng=solver_rng)
                rec.certificate = cert.to_dict()
        if "norm_audit" in cfg.checks:
            rec.norms = audit_norm_lemmas(inst, rng=solver_rng)
    except _TRIAL_ERRORS as exc:
        rec.failed = True
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.minimax_ref = minimax_reference(cfg.mode, cfg.n, cfg.p, cfg.sigma, cfg.d)
    if not rec.failed:
        if rec.minimax_ref > 0:
            rec.ratio = rec.loss / rec.minimax_ref
        else:
            rec.exact_recovery = bool(rec.loss <= cfg.exact_tol)
    rec.runtime_ms = (time.perf_counter() - t0) * 1e3
    return rec


def _stats(values) -> dict:
    arr = np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return {"mean": None, "median": None, "p5": None, "p95": None, "max": None}
    return {
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "p5": float(np.percentile(arr, 5)),
        "p95": float(np.percentile(arr, 95)),
        "max": float(arr.max()),
    }


def summarize(records: list[TrialRecord]) -> dict:
    """Summary statistics; a pure function of the per-trial records."""
    records = sorted(records, key=lambda r: r.trial_id)
    ok = [r for r in records if not r.failed]
    closer = [r.dist_u_tilde < r.dist_u_star for r in ok]
    rel_res = [r.residual / r.residual_scale for r in ok if r.residual_scale > 0]
    return {
        "trials": len(records),
        "succeeded": len(ok),
        "failed": len(records) - len(ok),
        "loss": _stats(r.loss for r in ok),
        "ratio": _stats(r.ratio for r in ok),
        "dist_u_tilde": _stats(r.dist_u_tilde for r in ok),
        "dist_u_star": _stats(r.dist_u_star for r in ok),
        "first_order_closer_fraction": float(np.mean(closer)) if closer else None,
        "exact_recovery_all": all(r.exact_recovery for r in ok)
        if ok and ok[0].minimax_ref == 0 else None,
        "max_relative_residual": float(max(rel_res)) if rel_res else 0.0,
        "gap_warnings": sum(r.gap_warning for r in ok),
    }


def evaluate_checks(cfg: ExperimentConfig, records: list[TrialRecord], summary: dict) -> dict:
    """Named pass/fail verdicts for the checks enabled in ``cfg``."""
    ok = [r for r in records if not r.failed]
    out = {}
    for name in cfg.checks:
        if name == "risk_ratio":
            mean = summary["ratio"]["mean"]
            lo, hi = cfg.ratio_window
            passed = mean is not None and lo <= mean <= hi
            out[name] = {"passed": passed, "mean_ratio": mean, "window": [lo, hi]}
        elif name == "exact_recovery":
            worst = max((r.loss for r in ok), default=math.inf)
            out[name] = {"passed": bool(worst <= cfg.exact_tol), "max_loss": worst,
                         "tol": cfg.exact_tol}
        elif name == "perturbation_audit":
            certs = [r.certificate for r in ok if r.certificate is not None]
            met = [c for c in certs if c["precondition_met"]]
            failed = sum(1 for c in met if not c["passed"])
            out[name] = {"passed": failed == 0, "checked": len(met),
                         "skipped": len(certs) - len(met), "failed": failed}
        elif name == "norm_audit":
            worst = {}
            for r in ok:
                for key, val in (r.norms or {}).items():
                    if val is not None:
                        worst[key] = max(worst.get(key, 0.0), val)
            passed = bool(worst) and all(worst[k] <= NORM_CEILINGS[k] for k in worst)
            out[name] = {"passed": passed, "max": worst, "ceilings": NORM_CEILINGS}
        elif name == "first_order_gap":
            frac = summary["first_order_closer_fraction"]
            out[name] = {"passed": frac is not None and frac >= FIRST_ORDER_FRACTION,
                         "fraction": frac, "required": FIRST_ORDER_FRACTION}
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: dict
    checks: dict = field(default_factory=dict)
    truth_policy: str = "per_trial"

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


def _trial_worker(args):
    cfg, trial_id, truth = args
    return run_trial(cfg, trial_id, truth)


def run_experiment(cfg: ExperimentConfig, trial_ids=None) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials and aggregate them.

    Raises ExperimentAborted when more than 5% of trials hit a solver failure.
    """
    cfg.validate()
    ids = list(range(cfg.trials)) if trial_ids is None else list(trial_ids)
    truth = _fixed_truth(cfg) if cfg.truth_policy == "fixed" else None
    jobs = [(cfg, i, truth) for i in ids]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_trial_worker, jobs))
    else:
        records = [_trial_worker(job) for job in jobs]
    records.sort(key=lambda r: r.trial_id)
    n_failed = sum(r.failed for r in records)
    if n_failed > MAX_FAILURE_FRACTION * len(records):
        raise ExperimentAborted(f"{n_failed}/{len(records)} trials failed: "
                                f"{next(r.error for r in records if r.failed)}")
    summary = summarize(records)
    summary["truth_policy"] = cfg.truth_policy
    return ExperimentResult(cfg, records, summary, evaluate_checks(cfg, records, summary),
                            cfg.truth_policy)


@dataclass
class SweepResult:
    base: ExperimentConfig
    axis: str
    values: list
    results: list
    trend: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results) and bool(self.trend.get("ok", True))

    def table(self) -> list[dict]:
        rows = []
        for v, res in zip(self.values, self.results):
            c = res.config
            rows.append({
                self.axis: v,
                "snr": c.n * c.p / c.sigma**2 if c.sigma > 0 else math.inf,
                "mean_loss": res.summary["loss"]["mean"],
                "mean_ratio": res.summary["ratio"]["mean"],
                "median_ratio": res.summary["ratio"]["median"],
                "failed": res.summary["failed"],
            })
        return rows


def sweep_trend(rows: list[dict], max_inversions: int = 1) -> dict:
    """Trend of the mean ratio as ``np/sigma^2`` grows.

    An inversion is a step where the mean ratio moves away from 1 as the SNR
    grows; the trend is accepted with at most ``max_inversions`` of them and
    when the highest-SNR ratio is no farther from 1 than the lowest-SNR one.
    """
    pts = sorted((r["snr"], r["mean_ratio"]) for r in rows if r["mean_ratio"] is not None)
    ratios = [r for _, r in pts]
    inversions = sum(1 for a, b in zip(ratios, ratios[1:]) if abs(b - 1) > abs(a - 1))
    toward_one = len(ratios) < 2 or abs(ratios[-1] - 1) <= abs(ratios[0] - 1)
    return {
        "snr": [s for s, _ in pts],
        "mean_ratio": ratios,
        "inversions": inversions,
        "approaches_one": toward_one,
        "ok": inversions <= max_inversions and toward_one,
    }


def run_sweep(base: ExperimentConfig, axis: str, values) -> SweepResult:
    """Run ``base`` once per value of ``axis``.

    Every point reuses trial ids 0..trials-1, so at a fixed n the masks and
    noise draws are shared across points (common random numbers).
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    values = list(values)
    if values != sorted(values):
        raise ValueError("sweep values must be sorted ascending")
    cast = int if axis == "n" else float
    results = [run_experiment(replace(base, **{axis: cast(v)})) for v in values]
    sweep = SweepResult(base, axis, values, results, {})
    sweep.trend = sweep_trend(sweep.table())
    return sweep


# ---------------------------------------------------------------- lemma audits

def _haar_unitary(n: int, gen: np.random.Generator, complex_: bool) -> np.ndarray:
    if not complex_:
        return haar_orthogonal(n, gen)
    G = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    ph = np.diagonal(R) / np.abs(np.diagonal(R))
    return Q * ph


def _random_noise(n: int, gen: np.random.Generator, complex_: bool) -> np.ndarray:
    G = gen.standard_normal((n, n))
    if complex_:
        G = G + 1j * gen.standard_normal((n, n))
    E = (G + G.conj().T) / 2
    return E / operator_norm_estimate(E, tol=1e-12, rng=gen)


def _synthetic_pair(gen, d: int, complex_: bool):
    """Low-rank-plus-noise pair whose perturbation meets the bound's precondition."""
    n = int(gen.integers(20, 201))
    top = float(gen.uniform(5.0, 50.0))
    if d == 1:
        if gen.random() < 0.25:
            lead = np.array([top])
            nxt = 0.0
            rest = np.zeros(n - 1)
        else:
            lead = np.array([top])
            nxt = top * float(gen.uniform(0.0, 0.8))
            rest = np.concatenate([[nxt], gen.uniform(-0.5 * top, nxt, n - 2)])
    else:
        lead = np.sort(top * (1 + gen.uniform(0.0, 0.5, d)))[::-1]
        lead[-1] = top
        nxt = top * float(gen.uniform(0.0, 0.8))
        rest = np.concatenate([[nxt], gen.uniform(-0.5 * top, nxt, n - d - 1)])
    spectrum = np.concatenate([lead, rest])
    Q = _haar_unitary(n, gen, complex_)
    Y_star = (Q * spectrum) @ Q.conj().T
    Y_star = (Y_star + Y_star.conj().T) / 2
    budget = min(lead[-1] - nxt, lead[-1]) / 4
    E = _random_noise(n, gen, complex_) * budget * float(gen.uniform(0.05, 0.98))
    return Y_star + E, Y_star, {"kind": "synthetic", "n": n}


def _sync_pair(gen, d: int, sigma: float | None):
    """Pair (data, noiseless masked signal) from a synchronization instance.

    With ``sigma=None`` the noise level is chosen as a random fraction of the
    largest value the bound's precondition allows for the drawn mask/noise.
    """
    seed = int(gen.integers(0, 2**63))
    p = float(gen.uniform(0.5, 1.0))
    if d == 1:
        n = int(gen.integers(20, 201))
        inst = assemble_phase_instance(n, p, 0.0, RngStream(seed))
        noise = inst.A * inst.noise
    else:
        n = int(gen.integers(max(10, 20 // d + 1), 200 // d + 1))
        inst = assemble_orthogonal_instance(n, d, p, 0.0, RngStream(seed))
        noise = block_mask(inst.A, d) * inst.noise
    Y_star = inst.data
    if sigma is None:
        star = top_eigenspace(Y_star, d + 1, tol=1e-12, method="dense")
        mu_d, mu_next = star.values[d - 1], star.values[d]
        budget = max(min(mu_d - mu_next, mu_d), 0.0) / 4
        level = budget / operator_norm_estimate(noise, tol=1e-12, rng=gen)
        sigma = level * float(gen.uniform(0.05, 0.98))
    return Y_star + sigma * noise, Y_star, {"kind": "sync", "n": Y_star.shape[0],
                                           "p": p, "sigma": float(sigma), "seed": seed}


def lemma_audit_pair(mode: str, index: int, seed: int, generator: str = "mixed",
                     d: int = 2, sigma: float | None = None):
    """The ``index``-th (Y, Y*, info) pair of an audit run."""
    gen = RngStream(seed, index).generator()
    kind = generator
    if generator == "mixed":
        kind = "random_hermitian" if index % 2 == 0 else "sync_instances"
    dd = 1 if mode == "phase" else d
    if kind == "random_hermitian":
        return _synthetic_pair(gen, dd, complex_=(mode == "phase"))
    if kind == "sync_instances":
        return _sync_pair(gen, dd, sigma)
    raise ValueError(f"unknown generator {generator!r}")


@dataclass
class AuditResult:
    mode: str
    certificates: list
    infos: list
    errors: int = 0

    @property
    def checked(self) -> int:
        return sum(c.precondition_met for c in self.certificates)

    @property
    def passes(self) -> int:
        return sum(bool(c.passed) for c in self.certificates if c.precondition_met)

    @property
    def failures(self) -> int:
        return self.checked - self.passes

    @property
    def skipped(self) -> int:
        return len(self.certificates) - self.checked

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def tally(self) -> dict:
        return {"mode": self.mode, "pairs": len(self.certificates), "checked": self.checked,
                "passed": self.passes, "failed": self.failures, "skipped": self.skipped,
                "errors": self.errors}


def run_lemma_audit(mode: str, count: int, seed: int, generator: str = "mixed",
                    d: int = 2, sigma: float | None = None) -> AuditResult:
    """Audit ``count`` generated pairs with the vector (phase) or subspace
    (orthogonal) perturbation bound.  Pairs violating the precondition are
    counted as skipped."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if mode not in ("phase", "orthogonal"):
        raise ValueError(f"unknown mode {mode!r}")
    certs: list[PerturbationCertificate] = []
    infos = []
    errors = 0
    for i in range(count):
        Y, Y_star, info = lemma_audit_pair(mode, i, seed, generator, d, sigma)
        try:
            if mode == "phase":
                cert = audit_vector_perturbation(Y, Y_star, rng=_solver_rng(seed, i))
            else:
                cert = audit_subspace_perturbation(Y, Y_star, d, rng=_solver_rng(seed, i))
        except NonConvergence:
            errors += 1
            continue
        cert.meta.update(info, index=i)
        certs.append(cert)
        infos.append(info)
    if errors > MAX_FAILURE_FRACTION * count:
        raise ExperimentAborted(f"{errors}/{count} audit pairs hit solver failures")
    return AuditResult(mode, certs, infos, errors)


# ---------------------------------------------------------------- output

def _stamp() -> dict:
    return {"groupsync_version": __version__, "numpy_version": np.__version__,
            "generator_version": GENERATOR_VERSION}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def _records_csv(records) -> str:
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in sorted(records, key=lambda r: (r.n, r.p, r.sigma, r.trial_id)):
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in rec.row().items()})
    return buf.getvalue()


def emit_results(result: ExperimentResult | list, fmt: str, path) -> Path:
    """Write per-trial records as CSV (fixed columns) or JSON (records plus config,
    summary, check verdicts and version stamp).  A bare list of records is
    accepted for CSV output."""
    path = Path(path)
    records = result if isinstance(result, list) else result.records
    if fmt == "csv":
        return _write(path, _records_csv(records))
    if fmt == "json":
        if isinstance(result, list):
            doc = {"records": [{k: _clean(v) for k, v in asdict(r).items()} for r in records],
                   "summary": summarize(records)}
        else:
            doc = {
                "config": result.config.to_dict(),
                "summary": result.summary,
                "checks": result.checks,
                "records": [{k: _clean(v) for k, v in asdict(r).items()} for r in records],
            }
        doc["stamp"] = _stamp()
        return _write(path, json.dumps(doc, indent=1, default=_json_default))
    raise ValueError(f"unknown format {fmt!r}")


def emit_sweep(sweep: SweepResult, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "csv":
        return _write(path, _records_csv([r for res in sweep.results for r in res.records]))
    doc = {
        "base": sweep.base.to_dict(),
        "axis": sweep.axis,
        "values": sweep.values,
        "table": sweep.table(),
        "trend": sweep.trend,
        "summaries": [res.summary for res in sweep.results],
        "checks": [res.checks for res in sweep.results],
        "stamp": _stamp(),
    }
    return _write(path, json.dumps(doc, indent=1, default=_json_default))


AUDIT_COLUMNS = ("index", "mode", "kind", "dim", "perturbation_norm", "lhs", "lhs_lower",
                 "rhs", "numerical_floor", "precondition_met", "passed")


def emit_audit(audit: AuditResult, fmt: str, path, seed: int | None = None) -> Path:
    path = Path(path)
    if fmt == "csv":
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=AUDIT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for i, c in enumerate(audit.certificates):
            writer.writerow({
                "index": c.meta.get("index", i), "mode": c.mode, "kind": c.meta.get("kind"), "dim": c.meta.get("n"),
                "perturbation_norm": repr(c.perturbation_norm), "lhs": repr(c.lhs),
                "lhs_lower": "" if c.lhs_lower is None else repr(c.lhs_lower),
                "rhs": repr(c.rhs), "numerical_floor": repr(c.numerical_floor),
                "precondition_met": c.precondition_met,
                "passed": "" if c.passed is None else c.passed,
            })
        return _write(path, buf.getvalue())
    doc = {"seed": seed, "tally": audit.tally(),
           "certificates": [c.to_dict() for c in audit.certificates], "stamp": _stamp()}
    return _write(path, json.dumps(doc, indent=1, default=_json_default))


def load_results(path) -> tuple[dict, list[TrialRecord]]:
    """Read a JSON results file back into (document, records)."""
    doc = json.loads(Path(path).read_text())
    names = {f.name for f in fields(TrialRecord)}
    records = []
    for raw in doc["records"]:
        vals = {k: (math.nan if v is None and k not in ("ratio", "exact_recovery", "error",
                                                        "certificate", "norms") else v)
                for k, v in raw.items() if k in names}
        records.append(TrialRecord(**vals))
    return doc, records
