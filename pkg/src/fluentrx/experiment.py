"""Closed-loop trials, outcome classification and Monte Carlo aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import hmm as hmm_mod
from .bandit import LinUcbPolicy, RandomPolicy, build_context
from .hmm import GaussianHmm
from .patient import PatientState, advance_days, fluency_from, measure_fluency, true_fluency
from .pharmacology import MedicationCatalog, administer, load_default_catalog, read_catalog

POLICIES = ("linucb", "random", "none")
SUCCESS, FAILURE, NEUTRAL = "success", "failure", "neutral"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n_runs: int = 500
    horizon_days: int = 365
    decision_interval_days: int = 7
    noise_std: float = 0.025
    alpha: float = 10.0
    sigma_fluency: float = 0.1
    success_threshold_sigmas: float = 0.5
    master_seed: int = 0
    catalog_path: str | None = None
    policy: str = "linucb"
    reward_mode: str = "measured"
    baseline_range: tuple[float, float] = (0.3, 0.9)
    dosage: float = 1.0
    #: per-condition chains; None means the default persistence chain
    hmms: list[dict] | None = None

    def __post_init__(self):
        self.baseline_range = tuple(self.baseline_range)
        problems = []
        if self.n_runs < 1:
            problems.append("n_runs must be >= 1")
        if self.horizon_days < 0:
            problems.append("horizon_days must be >= 0")
        if self.decision_interval_days < 1:
            problems.append("decision_interval_days must be >= 1")
        if self.noise_std < 0:
            problems.append("noise_std must be >= 0")
        if self.alpha < 0:
            problems.append("alpha must be >= 0")
        if not self.sigma_fluency > 0:
            problems.append("sigma_fluency must be > 0")
        if not self.success_threshold_sigmas > 0:
            problems.append("success_threshold_sigmas must be > 0")
        if not 0 <= self.master_seed < 2**64:
            problems.append("master_seed must be an unsigned 64-bit integer")
        if self.policy not in POLICIES:
            problems.append(f"policy must be one of {POLICIES}")
        if self.reward_mode not in ("measured", "true"):
            problems.append("reward_mode must be 'measured' or 'true'")
        lo, hi = self.baseline_range
        if not 0.0 <= lo <= hi <= 1.0:
            problems.append("baseline_range must satisfy 0 <= low <= high <= 1")
        if self.hmms is not None and len(self.hmms) != 3:
            problems.append("hmms must list three chains (depression, anxiety, insomnia)")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def read(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline_range"] = list(self.baseline_range)
        return d

    def chains(self) -> tuple[GaussianHmm, GaussianHmm, GaussianHmm]:
        if self.hmms is None:
            h = GaussianHmm.default()
            return (h, h, h)
        return tuple(GaussianHmm.from_dict(h) for h in self.hmms)

    def load_catalog(self) -> MedicationCatalog:
        if self.catalog_path is None:
            return load_default_catalog()
        return read_catalog(self.catalog_path)


@dataclass
class TrialTrace:
    run_index: int
    days: np.ndarray
    severities: np.ndarray  # (n_days + 1, 3)
    true_fluency: np.ndarray
    measured_fluency: np.ndarray
    medication: list[str | None]
    reward: np.ndarray  # NaN on non-decision days

    def __len__(self):
        return len(self.days)

    @property
    def initial_measured(self) -> float:
        return float(self.measured_fluency[0])

    @property
    def terminal_measured(self) -> float:
        return float(self.measured_fluency[-1])

    @property
    def n_administered(self) -> int:
        return sum(m is not None for m in self.medication)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "depression", "anxiety", "insomnia", "true_fluency",
                    "measured_fluency", "medication", "reward"])
        for t in range(len(self.days)):
            r = self.reward[t]
            w.writerow([int(self.days[t]), *map(int, self.severities[t]),
                        repr(float(self.true_fluency[t])), repr(float(self.measured_fluency[t])),
                        self.medication[t] or "", "" if math.isnan(r) else repr(float(r))])
        return buf.getvalue()


@dataclass
class RunSummary:
    success_rate: float
    failure_rate: float
    neutral_rate: float
    mean_terminal_fluency: float
    std_terminal_fluency: float
    classifications: list[str] = field(default_factory=list)

    @property
    def n_success(self) -> int:
        return self.classifications.count(SUCCESS)

    def to_dict(self) -> dict:
        return asdict(self)


def trial_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(master_seed, run_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, run_index])))


def _make_policy(config: ExperimentConfig, catalog: MedicationCatalog):
    if config.policy == "linucb":
        return LinUcbPolicy(catalog.names, alpha=config.alpha)
    if config.policy == "random":
        return RandomPolicy(catalog.names)
    return None


def run_trial(config: ExperimentConfig, catalog: MedicationCatalog, run_index: int,
              hmms=None, simulate_span=None) -> TrialTrace:
    """One patient, ``horizon_days`` days, a decision every ``decision_interval_days``.

    On a decision day the policy is credited with the change in fluency since
    the previous decision, then picks the next medication from a fresh context.
    """
    rng = trial_rng(config.master_seed, run_index)
    hmms = tuple(hmms) if hmms is not None else config.chains()
    n = config.horizon_days
    severities = [hmm_mod.sample_initial(h, rng) for h in hmms]
    baseline = float(rng.uniform(*config.baseline_range))
    patient = PatientState(*severities, baseline=baseline)

    sev = np.empty((n + 1, 3), dtype=np.int64)
    sev[0] = severities
    measured = np.empty(n + 1)
    measured[0] = measure_fluency(patient, config.noise_std, rng)
    medication: list[str | None] = [None] * (n + 1)
    reward = np.full(n + 1, np.nan)

    policy = _make_policy(config, catalog)
    decision_days = range(0, n, config.decision_interval_days) if policy is not None else ()
    use_true = config.reward_mode == "true"
    pending = None  # (arm, context) awaiting its reward
    prev_signal = 0.0

    day = 0
    for d in list(decision_days) + [n]:
        if d > day:
            patient, block = advance_days(patient, hmms, d - day, rng, simulate_span)
            sev[day + 1: d + 1] = block
            tf = fluency_from(block[:, 0], block[:, 1], block[:, 2], baseline)
            noise = rng.standard_normal(d - day)
            measured[day + 1: d + 1] = np.clip(tf + config.noise_std * noise, 0.0, 1.0)
            day = d
        if d == n:
            break
        signal = true_fluency(patient) if use_true else float(measured[d])
        if pending is not None:
            r = signal - prev_signal
            policy.update(pending[0], pending[1], r)
            reward[d] = r
        emissions = [hmm_mod.emit(h, s, rng) for h, s in zip(hmms, patient.severities)]
        x = build_context(emissions, measured[d])
        arm = policy.select(x, rng)
        patient = patient.with_dose(administer(catalog[arm], d, config.dosage))
        medication[d] = catalog[arm].name
        pending = (arm, x)
        prev_signal = signal

    tf_all = fluency_from(sev[:, 0], sev[:, 1], sev[:, 2], baseline)
    return TrialTrace(
        run_index=run_index,
        days=np.arange(n + 1),
        severities=sev,
        true_fluency=np.asarray(tf_all, dtype=float),
        measured_fluency=measured,
        medication=medication,
        reward=reward,
    )


def classify(trace: TrialTrace, sigma: float, threshold_sigmas: float) -> str:
    delta = trace.terminal_measured - trace.initial_measured
    cut = threshold_sigmas * sigma
    if delta > cut:
        return SUCCESS
    if delta < -cut:
        return FAILURE
    return NEUTRAL


def summarize(traces, config: ExperimentConfig) -> RunSummary:
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    labels = [classify(t, config.sigma_fluency, config.success_threshold_sigmas) for t in traces]
    n = len(labels)
    n_s, n_f = labels.count(SUCCESS), labels.count(FAILURE)
    terminal = np.array([t.terminal_measured for t in traces])
    success, failure = n_s / n, n_f / n
    return RunSummary(
        success_rate=success,
        failure_rate=failure,
        # complement form makes the three rates sum to exactly 1.0
        neutral_rate=1.0 - (success + failure),
        mean_terminal_fluency=float(terminal.mean()),
        std_terminal_fluency=float(terminal.std()),
        classifications=labels,
    )


def _run_chunk(args):
    config, catalog, indices = args
    return [run_trial(config, catalog, i) for i in indices]


def run_trials(config: ExperimentConfig, catalog: MedicationCatalog, workers: int = 1):
    """All trials in run-index order; ``workers > 1`` uses a process pool."""
    indices = list(range(config.n_runs))
    if workers <= 1:
        return [run_trial(config, catalog, i) for i in indices]
    chunks = [indices[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = pool.map(_run_chunk, [(config, catalog, c) for c in chunks])
        traces = [t for chunk in results for t in chunk]
    return sorted(traces, key=lambda t: t.run_index)


def runs_csv(traces, summary: RunSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_index", "initial_measured", "terminal_measured", "initial_true",
                "terminal_true", "classification", "n_administered"])
    for t, label in zip(traces, summary.classifications):
        w.writerow([t.run_index, repr(t.initial_measured), repr(t.terminal_measured),
                    repr(float(t.true_fluency[0])), repr(float(t.true_fluency[-1])),
                    label, t.n_administered])
    return buf.getvalue()


def summary_json(summary: RunSummary, config: ExperimentConfig, catalog: MedicationCatalog) -> str:
    payload = summary.to_dict()
    payload["config"] = config.to_dict()
    payload["catalog_sha256"] = catalog.sha256()
    payload["n_medications"] = len(catalog)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def run_experiment(config: ExperimentConfig, catalog: MedicationCatalog | None = None,
                   out_dir=None, write_traces: bool = False, workers: int = 1):
    """Run every trial, optionally writing ``summary.json``, ``runs.csv`` and traces."""
    catalog = catalog if catalog is not None else config.load_catalog()
    traces = run_trials(config, catalog, workers)
    summary = summarize(traces, config)
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.json").write_text(summary_json(summary, config, catalog), encoding="utf-8")
            (out / "runs.csv").write_text(runs_csv(traces, summary), encoding="utf-8")
            if write_traces:
                tdir = out / "traces"
                tdir.mkdir(exist_ok=True)
                for t in traces:
                    (tdir / f"run_{t.run_index:05d}.csv").write_text(t.to_csv(), encoding="utf-8")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write results: {exc.strerror}", exc.filename) from None
    return summary, traces
