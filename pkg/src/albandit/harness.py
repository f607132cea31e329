"""Seeded multi-trial experiments, aggregation and trace files."""
from __future__ import annotations

import configparser
import csv
import io
import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .corpus import ClusteredInstance, ClusteredWorld, ingest_csv, kmeans_cluster
from .envs import (
    INSTANCE_STREAM,
    STANDARD_NORMAL,
    UNIFORM_SPHERE,
    ContinuumWorld,
    FiniteWorld,
    MixtureWorld,
    keyed_generator,
    make_continuum_instance,
    make_mixture_instance,
    make_nested_instance,
)
from .policies import (
    DIM_ORACLE,
    NORM_ORACLE,
    alb_dim_finite_run,
    alb_dim_run,
    alb_norm_run,
    linucb_run,
    oful_plus_run,
    oful_restricted_run,
    oracle_run,
    ucb1_run,
)
from .trace import SNAPSHOT_KINDS, RegretTrace

KINDS = ("norm", "dim_continuum", "dim_finite", "realdata")

DEFAULT_ALGORITHMS = {
    "norm": ("alb_norm", "oful_plus", "norm_oracle"),
    "dim_continuum": ("alb_dim", "oful", "dim_oracle"),
    "dim_finite": ("alb_dim_finite", "linucb_full", "dim_oracle"),
    "realdata": ("alb_norm", "oful_plus", "ucb1"),
}

ALLOWED_ALGORITHMS = {
    "norm": ("alb_norm", "oful_plus", "norm_oracle", "ucb1"),
    "dim_continuum": ("alb_dim", "oful", "dim_oracle"),
    "dim_finite": ("alb_dim_finite", "linucb_full", "dim_oracle"),
    "realdata": ("alb_norm", "oful_plus", "norm_oracle", "ucb1"),
}

REGRET_HEADER = ("round", "algorithm", "trial", "cum_regret")
SNAPSHOT_HEADER = ("epoch", "algorithm", "trial", "kind", "value")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _meta(section: str, required_for: tuple[str, ...] = ()):
    return {"section": section, "required_for": required_for}


@dataclass
class ExperimentConfig:
    kind: str = field(default="norm", metadata=_meta("experiment"))
    horizon: int = field(default=1000, metadata=_meta("experiment"))
    trials: int = field(default=1, metadata=_meta("experiment"))
    base_seed: int = field(default=0, metadata=_meta("experiment"))
    algorithms: tuple[str, ...] | None = field(default=None, metadata=_meta("experiment"))

    d: int | None = field(default=None, metadata=_meta("instance", ("norm", "dim_continuum")))
    K: int | None = field(default=None, metadata=_meta("instance", ("norm", "dim_finite", "realdata")))
    sigma: float = field(default=0.5, metadata=_meta("instance"))
    theta_norm: float | None = field(default=None, metadata=_meta("instance", ("norm",)))
    context_law: str = field(default=STANDARD_NORMAL, metadata=_meta("instance"))
    bias_low: float = field(default=-1.0, metadata=_meta("instance"))
    bias_high: float = field(default=1.0, metadata=_meta("instance"))
    d_star: int | None = field(default=None, metadata=_meta("instance", ("dim_continuum",)))
    gamma: float | None = field(default=None, metadata=_meta("instance", ("dim_continuum", "dim_finite")))
    ladder: tuple[int, ...] | None = field(default=None, metadata=_meta("instance", ("dim_finite",)))
    m_star: int | None = field(default=None, metadata=_meta("instance", ("dim_finite",)))
    feature_tau: float = field(default=1.0, metadata=_meta("instance"))
    csv_path: str | None = field(default=None, metadata=_meta("instance", ("realdata",)))
    reward_col: int = field(default=0, metadata=_meta("instance"))
    header: bool = field(default=False, metadata=_meta("instance"))
    row_limit: int | None = field(default=None, metadata=_meta("instance"))
    col_limit: int | None = field(default=None, metadata=_meta("instance"))
    kmeans_iters: int = field(default=100, metadata=_meta("instance"))

    tau: int | None = field(default=None, metadata=_meta("algorithm"))
    T1: int = field(default=100, metadata=_meta("algorithm"))
    delta1: float = field(default=0.1, metadata=_meta("algorithm"))
    delta_s: float | None = field(default=None, metadata=_meta("algorithm"))
    b1_override: float | None = field(default=None, metadata=_meta("algorithm"))
    baseline_b: float | None = field(default=None, metadata=_meta("algorithm"))
    T0: int = field(default=100, metadata=_meta("algorithm"))
    delta: float = field(default=0.1, metadata=_meta("algorithm"))
    candidates: int = field(default=512, metadata=_meta("algorithm"))
    threshold_base: float = field(default=2.0, metadata=_meta("algorithm"))

    def __post_init__(self):
        self.validate()

    # -- derived -----------------------------------------------------------
    @property
    def algorithm_names(self) -> tuple[str, ...]:
        return self.algorithms if self.algorithms else DEFAULT_ALGORITHMS[self.kind]

    @property
    def exploration_pulls(self) -> int:
        """Norm-estimation pulls per arm pick (defaults to ``d``)."""
        return self.tau if self.tau is not None else (self.d or 1)

    @property
    def comparator_b(self) -> float:
        """Norm bound handed to the non-adaptive OFUL+."""
        if self.baseline_b is not None:
            return self.baseline_b
        return self.b1_override if self.b1_override is not None else 10.0

    def seeds(self) -> list[int]:
        return [self.base_seed + t for t in range(self.trials)]

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}, got {self.kind!r}")
        for f in fields(self):
            if self.kind in f.metadata["required_for"] and getattr(self, f.name) is None:
                raise ConfigError(f.name, f"required for kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if self.horizon < 1:
            raise ConfigError("horizon", f"must be >= 1, got {self.horizon}")
        if self.sigma < 0:
            raise ConfigError("sigma", f"must be >= 0, got {self.sigma}")
        for name in ("delta1", "delta", "delta_s"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ConfigError(name, f"must lie in (0, 1), got {v}")
        if self.context_law not in (STANDARD_NORMAL, UNIFORM_SPHERE):
            raise ConfigError("context_law", f"unknown law {self.context_law!r}")
        for name in ("T1", "T0", "kmeans_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.threshold_base <= 1:
            raise ConfigError("threshold_base", f"must exceed 1, got {self.threshold_base}")
        allowed = ALLOWED_ALGORITHMS[self.kind]
        for name in self.algorithm_names:
            if name not in allowed:
                raise ConfigError("algorithms", f"{name!r} not available for kind {self.kind!r}")
        if len(set(self.algorithm_names)) != len(self.algorithm_names):
            raise ConfigError("algorithms", "duplicate entries")
        if self.kind == "norm":
            if self.d < 1 or self.K < 1:
                raise ConfigError("d" if self.d < 1 else "K", "must be >= 1")
            if self.tau is not None and self.tau < self.d:
                raise ConfigError("tau", f"must be >= d ({self.d}), got {self.tau}")
            warm = 2 * self.exploration_pulls + self.K
            if self.horizon < warm:
                raise ConfigError("horizon", f"must cover the warm-up 2*tau + K = {warm}")
        if self.kind == "realdata" and "alb_norm" in self.algorithm_names and self.b1_override is None:
            # Fixed per-arm contexts make every paired difference of one arm vanish.
            raise ConfigError("b1_override", "required for alb_norm on realdata (contexts are fixed per arm)")
        if self.kind == "dim_finite":
            lad = self.ladder
            if any(b <= a for a, b in zip(lad, lad[1:])) or lad[0] < 1:
                raise ConfigError("ladder", f"must be strictly increasing positive dimensions, got {lad}")
            if not 1 <= self.m_star <= len(lad):
                raise ConfigError("m_star", f"must lie in [1, {len(lad)}], got {self.m_star}")
        if self.kind == "dim_continuum" and not 1 <= self.d_star <= self.d:
            raise ConfigError("d_star", f"must lie in [1, d], got {self.d_star}")

    # -- file format -------------------------------------------------------
    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for section in ("experiment", "instance", "algorithm"):
            cp.add_section(section)
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                cp.set(f.metadata["section"], f.name, _format_value(v))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("file", str(exc).splitlines()[0]) from None
        specs = {f.name: f for f in fields(cls)}
        kwargs = {}
        for section in cp.sections():
            if section not in ("experiment", "instance", "algorithm"):
                raise ConfigError(section, "unknown section")
            for key, raw in cp.items(section):
                f = specs.get(key)
                if f is None or f.metadata["section"] != section:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                kwargs[key] = _parse_value(key, raw, f.type)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_text(text)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(key: str, raw: str, annotation: str):
    base = annotation.replace(" | None", "")
    raw = raw.strip()
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        if base == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if base == "tuple[int, ...]":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if base == "tuple[str, ...]":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {base}") from None
    return raw


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RegretTrace]
    seeds: list[int]
    wall_clock: float = 0.0

    def by_algorithm(self) -> dict[str, list[RegretTrace]]:
        out: dict[str, list[RegretTrace]] = {}
        for tr in self.traces:
            out.setdefault(tr.algorithm, []).append(tr)
        return out


def _shared_instance(cfg: ExperimentConfig):
    if cfg.kind != "realdata":
        return None
    rng = keyed_generator(cfg.base_seed, INSTANCE_STREAM)
    rows = ingest_csv(cfg.csv_path, cfg.reward_col, None, cfg.row_limit, cfg.col_limit, rng, cfg.header)
    arms = kmeans_cluster(rows, cfg.K, cfg.kmeans_iters, rng)
    return ClusteredInstance(arms, cfg.sigma)


def build_world(cfg: ExperimentConfig, seed: int, shared=None):
    """Instance and world for one trial seed."""
    rng = keyed_generator(seed, INSTANCE_STREAM)
    if cfg.kind == "norm":
        inst = make_mixture_instance(cfg.d, cfg.K, cfg.theta_norm, cfg.sigma, rng, cfg.context_law,
                                     cfg.bias_low, cfg.bias_high)
        return MixtureWorld(inst, seed)
    if cfg.kind == "dim_continuum":
        return ContinuumWorld(make_continuum_instance(cfg.d, cfg.d_star, cfg.gamma, cfg.sigma, rng), seed)
    if cfg.kind == "dim_finite":
        inst = make_nested_instance(cfg.ladder, cfg.m_star, cfg.gamma, cfg.K, cfg.feature_tau, cfg.sigma, rng)
        return FiniteWorld(inst, seed)
    return ClusteredWorld(shared if shared is not None else _shared_instance(cfg), seed)


def _runner(cfg: ExperimentConfig, name: str) -> Callable:
    T = cfg.horizon
    if name == "alb_norm":
        return lambda w, trial, seed: alb_norm_run(
            w, T, cfg.exploration_pulls, cfg.T1, cfg.delta1, cfg.delta_s, seed, cfg.b1_override, trial)
    if name == "oful_plus":
        return lambda w, trial, seed: oful_plus_run(w, T, cfg.comparator_b, cfg.delta1, trial, seed)
    if name == "ucb1":
        return lambda w, trial, seed: ucb1_run(w, T, trial, seed)
    if name == "norm_oracle":
        return lambda w, trial, seed: oracle_run(w, NORM_ORACLE, T, cfg.delta1, trial, seed, name=name)
    if name == "dim_oracle":
        return lambda w, trial, seed: oracle_run(w, DIM_ORACLE, T, cfg.delta, trial, seed,
                                                 cfg.candidates, name=name)
    if name == "alb_dim":
        return lambda w, trial, seed: alb_dim_run(w, T, cfg.T0, cfg.delta, seed, cfg.threshold_base,
                                                  cfg.candidates, trial)
    if name == "oful":
        return lambda w, trial, seed: oful_restricted_run(w, T, cfg.delta, None, seed, cfg.candidates, trial)
    if name == "alb_dim_finite":
        return lambda w, trial, seed: alb_dim_finite_run(w, T, cfg.T0, cfg.delta, seed,
                                                         cfg.threshold_base, trial)
    if name == "linucb_full":
        return lambda w, trial, seed: linucb_run(w, T, cfg.delta, None, trial, seed)
    raise ConfigError("algorithms", f"unknown algorithm {name!r}")


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Run every configured algorithm on every trial.

    Trial ``t`` uses seed ``base_seed + t`` for its instance, contexts and
    noise; all algorithms of a trial share that world, so draws at the same
    (round, arm) coincide.  Output order is (algorithm order, trial) and
    does not depend on ``threads``.
    """
    start = time.perf_counter()
    shared = _shared_instance(cfg)
    runners = [(name, _runner(cfg, name)) for name in cfg.algorithm_names]
    seeds = cfg.seeds()

    def one_trial(trial: int) -> list[RegretTrace]:
        seed = seeds[trial]
        world = build_world(cfg, seed, shared)
        out = []
        for name, run in runners:
            tr = run(world, trial, seed)
            tr.algorithm = name
            out.append(tr)
        return out

    workers = max(1, threads or os.cpu_count() or 1)
    if workers == 1:
        per_trial = [one_trial(t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(one_trial, range(cfg.trials)))
    order = {name: i for i, name in enumerate(cfg.algorithm_names)}
    traces = sorted((tr for batch in per_trial for tr in batch), key=lambda tr: (order[tr.algorithm], tr.trial))
    return ExperimentResult(cfg, traces, seeds, time.perf_counter() - start)


def aggregate(traces: Sequence[RegretTrace]) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean and sample standard deviation (zero for one trace)."""
    if not traces:
        raise ValueError("no traces to aggregate")
    lengths = {tr.cum_regret.shape[0] for tr in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces differ in length: {sorted(lengths)}")
    M = np.vstack([tr.cum_regret for tr in traces])
    mean = M.mean(axis=0)
    std = M.std(axis=0, ddof=1) if M.shape[0] > 1 else np.zeros(M.shape[1])
    return mean, std


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

def format_snapshot(kind: str, value) -> str:
    if kind == "support":
        return "|".join(str(int(i)) for i in value)
    if kind == "ladder":
        return str(int(value))
    return repr(float(value))


def parse_snapshot(kind: str, text: str):
    if kind == "support":
        return tuple(int(x) for x in text.split("|")) if text else ()
    if kind == "ladder":
        return int(text)
    if kind == "b":
        return float(text)
    raise ValueError(f"unknown snapshot kind {kind!r}")


def write_traces(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Write ``regret.csv``, ``snapshots.csv`` and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    paths = {"regret": out / "regret.csv", "snapshots": out / "snapshots.csv",
             "manifest": out / "manifest.json"}
    try:
        out.mkdir(parents=True, exist_ok=True)
        with paths["regret"].open("w", newline="") as fh:
            fh.write(",".join(REGRET_HEADER) + "\n")
            for tr in result.traces:
                prefix = f"{tr.algorithm},{tr.trial},"
                fh.writelines(f"{r},{prefix}{v:.10g}\n" for r, v in enumerate(tr.cum_regret.tolist(), 1))
        with paths["snapshots"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SNAPSHOT_HEADER)
            for tr in result.traces:
                for epoch, kind, value in tr.snapshots:
                    w.writerow([epoch, tr.algorithm, tr.trial, kind, format_snapshot(kind, value)])
        manifest = {
            "artifact": "albandit",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config": result.config.as_dict(),
            "config_text": result.config.to_text(),
            "base_seed": result.config.base_seed,
            "seeds": result.seeds,
            "algorithms": list(result.config.algorithm_names),
            "wall_clock_seconds": round(result.wall_clock, 3),
        }
        paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write traces to {out}: {exc.strerror}", exc.filename) from None
    return paths


def read_regret_csv(path) -> dict[tuple[str, int], np.ndarray]:
    """Cumulative regret columns keyed by ``(algorithm, trial)``."""
    series: dict[tuple[str, int], list[float]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != REGRET_HEADER:
            raise ValueError(f"{path}: expected header {','.join(REGRET_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, 2):
            if len(row) != 4:
                raise ValueError(f"{path}: line {lineno} has {len(row)} fields, expected 4")
            try:
                rnd, alg, trial, v = int(row[0]), row[1], int(row[2]), float(row[3])
            except ValueError:
                raise ValueError(f"{path}: line {lineno} is not numeric where expected") from None
            vals = series.setdefault((alg, trial), [])
            if rnd != len(vals) + 1:
                raise ValueError(f"{path}: line {lineno} round {rnd} out of sequence for {alg}/{trial}")
            vals.append(v)
    return {k: np.array(v) for k, v in series.items()}


def read_snapshot_csv(path) -> list[tuple[int, str, int, str, object]]:
    """Rows ``(epoch, algorithm, trial, kind, value)`` with parsed values."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SNAPSHOT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SNAPSHOT_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, 2):
            if len(row) != 5 or row[3] not in SNAPSHOT_KINDS:
                raise ValueError(f"{path}: malformed snapshot row at line {lineno}")
            rows.append((int(row[0]), row[1], int(row[2]), row[3], parse_snapshot(row[3], row[4])))
    return rows


def read_traces(out_dir) -> list[RegretTrace]:
    """Rebuild traces from a directory written by ``write_traces``."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    seeds = manifest["seeds"]
    regret = read_regret_csv(out / "regret.csv")
    snaps: dict[tuple[str, int], list] = {}
    for epoch, alg, trial, kind, value in read_snapshot_csv(out / "snapshots.csv"):
        snaps.setdefault((alg, trial), []).append((epoch, kind, value))
    return [RegretTrace(alg, cum, snaps.get((alg, trial), []), trial, seeds[trial])
            for (alg, trial), cum in regret.items()]
