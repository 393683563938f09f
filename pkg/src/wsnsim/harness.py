"""Monte-Carlo experiment driver.

Every trial is seeded only by ``(master_seed, trial_index)``: the deployment,
slot degrees, payload patterns and forwarding choices come from child streams
of a :class:`numpy.random.SeedSequence`, so trials can run in any order or in
worker processes and produce identical tables.

Within one trial index the same deployment is queried once per decoding ratio
(common random numbers across the eta grid); different trial indices are
independent.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .coding import DistKind, build_distribution, check_ledger, payload_for
from .decoder import build_system, select_query, solve
from .dsa1 import NEXT_HOP_RULES, RELAY_MODES, DisseminationReport, run_dsa1
from .dsa2 import run_dsa2
from .errors import ConfigError, ScalingError
from .netgraph import NetworkConfig, NetworkGraph, generate_network, isolated_nodes, mean_degree

ALGORITHMS = ("dsa1", "dsa2")
DEFAULT_ETA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
CSV_COLUMNS = ("algorithm", "n", "L", "lambda", "eta", "h", "trials", "successes", "P_s",
               "mean_tx", "mean_hops", "mean_slot_occupancy", "seed")

# streams under each trial's spawn key
_GRAPH, _SIM, _QUERY, _PAYLOAD = 0, 1, 2, 3


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit seed for the child stream ``key`` of ``master_seed``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def round_half_up(x: float) -> int:
    # tolerance absorbs products such as 0.3 * 50 = 15.000000000000002
    return int(math.floor(x + 0.5 + 1e-9))


def query_size(eta: float, n: int) -> int:
    return min(n, max(1, round_half_up(eta * n)))


def default_slots(n: int, ratio: float = 0.1) -> int:
    return max(2, round_half_up(ratio * n))


@dataclass
class ExperimentConfig:
    algorithm: str = "dsa1"
    n: int = 50
    side: float = 2.0
    radius: float = 0.7
    dist: str = "ideal"
    dist_k: Optional[int] = None
    c0: float = 0.1
    delta: float = 0.5
    m: Optional[int] = None
    m_ratio: float = 0.1
    c_scale: float = 1.0
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    trials: int = 500
    sample_frac: float = 1.0
    master_seed: int = 0
    strict_discard: bool = False
    next_hop: str = "memory"
    relay: str = "unicast"
    reuse_graph: bool = False
    check_ledger: bool = True
    max_graph_attempts: int = 1000
    workers: int = 1

    def __post_init__(self):
        self.eta_grid = tuple(float(e) for e in self.eta_grid)
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        NetworkConfig(self.n, self.side, self.radius, 0)
        DistKind(self.dist)
        if not self.eta_grid:
            raise ConfigError("eta grid is empty")
        for e in self.eta_grid:
            if not 0.0 < e <= 1.0:
                raise ConfigError(f"decoding ratio must lie in (0, 1], got {e!r}")
        if self.trials < 1:
            raise ConfigError(f"trials per point must be >= 1, got {self.trials}")
        if not 0.0 < self.sample_frac <= 1.0:
            raise ConfigError(f"sample fraction must lie in (0, 1], got {self.sample_frac!r}")
        if self.m is not None and self.m < 1:
            raise ConfigError(f"slot count must be >= 1, got {self.m}")
        if self.m is None and not self.m_ratio > 0:
            raise ConfigError(f"slot ratio must be > 0, got {self.m_ratio!r}")
        if not self.c_scale > 0:
            raise ConfigError(f"C must be > 0, got {self.c_scale!r}")
        if self.next_hop not in NEXT_HOP_RULES:
            raise ConfigError(f"next-hop rule must be one of {NEXT_HOP_RULES}")
        if self.relay not in RELAY_MODES:
            raise ConfigError(f"relay mode must be one of {RELAY_MODES}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.master_seed!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.distribution()

    @property
    def slots(self) -> int:
        return self.m if self.m is not None else default_slots(self.n, self.m_ratio)

    @property
    def density(self) -> float:
        return self.n / (self.side * self.side)

    def distribution(self):
        k = self.dist_k if self.dist_k is not None else self.n
        return build_distribution(self.dist, k, self.c0, self.delta)

    def trials_for(self, eta: float) -> int:
        """Sample count ``min(ceil(r * C(n, h)), T_cap)``."""
        h = query_size(eta, self.n)
        return max(1, min(math.ceil(self.sample_frac * math.comb(self.n, h)), self.trials))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eta_grid"] = list(self.eta_grid)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    config: Optional[dict] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": self.rows}, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentResult":
        doc = json.loads(text)
        return cls(doc["rows"], doc.get("config"))

    def row(self, algorithm: str, eta: float, n: Optional[int] = None) -> dict:
        for r in self.rows:
            if r["algorithm"] == algorithm and abs(r["eta"] - eta) < 1e-9 and (n is None or r["n"] == n):
                return r
        raise KeyError((algorithm, eta, n))


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def sample_network(n: int, side: float, radius: float, master_seed: int, key: Sequence[int],
                   max_attempts: int = 1000) -> NetworkGraph:
    """Draw deployments until one has no isolated node."""
    for attempt in range(max_attempts):
        seed = derive_seed(master_seed, *key, attempt)
        g = generate_network(NetworkConfig(n, side, radius, seed))
        if not isolated_nodes(g):
            return g
    raise ConfigError(
        f"no deployment without isolated nodes after {max_attempts} attempts "
        f"(n={n}, L={side}, r={radius})")


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    tx: int
    mean_depth: float
    mean_occupancy: float
    successes: tuple[bool, ...]


def disseminate(config: ExperimentConfig, graph: NetworkGraph, trial: int) -> tuple[DisseminationReport, list[int]]:
    """One dissemination on ``graph`` under the trial's seeds; checks the XOR ledger."""
    n = graph.n
    payload_seed = derive_seed(config.master_seed, trial, _PAYLOAD)
    payloads = [payload_for(payload_seed, i) for i in range(n)]
    rng = random.Random(derive_seed(config.master_seed, trial, _SIM))
    engine = dict(strict_discard=config.strict_discard, next_hop=config.next_hop, relay=config.relay)
    dist = config.distribution()
    if config.algorithm == "dsa1":
        report = run_dsa1(graph, payloads, config.slots, dist, rng, **engine)
    else:
        report = run_dsa2(graph, payloads, config.slots, dist, config.c_scale, rng, **engine)
    if config.check_ledger:
        check_ledger(report.stores, payloads)
    return report, payloads


def run_trial(config: ExperimentConfig, trial: int, etas: Optional[Sequence[float]] = None) -> TrialOutcome:
    etas = config.eta_grid if etas is None else etas
    graph_key = (0, _GRAPH) if config.reuse_graph else (trial, _GRAPH)
    graph = sample_network(config.n, config.side, config.radius, config.master_seed, graph_key,
                           config.max_graph_attempts)
    report, payloads = disseminate(config, graph, trial)
    successes = []
    for i, eta in enumerate(etas):
        rng = random.Random(derive_seed(config.master_seed, trial, _QUERY, i))
        query = select_query(config.n, query_size(eta, config.n), rng)
        res = solve(build_system(report.stores, query, config.n))
        if res.success and config.check_ledger:
            assert all(res.values[i] == payloads[i] for i in range(config.n))
        successes.append(res.success)
    return TrialOutcome(trial, report.tx_count, report.mean_depth(), report.mean_occupancy(), tuple(successes))


def _run_trial_star(args):
    return run_trial(*args)


def run_trials(config: ExperimentConfig, count: int) -> list[TrialOutcome]:
    jobs = [(config, t) for t in range(count)]
    if config.workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            out = list(pool.map(_run_trial_star, jobs, chunksize=max(1, count // (4 * config.workers))))
    else:
        out = [run_trial(*job) for job in jobs]
    return sorted(out, key=lambda o: o.index)


def run_sweep(config: ExperimentConfig) -> ExperimentResult:
    """Estimate the success probability at every decoding ratio of the grid."""
    counts = [config.trials_for(e) for e in config.eta_grid]
    outcomes = run_trials(config, max(counts))
    rows = []
    for i, (eta, T) in enumerate(zip(config.eta_grid, counts)):
        used = outcomes[:T]
        succ = sum(o.successes[i] for o in used)
        rows.append({
            "algorithm": config.algorithm,
            "n": config.n,
            "L": config.side,
            "lambda": config.density,
            "eta": eta,
            "h": query_size(eta, config.n),
            "trials": T,
            "successes": succ,
            "P_s": succ / T,
            "mean_tx": sum(o.tx for o in used) / T,
            "mean_hops": sum(o.mean_depth for o in used) / T,
            "mean_slot_occupancy": sum(o.mean_occupancy for o in used) / T,
            "seed": config.master_seed,
        })
    return ExperimentResult(rows, config.to_dict())


def merge_results(results: Iterable[ExperimentResult]) -> ExperimentResult:
    rows: list[dict] = []
    configs = []
    for r in results:
        rows.extend(r.rows)
        configs.append(r.config)
    return ExperimentResult(rows, {"runs": configs})


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


# ---------------------------------------------------------------------------
# buffer occupancy


def buffer_stats(result: ExperimentResult) -> list[dict]:
    """Mean distinct stored IDs per node for each (algorithm, n, lambda)."""
    best: dict[tuple, dict] = {}
    for row in result.rows:
        key = (row["algorithm"], row["n"], row["lambda"])
        if key not in best or row["trials"] > best[key]["trials"]:
            best[key] = row
    table = []
    for (alg, n, lam), row in sorted(best.items()):
        occ = row["mean_slot_occupancy"]
        table.append({"algorithm": alg, "n": n, "lambda": lam, "trials": row["trials"],
                      "mean_occupancy": occ, "occupancy_ratio": occ / n if n else 0.0})
    return table


# ---------------------------------------------------------------------------
# scaling


@dataclass
class ScalingConfig:
    algorithm: str = "dsa1"
    n_values: tuple[int, ...] = (50, 100, 200, 400)
    density: float = 12.5
    radius: float = 0.7
    runs: int = 3
    master_seed: int = 0
    c_scale: float = 1.0
    m: Optional[int] = None
    m_ratio: float = 0.1
    dist: str = "ideal"
    dist_k: Optional[int] = None
    next_hop: str = "memory"
    relay: str = "unicast"
    strict_discard: bool = False
    check_ledger: bool = True

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.density > 0:
            raise ConfigError("density must be > 0")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    def experiment(self, n: int) -> ExperimentConfig:
        return ExperimentConfig(
            algorithm=self.algorithm, n=n, side=math.sqrt(n / self.density), radius=self.radius,
            dist=self.dist, dist_k=self.dist_k, m=self.m, m_ratio=self.m_ratio, c_scale=self.c_scale,
            master_seed=derive_seed(self.master_seed, n), strict_discard=self.strict_discard,
            next_hop=self.next_hop, relay=self.relay, check_ledger=self.check_ledger)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown scaling config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    side: float
    lambda_hat: float
    mu: float
    total_tx: float
    tx_per_origin: float
    depth: float
    runs: int


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float


@dataclass
class ScalingReport:
    algorithm: str
    points: list[ScalingPoint]
    total_tx_vs_n: Fit
    tx_per_origin_vs_n: Fit
    depth_vs_n_over_mu: Fit
    tx_per_origin_vs_mu_excess: Optional[Fit]
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return asdict(self)


def fit_line(x: Sequence[float], y: Sequence[float], log: bool = False) -> Fit:
    """Least-squares line (in log-log space if ``log``) with its R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if log:
        x, y = np.log(x), np.log(y)
    if len(x) < 2 or np.ptp(x) == 0:
        raise ScalingError("regression needs at least two distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return Fit(float(slope), float(intercept), r2)


def scaling_point(cfg: ScalingConfig, n: int) -> ScalingPoint:
    exp = cfg.experiment(n)
    tot, per, dep, mus = [], [], [], []
    for run in range(cfg.runs):
        g = sample_network(n, exp.side, exp.radius, exp.master_seed, (run, _GRAPH), exp.max_graph_attempts)
        report, _ = disseminate(exp, g, run)
        tot.append(report.tx_count)
        per.append(report.mean_tx_per_origin())
        dep.append(report.mean_depth())
        mus.append(mean_degree(g))
    return ScalingPoint(n, exp.side, exp.density, float(np.mean(mus)), float(np.mean(tot)),
                        float(np.mean(per)), float(np.mean(dep)), cfg.runs)


def verify_scaling(cfg: ScalingConfig, points: Optional[list[ScalingPoint]] = None) -> ScalingReport:
    """Regress transmission counts and hop depths against network size."""
    if len(set(cfg.n_values)) < 4:
        raise ScalingError(f"need at least 4 distinct network sizes, got {sorted(set(cfg.n_values))}")
    if points is None:
        points = [scaling_point(cfg, n) for n in cfg.n_values]
    ns = [p.n for p in points]
    total = fit_line(ns, [p.total_tx for p in points], log=True)
    per = fit_line(ns, [p.tx_per_origin for p in points], log=True)
    depth = fit_line([p.n / p.mu for p in points], [p.depth for p in points])
    excess = [p.mu * (p.mu - p.lambda_hat) for p in points]
    try:
        vs_excess = fit_line(excess, [p.tx_per_origin for p in points], log=True) if min(excess) > 0 else None
    except ScalingError:
        vs_excess = None
    report = ScalingReport(cfg.algorithm, points, total, per, depth, vs_excess)
    if cfg.algorithm == "dsa1":
        report.checks = {
            "total_tx_slope_2": abs(total.slope - 2.0) <= 0.3 and total.r2 >= 0.9,
            "depth_grows_with_n_over_mu": depth.slope > 0 and depth.r2 >= 0.8,
        }
    else:
        report.checks = {"tx_per_origin_n_free": abs(per.slope) <= 0.3}
    return report


# ---------------------------------------------------------------------------
# output


def emit(result: ExperimentResult, path, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "csv":
        text = result.to_csv()
    elif fmt == "json":
        text = result.to_json()
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path
