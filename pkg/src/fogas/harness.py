"""Experiment harness: configs, behavior policies, seed sweeps, CSV records."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import build_covariance, collect_dataset
from .diagnostics import iterate_policy_tables
from .linmdp import LinearMdp, TabularPolicy, generate_linear_mdp, load_mdp, uniform_policy
from .oracle import coverage_ratio, evaluate_policy, solve_optimal
from .solver import FogasConfig, FogasRun, run_fogas, theoretical_min_iterations

RESULTS_HEADER = "mdp_id,n,seed,T,coverage_ratio,suboptimality,mean_suboptimality,wall_time_ms,status"


def behavior_policy(mdp: LinearMdp, spec: str) -> TabularPolicy:
    """Parse a behavior spec: "uniform" or "eps:<v>" (epsilon-uniform mix of
    the oracle-optimal policy; eps:0 is exactly the optimal policy)."""
    if spec == "uniform":
        return uniform_policy(mdp.num_states, mdp.num_actions)
    if spec.startswith("eps:"):
        eps = float(spec[4:])
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
        pi_star, _ = solve_optimal(mdp)
        mix = (1.0 - eps) * pi_star.probs + eps / mdp.num_actions
        return TabularPolicy(mix)
    raise ValueError(f"unknown behavior spec {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a grid of sample sizes crossed with seeds on a single MDP."""

    mdp: dict  # {"path": ...} or generator params
    behavior: str = "uniform"
    sampling_mode: str = "uniform"
    n_values: tuple = (256, 1024, 4096, 16384)
    seeds: tuple = tuple(range(10))
    fogas: dict = field(default_factory=lambda: {"auto_tune": True})
    output_dir: str = "."

    _KNOWN_KEYS = {
        "mdp", "behavior", "sampling_mode", "n_values", "seeds", "fogas", "output_dir",
    }

    def __post_init__(self):
        if len(self.seeds) == 0:
            raise ValueError("seeds list must be nonempty")
        if any(n < 1 for n in self.n_values):
            raise ValueError("all n values must be >= 1")
        if self.sampling_mode not in ("occupancy", "uniform"):
            raise ValueError(f"unknown sampling_mode {self.sampling_mode!r}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            doc = json.load(f)
        unknown = set(doc) - cls._KNOWN_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("n_values", "seeds"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def load_mdp(self) -> LinearMdp:
        if "path" in self.mdp:
            return load_mdp(self.mdp["path"])
        return generate_linear_mdp(
            num_states=int(self.mdp["states"]),
            num_actions=int(self.mdp["actions"]),
            dim=int(self.mdp["dim"]),
            gamma=float(self.mdp["gamma"]),
            seed=int(self.mdp.get("seed", 0)),
        )


@dataclass(frozen=True)
class ExperimentRecord:
    mdp_id: str
    n: int
    seed: int
    T: int
    coverage_ratio: float
    suboptimality: float
    mean_suboptimality: float
    wall_time_ms: float
    status: str = "ok"

    def csv_row(self) -> str:
        return ",".join(
            [
                self.mdp_id,
                str(self.n),
                str(self.seed),
                str(self.T),
                repr(self.coverage_ratio),
                repr(self.suboptimality),
                repr(self.mean_suboptimality),
                f"{self.wall_time_ms:.3f}",
                self.status,
            ]
        )


def resolve_iterations(mdp: LinearMdp, n: int, fogas_spec: dict) -> int:
    """T from the config dict: explicit value, or the theoretical minimum
    (rounded up) capped by "T_cap" when auto-tuning."""
    if fogas_spec.get("T") is not None:
        return int(fogas_spec["T"])
    delta = float(fogas_spec.get("delta", 0.05))
    t_min = int(np.ceil(theoretical_min_iterations(mdp, n=n, delta=delta)))
    cap = int(fogas_spec.get("T_cap", 20000))
    return max(1, min(t_min, cap))


def fogas_config_from_spec(
    mdp: LinearMdp, n: int, seed: int, fogas_spec: dict, record_trajectory: bool = True
) -> FogasConfig:
    known = {"auto_tune", "T", "T_cap", "delta", "alpha", "rho", "eta", "beta", "d_theta"}
    unknown = set(fogas_spec) - known
    if unknown:
        raise ValueError(f"unknown fogas config keys: {sorted(unknown)}")
    return FogasConfig(
        T=resolve_iterations(mdp, n, fogas_spec),
        seed=seed,
        auto_tune=bool(fogas_spec.get("auto_tune", True)),
        delta=float(fogas_spec.get("delta", 0.05)),
        alpha=fogas_spec.get("alpha"),
        rho=fogas_spec.get("rho"),
        eta=fogas_spec.get("eta"),
        beta=fogas_spec.get("beta"),
        d_theta=fogas_spec.get("d_theta"),
        record_trajectory=record_trajectory,
    )


def mean_iterate_suboptimality(mdp: LinearMdp, run: FogasRun, rho_star: float) -> float:
    """(1/T) sum_t (rho(pi*) - rho(pi_t)), exact returns from the oracle."""
    if run.trajectory is None:
        raise ValueError("run was not recorded with record_trajectory")
    tables = iterate_policy_tables(mdp, run.trajectory, run.config.alpha)
    total = 0.0
    for t in range(tables.shape[0]):
        total += rho_star - evaluate_policy(mdp, TabularPolicy(tables[t])).return_value
    return total / tables.shape[0]


def run_cell(
    mdp: LinearMdp,
    behavior: TabularPolicy,
    sampling_mode: str,
    n: int,
    seed: int,
    fogas_spec: dict,
    mdp_id: str = "mdp",
) -> tuple[ExperimentRecord, FogasRun]:
    """One (n, seed) cell: collect data, run the solver, score against the oracle."""
    start = time.perf_counter()
    dataset = collect_dataset(mdp, behavior, n=n, sampling_mode=sampling_mode, seed=seed)
    config = fogas_config_from_spec(mdp, n, seed, fogas_spec)
    run = run_fogas(mdp, dataset, config)

    pi_star, star_eval = solve_optimal(mdp)
    cov = build_covariance(dataset, run.config.beta)
    out_eval = evaluate_policy(mdp, run.output_policy)
    record = ExperimentRecord(
        mdp_id=mdp_id,
        n=n,
        seed=seed,
        T=run.config.T,
        coverage_ratio=coverage_ratio(star_eval.lambda_pi, cov),
        suboptimality=star_eval.return_value - out_eval.return_value,
        mean_suboptimality=mean_iterate_suboptimality(mdp, run, star_eval.return_value),
        wall_time_ms=(time.perf_counter() - start) * 1000.0,
    )
    return record, run


def run_sweep(config: ExperimentConfig, mdp_id: str = "mdp") -> list[ExperimentRecord]:
    """Run the full grid in order; failures become per-row error records."""
    mdp = config.load_mdp()
    behavior = behavior_policy(mdp, config.behavior)
    records = []
    for n in config.n_values:
        for seed in config.seeds:
            try:
                record, _ = run_cell(
                    mdp, behavior, config.sampling_mode, int(n), int(seed),
                    config.fogas, mdp_id=mdp_id,
                )
            except Exception as e:  # record and continue; exit code handled by caller
                record = ExperimentRecord(
                    mdp_id=mdp_id, n=int(n), seed=int(seed), T=0,
                    coverage_ratio=float("nan"), suboptimality=float("nan"),
                    mean_suboptimality=float("nan"), wall_time_ms=0.0,
                    status=f"error:{type(e).__name__}",
                )
            records.append(record)
    return records


def write_records(records: list[ExperimentRecord], path) -> None:
    with open(path, "w") as f:
        f.write(RESULTS_HEADER + "\n")
        for rec in records:
            f.write(rec.csv_row() + "\n")


def summarize_by_n(records: list[ExperimentRecord]) -> dict[int, float]:
    """Median mean-iterate suboptimality per sample size (successful rows only)."""
    by_n: dict[int, list[float]] = {}
    for rec in records:
        if rec.status == "ok":
            by_n.setdefault(rec.n, []).append(rec.mean_suboptimality)
    return {n: float(np.median(vals)) for n, vals in sorted(by_n.items())}
