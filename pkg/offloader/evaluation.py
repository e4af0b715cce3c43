"""Benchmark harness: run policies over test traces and aggregate rewards."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import InvariantViolation, PolicyContractError
from .mdp import NUM_ACTIONS, Action, EpisodeEnv, RewardParams, Trace, budget_from_fraction
from .policies.base import BaseOffloadPolicy, PolicyDecision
from .policies.oracle import OraclePolicy
from .utils.logger import get_logger

logger = get_logger(__name__)

ORACLE_NAME = "Oracle"
DECOMPOSITION_TOLERANCE = 1e-9
Z_95 = 1.96
FLOAT_FORMAT = "%.9g"

ACTION_COLUMNS = [f"n_{a.name.lower()}" for a in Action]
REWARD_COLUMNS = ["policy", "trace", "fraction", "trial", "total_reward", "loss_sum", "cost_sum"]
EPISODE_COLUMNS = REWARD_COLUMNS + ["budget"] + ACTION_COLUMNS
SUMMARY_COLUMNS = [
    "policy",
    "fraction",
    "n",
    "median",
    "mean",
    "sd",
    "se",
    "ci95_low",
    "ci95_high",
    "mean_loss_sum",
    "mean_cost_sum",
    "mean_loss_term",
    "mean_cost_term",
]
RATIO_COLUMNS = ["policy", "reference", "reference_policy", "policy_median", "reference_median", "ratio"]
MIX_COLUMNS = ["policy", "fraction"] + [f"share_{a.name.lower()}" for a in Action]


@dataclass(slots=True)
class EpisodeResult:
    trace_id: str
    budget_fraction: float
    budget: int
    policy: str
    total_reward: float
    loss_sum: int
    cost_sum: float
    action_counts: Tuple[int, ...]
    action_log: Tuple[int, ...]
    trial: int = 0

    def decomposition_error(self, params: RewardParams) -> float:
        return abs(self.total_reward - (-params.alpha * self.loss_sum - params.beta * self.cost_sum))

    def with_trial(self, trial: int) -> "EpisodeResult":
        return replace(self, trial=trial)

    def as_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "policy": self.policy,
            "trace": self.trace_id,
            "fraction": self.budget_fraction,
            "trial": self.trial,
            "total_reward": self.total_reward,
            "loss_sum": self.loss_sum,
            "cost_sum": self.cost_sum,
            "budget": self.budget,
        }
        row.update(dict(zip(ACTION_COLUMNS, self.action_counts)))
        return row


def check_episode(result: EpisodeResult, params: RewardParams, horizon: int) -> None:
    """Raise :class:`InvariantViolation` when an episode breaks a bookkeeping rule."""

    cloud = result.action_counts[Action.QUERY_CLOUD]
    if cloud > result.budget:
        raise InvariantViolation(
            f"{result.policy} on {result.trace_id}: {cloud} cloud queries exceed budget {result.budget}"
        )
    if sum(result.action_counts) != horizon:
        raise InvariantViolation(f"{result.policy} on {result.trace_id}: action counts do not sum to T={horizon}")
    error = result.decomposition_error(params)
    if error >= DECOMPOSITION_TOLERANCE:
        raise InvariantViolation(
            f"{result.policy} on {result.trace_id}: reward decomposition off by {error:.3e}"
        )


def run_episode(
    policy: BaseOffloadPolicy,
    trace: Trace,
    budget_fraction: float,
    params: RewardParams,
    rng: Optional[np.random.Generator] = None,
    trial: int = 0,
) -> EpisodeResult:
    """Play ``policy`` on ``trace`` and record what it executed."""

    budget = budget_from_fraction(budget_fraction, trace.horizon)
    env = EpisodeEnv(trace, budget, params)
    policy.begin_episode(trace, budget, rng)

    total = 0.0
    loss_sum = 0
    cost_sum = 0.0
    counts = [0] * NUM_ACTIONS
    log: List[int] = []
    while not env.done:
        t = env.t
        decision = policy.decide(env.state, t)
        code = decision.action if isinstance(decision, PolicyDecision) else decision
        if isinstance(code, bool) or not isinstance(code, (int, np.integer)) or not 0 <= int(code) < NUM_ACTIONS:
            raise PolicyContractError(f"Policy {policy.name} returned {code!r} at t={t}")
        result = env.step(int(code))
        executed = result.info.executed_action
        total += result.reward
        loss_sum += result.info.loss
        cost_sum += params.cost(executed)
        counts[executed] += 1
        log.append(int(executed))

    outcome = EpisodeResult(
        trace_id=trace.trace_id,
        budget_fraction=float(budget_fraction),
        budget=budget,
        policy=policy.name,
        total_reward=total,
        loss_sum=loss_sum,
        cost_sum=cost_sum,
        action_counts=tuple(counts),
        action_log=tuple(log),
        trial=trial,
    )
    check_episode(outcome, params, trace.horizon)
    return outcome


# --- report -------------------------------------------------------------------


def signed_ratio(policy_median: float, reference_median: float) -> float:
    """``reference / policy`` for negative rewards; larger means the policy did better."""

    if policy_median < 0 and reference_median < 0:
        return reference_median / policy_median
    if policy_median == 0 and reference_median == 0:
        return 1.0
    return float("nan")


def _aggregate(frame: pd.DataFrame, params: RewardParams) -> Dict[str, float]:
    rewards = frame["total_reward"].to_numpy(dtype=np.float64)
    n = rewards.size
    mean = float(rewards.mean())
    sd = float(rewards.std(ddof=1)) if n > 1 else float("nan")
    se = sd / np.sqrt(n) if n > 1 else float("nan")
    loss_mean = float(frame["loss_sum"].mean())
    cost_mean = float(frame["cost_sum"].mean())
    return {
        "n": n,
        "median": float(np.median(rewards)),
        "mean": mean,
        "sd": sd,
        "se": se,
        "ci95_low": mean - Z_95 * se,
        "ci95_high": mean + Z_95 * se,
        "mean_loss_sum": loss_mean,
        "mean_cost_sum": cost_mean,
        "mean_loss_term": -params.alpha * loss_mean,
        "mean_cost_term": -params.beta * cost_mean,
    }


@dataclass(slots=True)
class BenchmarkReport:
    """Every episode of a benchmark plus the aggregates derived from them."""

    episodes: pd.DataFrame
    params: RewardParams
    baselines: Tuple[str, ...] = ()
    variants: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    sweep: Optional[pd.DataFrame] = None
    violations: List[str] = field(default_factory=list)

    @classmethod
    def from_results(
        cls,
        results: Sequence[EpisodeResult],
        params: RewardParams,
        baselines: Sequence[str] = (),
        violations: Sequence[str] = (),
    ) -> "BenchmarkReport":
        frame = pd.DataFrame([r.as_row() for r in results], columns=EPISODE_COLUMNS)
        return cls(episodes=frame, params=params, baselines=tuple(baselines), violations=list(violations))

    @property
    def policies(self) -> List[str]:
        return list(dict.fromkeys(self.episodes["policy"]))

    def medians(self) -> Dict[str, float]:
        return {name: float(group["total_reward"].median()) for name, group in self.episodes.groupby("policy", sort=True)}

    def best_baseline(self) -> Optional[str]:
        medians = self.medians()
        candidates = [(medians[name], name) for name in self.baselines if name in medians]
        if not candidates:
            return None
        best_value = max(value for value, _ in candidates)
        return min(name for value, name in candidates if value == best_value)

    def summary(self) -> pd.DataFrame:
        rows = []
        for name, group in self.episodes.groupby("policy", sort=True):
            rows.append({"policy": name, "fraction": "all", **_aggregate(group, self.params)})
            for fraction, part in group.groupby("fraction", sort=True):
                rows.append({"policy": name, "fraction": f"{fraction:g}", **_aggregate(part, self.params)})
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def ratios(self) -> pd.DataFrame:
        medians = self.medians()
        best = self.best_baseline()
        references = [("oracle", ORACLE_NAME), ("best_baseline", best)]
        rows = []
        for name in sorted(medians):
            if name == ORACLE_NAME:
                continue
            for label, reference in references:
                if reference is None or reference not in medians:
                    continue
                rows.append(
                    {
                        "policy": name,
                        "reference": label,
                        "reference_policy": reference,
                        "policy_median": medians[name],
                        "reference_median": medians[reference],
                        "ratio": signed_ratio(medians[name], medians[reference]),
                    }
                )
        return pd.DataFrame(rows, columns=RATIO_COLUMNS)

    def action_mix(self) -> pd.DataFrame:
        rows = []
        for (name, fraction), group in self.episodes.groupby(["policy", "fraction"], sort=True):
            totals = group[ACTION_COLUMNS].sum().to_numpy(dtype=np.float64)
            shares = totals / totals.sum() if totals.sum() > 0 else totals
            rows.append({"policy": name, "fraction": f"{fraction:g}", **dict(zip(MIX_COLUMNS[2:], shares))})
        return pd.DataFrame(rows, columns=MIX_COLUMNS)

    def collapse_variants(self, prefix: str, label: str, parameter: str = "q") -> "BenchmarkReport":
        """Keep only the best-median policy among those named ``prefix*``.

        The survivor is renamed ``label``; every variant's median goes to
        :attr:`sweep`.
        """

        medians = self.medians()
        names = sorted((n for n in medians if n.startswith(prefix)), key=lambda n: float(n[len(prefix):]))
        if not names:
            return self
        best = max(names, key=lambda n: medians[n])
        sweep = pd.DataFrame(
            {
                "policy": names,
                parameter: [float(n[len(prefix):]) for n in names],
                "median": [medians[n] for n in names],
                "selected": [n == best for n in names],
            }
        )
        kept = self.episodes[~self.episodes["policy"].isin(set(names) - {best})].copy()
        kept.loc[kept["policy"] == best, "policy"] = label
        baselines = tuple(label if n == best else n for n in self.baselines if n == best or n not in names)
        variants = dict(self.variants)
        variants[label] = {"source": best, parameter: float(best[len(prefix):])}
        return BenchmarkReport(
            episodes=kept.reset_index(drop=True),
            params=self.params,
            baselines=baselines,
            variants=variants,
            sweep=sweep,
            violations=list(self.violations),
        )


# --- benchmark ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class _TraceTask:
    trace_index: int
    trace: Trace
    policies: Tuple[BaseOffloadPolicy, ...]
    fractions: Tuple[float, ...]
    trials: int
    params: RewardParams
    seed: int
    include_oracle: bool
    oracle_max_horizon: int


def _run_trace(task: _TraceTask) -> Tuple[List[EpisodeResult], List[str]]:
    """Evaluate every policy, fraction and trial on one trace."""

    results: List[EpisodeResult] = []
    violations: List[str] = []
    oracle = OraclePolicy(task.params, task.oracle_max_horizon, name=ORACLE_NAME)
    for f_index, fraction in enumerate(task.fractions):
        ceiling: Optional[EpisodeResult] = None
        if task.include_oracle:
            ceiling = run_episode(oracle, task.trace, fraction, task.params)
            results.extend(ceiling.with_trial(k) for k in range(task.trials))
        for p_index, policy in enumerate(task.policies):
            if policy.stochastic:
                cell = [
                    run_episode(
                        policy,
                        task.trace,
                        fraction,
                        task.params,
                        rng=np.random.default_rng([task.seed, p_index, task.trace_index, f_index, k]),
                        trial=k,
                    )
                    for k in range(task.trials)
                ]
            else:
                single = run_episode(policy, task.trace, fraction, task.params)
                cell = [single.with_trial(k) for k in range(task.trials)]
            if ceiling is not None:
                for outcome in cell:
                    if outcome.total_reward > ceiling.total_reward + DECOMPOSITION_TOLERANCE:
                        violations.append(
                            f"{outcome.policy} beat the oracle on {outcome.trace_id} "
                            f"(fraction {fraction:g}, trial {outcome.trial}): "
                            f"{outcome.total_reward:.9g} > {ceiling.total_reward:.9g}"
                        )
            results.extend(cell)
    return results, violations


class BenchmarkRunner:
    """Coordinate policy evaluation over a set of test traces."""

    def __init__(
        self,
        policies: Sequence[BaseOffloadPolicy],
        params: RewardParams,
        budget_fractions: Sequence[float],
        trials: int = 4,
        seed: int = 0,
        jobs: int = 1,
        include_oracle: bool = True,
        oracle_max_horizon: int = 200,
    ) -> None:
        if not policies and not include_oracle:
            raise ValueError("benchmark needs at least one policy")
        names = [p.name for p in policies]
        if len(set(names)) != len(names) or ORACLE_NAME in names:
            raise ValueError(f"Policy names must be unique and not '{ORACLE_NAME}', got {names}")
        self.policies = tuple(policies)
        self.params = params
        self.budget_fractions = tuple(float(f) for f in budget_fractions)
        self.trials = int(trials)
        self.seed = int(seed)
        self.jobs = max(1, int(jobs))
        self.include_oracle = include_oracle
        self.oracle_max_horizon = oracle_max_horizon
        self.logger = get_logger(self.__class__.__name__)

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def run(self, traces: Sequence[Trace]) -> BenchmarkReport:
        if not traces:
            raise ValueError("benchmark needs at least one test trace")
        tasks = [
            _TraceTask(
                trace_index=index,
                trace=trace,
                policies=self.policies,
                fractions=self.budget_fractions,
                trials=self.trials,
                params=self.params,
                seed=self.seed,
                include_oracle=self.include_oracle,
                oracle_max_horizon=self.oracle_max_horizon,
            )
            for index, trace in enumerate(traces)
        ]
        self.logger.info(
            "Benchmarking %d policies on %d traces x %d fractions x %d trials (jobs=%d)",
            len(self.policies) + int(self.include_oracle),
            len(traces),
            len(self.budget_fractions),
            self.trials,
            self.jobs,
        )
        outputs = self._execute(tasks)

        results: List[EpisodeResult] = []
        violations: List[str] = []
        for cell_results, cell_violations in outputs:
            results.extend(cell_results)
            violations.extend(cell_violations)
        for message in violations:
            self.logger.error("Dominance violation: %s", message)

        results.sort(key=lambda r: (r.policy, r.trace_id, r.budget_fraction, r.trial))
        baselines = [p.name for p in self.policies if p.is_baseline]
        report = BenchmarkReport.from_results(results, self.params, baselines, violations)
        self.logger.info("Benchmark complete: %d episodes, %d violations", len(results), len(violations))
        return report

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _execute(self, tasks: List[_TraceTask]) -> List[Tuple[List[EpisodeResult], List[str]]]:
        if self.jobs == 1:
            return [_run_trace(task) for task in tasks]
        with ProcessPoolExecutor(max_workers=self.jobs) as executor:
            return list(executor.map(_run_trace, tasks))


def benchmark(
    policies: Sequence[BaseOffloadPolicy],
    test_traces: Sequence[Trace],
    budget_fractions: Sequence[float],
    trials: int,
    params: RewardParams,
    seed: int = 0,
    jobs: int = 1,
    include_oracle: bool = True,
    oracle_max_horizon: int = 200,
) -> BenchmarkReport:
    runner = BenchmarkRunner(
        policies,
        params,
        budget_fractions,
        trials=trials,
        seed=seed,
        jobs=jobs,
        include_oracle=include_oracle,
        oracle_max_horizon=oracle_max_horizon,
    )
    return runner.run(test_traces)


# --- export -------------------------------------------------------------------

_README = """# Benchmark report

All files are UTF-8, comma separated, with a header row and `.` as decimal
point. Floats carry 9 significant digits. Rewards are non-positive; values
closer to zero are better.

## rewards.csv
One row per evaluated episode.
- `policy`: policy name (`Oracle` is the clairvoyant upper bound)
- `trace`: test trace id
- `fraction`: query budget as a fraction of the horizon
- `trial`: trial index; deterministic policies repeat one run per trial
- `total_reward`: episode reward, equal to `-alpha*loss_sum - beta*cost_sum`
- `loss_sum`: number of wrong predictions
- `cost_sum`: summed cost of the executed actions

## summary.csv
Aggregates per policy, over all fractions (`fraction=all`) and per fraction.
- `n`, `median`, `mean`, `sd` (sample), `se` = sd/sqrt(n)
- `ci95_low`, `ci95_high`: mean -/+ 1.96 * se
- `mean_loss_sum`, `mean_cost_sum`: mean components
- `mean_loss_term`, `mean_cost_term`: the same scaled by -alpha and -beta

## ratios.csv
- `reference`: `oracle` or `best_baseline`; `reference_policy` names it
- `ratio` = reference_median / policy_median when both are negative. Above 1
  the policy beats the reference; below 1 it reaches that share of it.

## action_mix.csv
Share of each executed action per policy and fraction.

## threshold_sweep.csv
Median reward of every swept confidence percentile; `selected` marks the one
reported as `robot-heuristic`. Written only when a sweep ran.
"""


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise OSError(f"Cannot write report file {path}: {exc}") from exc
    return path


def export_report(report: BenchmarkReport, directory: str | Path) -> Dict[str, Path]:
    """Write the report CSVs and a README describing their columns."""

    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Cannot create report directory {out}: {exc}") from exc
    if report.episodes.empty:
        logger.warning("Exporting an empty benchmark report to %s", out)

    paths = {
        "rewards": _write_csv(report.episodes.loc[:, REWARD_COLUMNS], out / "rewards.csv"),
        "summary": _write_csv(report.summary(), out / "summary.csv"),
        "ratios": _write_csv(report.ratios(), out / "ratios.csv"),
        "action_mix": _write_csv(report.action_mix(), out / "action_mix.csv"),
    }
    if report.sweep is not None:
        paths["threshold_sweep"] = _write_csv(report.sweep, out / "threshold_sweep.csv")
    readme = out / "README.md"
    try:
        readme.write_text(_README, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Cannot write report file {readme}: {exc}") from exc
    paths["readme"] = readme
    return paths
