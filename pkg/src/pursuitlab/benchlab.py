"""Monte-Carlo benchmark harness for the pursuit family.

Generates Gaussian sparse-recovery problems, runs paired trials (every
configuration sees the identical problem sequence), aggregates exact
recovery rates, average normalized mean-squared error, and the search
counters, and serializes reports. Per-trial seeds derive from
(global_seed, sparsity, trial index), so any subset of trials reproduces
bit-identically in any execution order or process layout; wall time is
the only nondeterministic field in a report.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import multiprocessing
import numpy as np

from .pursuit import (
    ADAPTIVE_MULTIPLICATIVE,
    SPARSITY,
    CostModel,
    PursuitConfig,
    TerminationRule,
    run_aomp,
    run_mmp_bf,
    run_mmp_df,
    run_omp,
)

__all__ = [
    "CSV_HEADER",
    "SCHEMA_VERSION",
    "TrialError",
    "SparseProblem",
    "TrialResult",
    "SweepCell",
    "SweepReport",
    "derive_trial_seed",
    "gen_problem",
    "nmse_value",
    "run_trial",
    "run_sweep",
    "anmse",
    "reference_configs",
    "emit_report",
]

CSV_HEADER = ("K,algorithm,trials,exact_rate,anmse,"
              "mean_iterations,mean_explored_nodes,mean_wall_time_s")
SCHEMA_VERSION = 1
DEFAULT_EXACT_TOL = 1e-2


class TrialError(RuntimeError):
    """A pursuit failed inside a trial; the message carries the problem seed."""


@dataclass(frozen=True)
class SparseProblem:
    """One synthetic recovery instance: observation = dictionary @ signal."""

    dictionary: np.ndarray
    signal: np.ndarray
    observation: np.ndarray
    sparsity: int
    seed: int

    def __post_init__(self):
        m, n = self.dictionary.shape
        if not n >= m > self.sparsity >= 1:
            raise ValueError(
                f"need cols >= rows > sparsity >= 1, got {n}, {m}, {self.sparsity}")
        if np.count_nonzero(self.signal) != self.sparsity:
            raise ValueError("signal nonzero count does not match sparsity")
        resid = np.linalg.norm(self.observation - self.dictionary @ self.signal)
        if resid > 1e-12 * max(np.linalg.norm(self.observation), 1.0):
            raise ValueError("observation is not the dictionary image of signal")


@dataclass(frozen=True)
class TrialResult:
    seed: int
    k: int
    algorithm: str
    nmse: float
    exact: bool
    iterations: int
    explored_nodes: int
    wall_time_s: float


@dataclass(frozen=True)
class SweepCell:
    k: int
    algorithm: str
    trials: int
    exact_rate: float
    anmse: float
    mean_iterations: float
    mean_explored_nodes: float
    mean_wall_time_s: float


@dataclass(frozen=True)
class SweepReport:
    global_seed: int
    n: int
    m: int
    k_values: tuple
    trials_per_k: int
    exact_tol: float
    configs: tuple        # config echo, one dict per configuration
    cells: tuple = field(default=())


def derive_trial_seed(global_seed, k, trial):
    """Stable 64-bit problem seed for one (sweep, sparsity, trial) slot."""
    ss = np.random.SeedSequence((global_seed, k, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def gen_problem(n, m, k, seed, normalize_columns=False, flat_amplitudes=False):
    """Gaussian dictionary (entry variance 1/m) and an exactly k-sparse signal.

    The support is uniform among k-subsets, nonzero values are standard
    normal (or unit-magnitude random signs with flat_amplitudes), and the
    whole instance is a pure function of the seed.
    """
    if not n > m > k >= 1:
        raise ValueError(f"need n > m > k >= 1, got {n}, {m}, {k}")
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    if normalize_columns:
        a = a / np.linalg.norm(a, axis=0, keepdims=True)
    support = rng.choice(n, size=k, replace=False)
    values = np.sign(rng.standard_normal(k)) if flat_amplitudes \
        else rng.standard_normal(k)
    while np.any(values == 0.0):  # keep the nonzero count exact
        values[values == 0.0] = rng.standard_normal(np.sum(values == 0.0))
    x = np.zeros(n)
    x[support] = values
    return SparseProblem(dictionary=a, signal=x, observation=a @ x,
                         sparsity=k, seed=int(seed))


def nmse_value(signal, estimate):
    """Squared error of the estimate relative to the signal energy."""
    energy = float(np.dot(signal, signal))
    if energy == 0.0:
        raise ValueError("signal energy is zero")
    diff = np.asarray(estimate, dtype=np.float64) - signal
    return float(np.dot(diff, diff)) / energy


def _resolved(config, problem):
    rule = config.termination
    if rule.kind == SPARSITY and rule.k is None:
        config = replace(config, termination=replace(rule, k=problem.sparsity))
    return config


def run_trial(problem, config, exact_tol=DEFAULT_EXACT_TOL):
    """One pursuit on one problem; wall time wraps the pursuit call only."""
    if exact_tol <= 0.0:
        raise ValueError("exact_tol must be positive")
    config = _resolved(config, problem)
    a, y = problem.dictionary, problem.observation
    try:
        start = time.perf_counter()
        if config.algorithm == "omp":
            result = run_omp(a, y, config.termination)
        elif config.algorithm == "mmp-bf":
            result = run_mmp_bf(a, y, config)
        elif config.algorithm == "mmp-df":
            result = run_mmp_df(a, y, config)
        else:
            result = run_aomp(a, y, config)
        wall = time.perf_counter() - start
    except Exception as err:
        raise TrialError(
            f"pursuit {config.tag!r} failed on problem seed {problem.seed}: "
            f"{err}") from err
    err2 = nmse_value(problem.signal, result.estimate)
    return TrialResult(seed=problem.seed, k=problem.sparsity,
                       algorithm=config.tag, nmse=err2,
                       exact=bool(np.sqrt(err2) <= exact_tol),
                       iterations=result.iterations,
                       explored_nodes=result.explored_nodes,
                       wall_time_s=wall)


def anmse(nmse_values):
    """Arithmetic mean of per-trial normalized errors."""
    values = list(nmse_values)
    if not values:
        raise ValueError("anmse of an empty list")
    return float(sum(values)) / len(values)


def _trial_batch(args):
    """All configs on one generated problem; the process-pool work unit."""
    (n, m, k, trial, global_seed, configs, exact_tol,
     normalize_columns, flat_amplitudes) = args
    problem = gen_problem(n, m, k, derive_trial_seed(global_seed, k, trial),
                          normalize_columns=normalize_columns,
                          flat_amplitudes=flat_amplitudes)
    return [run_trial(problem, cfg, exact_tol) for cfg in configs]


def _rule_dict(rule):
    if rule.kind == SPARSITY:
        return {"kind": rule.kind, "k": rule.k, "solution_eps": rule.epsilon_rel}
    return {"kind": rule.kind, "epsilon_rel": rule.epsilon_rel, "k_max": rule.k_max}


def _config_dict(config):
    out = {"algorithm": config.algorithm, "label": config.tag,
           "termination": _rule_dict(config.termination),
           "max_paths": config.max_paths}
    if config.algorithm in ("mmp-bf", "mmp-df"):
        out["branch_factor"] = config.branch_factor
    if config.algorithm == "mmp-bf":
        out["beam_width"] = config.beam_width
    if config.algorithm == "aomp":
        out.update(init_paths=config.init_paths,
                   expand_branches=config.expand_branches,
                   cost_model={"kind": config.cost_model.kind,
                               "alpha": config.cost_model.alpha})
    return out


def run_sweep(n, m, k_values, trials_per_k, configs, global_seed,
              exact_tol=DEFAULT_EXACT_TOL, jobs=1, trial_log=None,
              normalize_columns=False, flat_amplitudes=False):
    """Paired Monte-Carlo sweep over sparsity levels.

    Every configuration runs on the identical problem sequence. With
    jobs > 1, (sparsity, trial) slots run in worker processes; aggregation
    folds results in deterministic slot order regardless of completion
    order, so the report is the same for any jobs value except for the
    wall-time means. trial_log, when given, receives one JSON line per
    (trial, configuration) in that same order.
    """
    k_values = [int(k) for k in k_values]
    configs = list(configs)
    if not k_values:
        raise ValueError("k_values is empty")
    if not configs:
        raise ValueError("configs is empty")
    if len({cfg.tag for cfg in configs}) != len(configs):
        raise ValueError("config labels must be distinct")
    for k in k_values:
        if not n > m > k >= 1:
            raise ValueError(f"need n > m > k >= 1, got {n}, {m}, {k}")
    if trials_per_k < 1:
        raise ValueError("trials_per_k must be >= 1")

    slots = [(n, m, k, t, global_seed, configs, exact_tol,
              normalize_columns, flat_amplitudes)
             for k in k_values for t in range(trials_per_k)]
    if jobs > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            batches = list(pool.map(_trial_batch, slots, chunksize=4))
    else:
        batches = [_trial_batch(slot) for slot in slots]

    if trial_log is not None:
        with open(trial_log, "w", encoding="utf-8") as fh:
            for batch in batches:
                for tr in batch:
                    fh.write(json.dumps(
                        {"seed": tr.seed, "K": tr.k, "algorithm": tr.algorithm,
                         "nmse": tr.nmse, "exact": tr.exact,
                         "iterations": tr.iterations,
                         "explored_nodes": tr.explored_nodes,
                         "wall_time_s": tr.wall_time_s}) + "\n")

    cells = []
    per_k = trials_per_k
    for ki, k in enumerate(k_values):
        rows = batches[ki * per_k:(ki + 1) * per_k]
        for ci, cfg in enumerate(configs):
            trials = [row[ci] for row in rows]
            cells.append(SweepCell(
                k=k, algorithm=cfg.tag, trials=len(trials),
                exact_rate=sum(t.exact for t in trials) / len(trials),
                anmse=anmse([t.nmse for t in trials]),
                mean_iterations=float(np.mean([t.iterations for t in trials])),
                mean_explored_nodes=float(np.mean([t.explored_nodes
                                                   for t in trials])),
                mean_wall_time_s=float(np.mean([t.wall_time_s
                                                for t in trials]))))
    return SweepReport(global_seed=int(global_seed), n=n, m=m,
                       k_values=tuple(k_values), trials_per_k=trials_per_k,
                       exact_tol=exact_tol,
                       configs=tuple(_config_dict(c) for c in configs),
                       cells=tuple(cells))


def reference_configs(epsilon_rel=1e-6, k_max=55):
    """The four benchmark configurations of the comparison experiment.

    Two best-first searches (fixed-alpha cost with the sparsity rule,
    progress-adaptive cost with the residual rule) and two depth-first
    searches under the same two rules. Sparsity-rule targets stay
    unresolved here and bind to each problem's sparsity at trial time.
    """
    aomp = dict(init_paths=3, expand_branches=2, max_paths=200)
    return [
        PursuitConfig("aomp", TerminationRule.sparsity(None),
                      cost_model=CostModel(alpha=0.8), label="aomp-k", **aomp),
        PursuitConfig("aomp", TerminationRule.residual(epsilon_rel, k_max),
                      cost_model=CostModel(kind=ADAPTIVE_MULTIPLICATIVE,
                                           alpha=0.97),
                      label="aomp-e", **aomp),
        PursuitConfig("mmp-df", TerminationRule.sparsity(None),
                      branch_factor=6, max_paths=200, label="mmp-df-k"),
        PursuitConfig("mmp-df", TerminationRule.residual(epsilon_rel, k_max),
                      branch_factor=6, max_paths=200, label="mmp-df-e"),
    ]


def _sig12(x):
    """A float rounded to its 12-significant-digit rendering."""
    return float(f"{float(x):.12g}")


def _cell_row(cell):
    return (f"{cell.k},{cell.algorithm},{cell.trials},"
            f"{cell.exact_rate:.12g},{cell.anmse:.12g},"
            f"{cell.mean_iterations:.12g},{cell.mean_explored_nodes:.12g},"
            f"{cell.mean_wall_time_s:.12g}")


def emit_report(report, fmt, path=None):
    """Render a sweep report as CSV or JSON; optionally write it to path.

    All numbers are serialized at 12 significant digits, so a JSON document
    parses and re-serializes byte-identically.
    """
    if fmt == "csv":
        doc = "\n".join([CSV_HEADER] + [_cell_row(c) for c in report.cells])
        doc += "\n"
    elif fmt == "json":
        doc = json.dumps({
            "schema_version": SCHEMA_VERSION,
            "global_seed": report.global_seed,
            "config": {"n": report.n, "m": report.m,
                       "k_values": list(report.k_values),
                       "trials_per_k": report.trials_per_k,
                       "exact_tol": _sig12(report.exact_tol),
                       "configurations": list(report.configs)},
            "cells": [{"K": c.k, "algorithm": c.algorithm, "trials": c.trials,
                       "exact_rate": _sig12(c.exact_rate),
                       "anmse": _sig12(c.anmse),
                       "mean_iterations": _sig12(c.mean_iterations),
                       "mean_explored_nodes": _sig12(c.mean_explored_nodes),
                       "mean_wall_time_s": _sig12(c.mean_wall_time_s)}
                      for c in report.cells]}, indent=2) + "\n"
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(doc)
    return doc
