"""d-IRA master/worker logic, run configuration, and the sequential IRA baseline."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .automata import (AlphabetMismatch, FiniteAbstraction, intersect, is_empty,
                       iter_words, sigma_star, subtract_words)
from .ce import (AnalyzedCE, Analyzer, Exhausted, FeasibleFound,
                 select_ce)
from .lha import LinearHybridAutomaton, relax
from .reach import EngineLimits, build_abstraction, location_graph

log = logging.getLogger(__name__)

VarSet = frozenset


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FaultPlan:
    worker_kills: frozenset[tuple[int, int]] = frozenset()   # (worker id, iteration)
    master_crash: int | None = None                          # iteration
    worker_restart_delay: int = 2_000                        # virtual ticks
    master_restart_delay: int = 5_000

    def validate(self, workers: int, max_iterations: int):
        for j, i in self.worker_kills:
            if not 0 <= j < workers:
                raise ConfigError(f"fault plan kills unknown worker {j}")
            if not 0 <= i < max_iterations:
                raise ConfigError(f"fault plan iteration {i} outside 0..{max_iterations - 1}")
        if self.master_crash is not None and not 0 <= self.master_crash < max_iterations:
            raise ConfigError(f"master crash iteration {self.master_crash} out of range")
        if self.worker_restart_delay < 0 or self.master_restart_delay < 0:
            raise ConfigError("restart delays must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    workers: int = 4
    mode: str = "sim"                     # "sim" | "parallel"
    seed: int = 0
    max_iterations: int = 64
    select_timeout: float | None = 5.0    # wall clock; ignored in sim mode
    m0: int | None = None                 # default 2 * workers
    max_candidates: int = 64
    limits: EngineLimits = EngineLimits()
    checkpoint_dirs: tuple[str, ...] = ()
    faults: FaultPlan = FaultPlan()
    output: str = "text"                  # "text" | "json"
    iteration_timeout: float = 120.0      # parallel mode, seconds per round
    # simulated transport, in virtual ticks
    latency: int = 50
    latency_jitter: int = 25
    byte_cost: int = 1                    # ticks per 100 bytes
    sim_iteration_timeout: int = 200_000
    shadow_replicas: int = 2

    def validate(self):
        if self.workers < 1:
            raise ConfigError("need at least one worker")
        if self.mode not in ("sim", "parallel"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if self.m0 is not None and self.m0 < 1:
            raise ConfigError("m0 must be positive")
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be positive")
        if self.output not in ("text", "json"):
            raise ConfigError(f"unknown output format {self.output!r}")
        if self.shadow_replicas < 1:
            raise ConfigError("need at least one shadow replica")
        self.faults.validate(self.workers, self.max_iterations)

    def master_params(self) -> dict:
        """The parameters recorded in checkpoints."""
        return {"workers": self.workers, "max_iterations": self.max_iterations,
                "m0": self.m0, "max_candidates": self.max_candidates,
                "limits": asdict(self.limits)}


@dataclass(frozen=True)
class MasterState:
    iteration: int
    global_abstraction: FiniteAbstraction
    assignments: tuple[VarSet, ...]
    config: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, MasterState):
            return NotImplemented
        return (self.iteration, self.global_abstraction, self.assignments, self.config) == \
            (other.iteration, other.global_abstraction, other.assignments, other.config)

    __hash__ = None


def initial_state(h: LinearHybridAutomaton, config: RunConfig) -> MasterState:
    return MasterState(0, sigma_star(h.labels), tuple(VarSet() for _ in range(config.workers)),
                       config.master_params())


@dataclass(frozen=True)
class WorkerTask:
    iteration: int
    worker: int
    vars: VarSet
    model_hash: str
    model: LinearHybridAutomaton | None = None


@dataclass(frozen=True)
class WorkerResult:
    iteration: int
    worker: int
    abstraction: FiniteAbstraction


class _Missing:
    def __repr__(self):
        return "MISSING"


MISSING = _Missing()


def worker_step(h: LinearHybridAutomaton, vars: VarSet, limits: EngineLimits) -> FiniteAbstraction:
    """Relax ``h`` to ``vars`` and abstract the relaxation."""
    if not set(vars) <= set(h.variables):
        raise ValueError(f"assignment {sorted(vars)} not within the model variables")
    return build_abstraction(relax(h, vars), limits)


def run_task(task: WorkerTask, h: LinearHybridAutomaton, limits: EngineLimits) -> WorkerResult:
    return WorkerResult(task.iteration, task.worker, worker_step(h, task.vars, limits))


# ---------------------------------------------------------------------------
# decisions

@dataclass(frozen=True)
class Safe:
    global_abstraction: FiniteAbstraction


@dataclass(frozen=True)
class Reachable:
    witness: AnalyzedCE


@dataclass(frozen=True)
class Continue:
    state: MasterState
    selected: tuple[AnalyzedCE, ...]
    candidates: int


Decision = Safe | Reachable | Continue


def master_iteration(state: MasterState, results: Sequence, h: LinearHybridAutomaton,
                     analyzer: Analyzer, *, timeout: float | None = None) -> Decision:
    """One round of the master: intersect, test emptiness, select, reassign.

    ``results`` holds a :class:`WorkerResult` or ``MISSING`` per worker;
    missing abstractions count as the universal language.
    """
    g = state.global_abstraction
    for r in results:
        if r is MISSING:
            continue
        if r.abstraction.alphabet != g.alphabet:
            raise AlphabetMismatch(f"worker {r.worker} returned an abstraction over a different alphabet")
        g = intersect(g, r.abstraction)
    if is_empty(g):
        return Safe(g)
    params = state.config
    n = len(state.assignments)
    sel = select_ce(g, h, n, timeout, params.get("m0"),
                    max_candidates=params.get("max_candidates", 64), analyzer=analyzer)
    if isinstance(sel, FeasibleFound):
        return Reachable(sel.witness)
    if isinstance(sel, Exhausted):
        return Safe(intersect(g, location_graph(h)))
    bases = [a.basis for a in sel.selected]
    assignments = tuple(bases[j] if j < len(bases) else VarSet() for j in range(n))
    # progress guard: refuted words are infeasible in h, so dropping them is sound
    g = subtract_words(g, [a.word for a in sel.refuted])
    return Continue(MasterState(state.iteration + 1, g, assignments, state.config),
                    sel.selected, sel.candidates)


# ---------------------------------------------------------------------------
# verdicts and statistics

@dataclass(frozen=True)
class Verdict:
    kind: str                        # "safe" | "reachable" | "inconclusive"
    witness: AnalyzedCE | None = None
    reason: str = ""

    @property
    def exit_code(self) -> int:
        return {"safe": 0, "reachable": 1, "inconclusive": 2}[self.kind]

    def describe(self) -> str:
        if self.kind == "reachable":
            return f"REACHABLE via {' '.join(self.witness.word) or '<empty word>'}"
        if self.kind == "inconclusive":
            return f"INCONCLUSIVE ({self.reason})"
        return "SAFE"


@dataclass
class IterationStats:
    iteration: int
    assignments: list[list[str]]
    global_states: int
    candidates: int = 0
    missing: list[int] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def max_dim(self) -> int:
        return max((len(a) for a in self.assignments), default=0)


@dataclass
class RunStats:
    iterations: list[IterationStats] = field(default_factory=list)
    wall_time: float = 0.0
    analyses: int = 0
    message_bytes: int = 0
    model_bytes: int = 0
    restores: int = 0

    @property
    def max_relaxation_dim(self) -> int:
        return max((it.max_dim for it in self.iterations), default=0)

    def to_dict(self, with_times: bool = True) -> dict:
        out = {
            "iterations": [
                {"iteration": it.iteration, "assignments": it.assignments,
                 "global_states": it.global_states, "candidates": it.candidates,
                 "missing": it.missing, **({"wall_time": round(it.wall_time, 6)} if with_times else {})}
                for it in self.iterations],
            "analyses": self.analyses,
            "max_relaxation_dim": self.max_relaxation_dim,
            "message_bytes": self.message_bytes,
            "model_bytes": self.model_bytes,
            "restores": self.restores,
        }
        if with_times:
            out["wall_time"] = round(self.wall_time, 6)
        return out


@dataclass
class RunResult:
    verdict: Verdict
    stats: RunStats
    trace: list[str] = field(default_factory=list)
    final_state: MasterState | None = None


def verdict_of(decision: Decision) -> Verdict | None:
    if isinstance(decision, Safe):
        return Verdict("safe")
    if isinstance(decision, Reachable):
        return Verdict("reachable", decision.witness)
    return None


def record(stats: RunStats, state: MasterState, decision: Decision, missing: list[int], started: float):
    g = decision.state.global_abstraction if isinstance(decision, Continue) else state.global_abstraction
    stats.iterations.append(IterationStats(
        state.iteration, [sorted(a) for a in state.assignments], g.num_states,
        decision.candidates if isinstance(decision, Continue) else 0, missing,
        time.perf_counter() - started))


# ---------------------------------------------------------------------------
# entry points

def run_dira(h: LinearHybridAutomaton, n: int, config: RunConfig | None = None) -> RunResult:
    """Distributed IRA with ``n`` workers over the transport chosen by ``config.mode``."""
    from dataclasses import replace
    config = replace(config or RunConfig(), workers=n)
    config.validate()
    if config.mode == "sim":
        from .sim import run_simulated
        return run_simulated(h, n, config, config.faults, config.seed)
    from .parallel import run_parallel
    return run_parallel(h, config)


def run_ira(h: LinearHybridAutomaton, config: RunConfig | None = None) -> RunResult:
    """Sequential IRA: one relaxation and one (length-lex first) counterexample per iteration."""
    config = config or RunConfig()
    if config.max_iterations < 1:
        raise ConfigError("max_iterations must be positive")
    stats = RunStats()
    analyzer = Analyzer(h)
    t0 = time.perf_counter()
    g = sigma_star(h.labels)
    structure = location_graph(h)
    current: VarSet = VarSet()
    verdict = None
    for i in range(config.max_iterations):
        started = time.perf_counter()
        g = intersect(g, worker_step(h, current, config.limits))
        word = next(iter_words(intersect(g, structure)), None)
        stat = IterationStats(i, [sorted(current)], g.num_states, 0 if word is None else 1)
        stats.iterations.append(stat)
        if word is None:
            verdict = Verdict("safe")
        else:
            a = analyzer(word)
            if a.feasible:
                verdict = Verdict("reachable", a)
            else:
                current = a.basis
                g = subtract_words(g, [word])
        stat.wall_time = time.perf_counter() - started
        if verdict is not None:
            break
    else:
        verdict = Verdict("inconclusive", reason=f"iteration limit {config.max_iterations} reached")
    stats.wall_time = time.perf_counter() - t0
    stats.analyses = analyzer.calls
    return RunResult(verdict, stats)
