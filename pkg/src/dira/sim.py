"""Deterministic discrete-event simulation of the d-IRA cluster.

A virtual clock (integer ticks) orders every event; message latencies and
worker compute times come from a seeded RNG, so the same (model, config,
fault plan, seed) always yields the same trace.  Worker abstractions are
computed for real, in-process, when a task arrives.

Faults: a worker listed for iteration ``i`` crashes midway through that
task, restarts after a delay with an empty model cache and announces itself
to the master.  A master crash at iteration ``i`` loses the round being
collected; a replacement restores the newest checkpoint found on the shadow
replicas and re-dispatches from there.
"""

from __future__ import annotations

import hashlib
import heapq
import random
import time
from dataclasses import dataclass, field

from .ce import Analyzer
from .checkpoint import DirectoryStore, MemoryStore, checkpoint, latest_state
from .lha import LinearHybridAutomaton, write_lha
from .runtime import (MISSING, Continue, FaultPlan, RunConfig, RunResult,
                      RunStats, Verdict, WorkerResult, initial_state,
                      master_iteration, record, verdict_of, worker_step)

TRACE_HEADER = "# dira-trace 1"
ENVELOPE_BYTES = 128


def varset_text(vars) -> str:
    return "vars " + " ".join(sorted(vars)) + "\n"


def task_message(iteration: int, worker: int, vars, model_hash: str) -> str:
    return f"task {iteration} {worker} {model_hash}\n" + varset_text(vars)


def result_message(iteration: int, worker: int, abstraction_text: str) -> str:
    return f"result {iteration} {worker}\n" + abstraction_text


def seal_trace(lines: list[str]) -> str:
    body = TRACE_HEADER + "\n" + "".join(l + "\n" for l in lines)
    return body + f"# end sha256={hashlib.sha256(body.encode()).hexdigest()}\n"


@dataclass
class _Worker:
    alive: bool = True
    incarnation: int = 0
    has_model: bool = False


@dataclass
class _Round:
    epoch: int
    iteration: int
    results: dict = field(default_factory=dict)
    bytes: int = 0
    bound: int = 0
    started: float = 0.0
    open: bool = True


class Simulation:
    def __init__(self, h: LinearHybridAutomaton, config: RunConfig, faults: FaultPlan, seed: int):
        self.h = h
        self.config = config
        self.n = config.workers
        self.rng = random.Random(seed)
        self.model_text = write_lha(h)
        self.model_hash = hashlib.sha256(self.model_text.encode()).hexdigest()
        self.pending_kills = set(faults.worker_kills)
        self.pending_master_crash = faults.master_crash
        self.faults = faults
        self.now = 0
        self.seq = 0
        self.queue: list = []
        self.trace: list[str] = []
        self.workers = [_Worker() for _ in range(self.n)]
        self.replicas = [MemoryStore(f"replica{r}") for r in range(config.shadow_replicas)]
        # on-disk copies for inspection; recovery in the simulation uses the replicas only
        self.disk = [DirectoryStore(d) for d in config.checkpoint_dirs]
        self.stats = RunStats()
        self.epoch = 0
        self.master_alive = True
        self.shipped: set[int] = set()
        self.state = initial_state(h, config)
        self.analyzer = Analyzer(h)
        self.round: _Round | None = None
        self.verdict: Verdict | None = None

    # -- plumbing ---------------------------------------------------------
    def log(self, event: str):
        self.trace.append(f"t={self.now} {event}")

    def at(self, delay: int, kind: str, *payload):
        self.seq += 1
        heapq.heappush(self.queue, (self.now + delay, self.seq, kind, payload))

    def latency(self, nbytes: int) -> int:
        return self.config.latency + self.rng.randint(0, self.config.latency_jitter) + \
            (nbytes * self.config.byte_cost) // 100

    # -- master -----------------------------------------------------------
    def dispatch(self):
        st = self.state
        if st.iteration >= self.config.max_iterations:
            self.verdict = Verdict("inconclusive", reason=f"iteration limit {self.config.max_iterations} reached")
            self.log(f"master stop iteration-limit iter={st.iteration}")
            return
        rnd = self.round = _Round(self.epoch, st.iteration, started=time.perf_counter())
        for j in range(self.n):
            vars = st.assignments[j]
            msg = task_message(st.iteration, j, vars, self.model_hash)
            size = len(msg.encode())
            rnd.bytes += size
            rnd.bound += len(varset_text(vars).encode()) + ENVELOPE_BYTES
            ship = j not in self.shipped
            extra = len(self.model_text.encode()) if ship else 0
            if ship:
                self.shipped.add(j)
                self.stats.model_bytes += extra
            self.log(f"master send task iter={st.iteration} worker={j} vars={{{','.join(sorted(vars))}}} "
                     f"bytes={size}{f' model_bytes={extra}' if ship else ''}")
            self.at(self.latency(size + extra), "task", self.epoch, st.iteration, j, vars, ship)
        self.at(self.config.sim_iteration_timeout, "timeout", self.epoch, st.iteration)

    def on_result(self, epoch, iteration, j, result, text_size):
        rnd = self.round
        if not self.master_alive or rnd is None or epoch != self.epoch or not rnd.open or rnd.iteration != iteration:
            self.log(f"master drop result iter={iteration} worker={j}")
            return
        rnd.results[j] = result
        rnd.bytes += text_size
        rnd.bound += len(result.abstraction.serialize().encode()) + ENVELOPE_BYTES
        self.log(f"master recv result iter={iteration} worker={j} bytes={text_size} "
                 f"states={result.abstraction.num_states}")
        if len(rnd.results) == self.n:
            self.close_round()

    def on_timeout(self, epoch, iteration):
        rnd = self.round
        if rnd is None or not rnd.open or epoch != self.epoch or rnd.iteration != iteration or not self.master_alive:
            return
        missing = [j for j in range(self.n) if j not in rnd.results]
        self.log(f"master timeout iter={iteration} missing={missing}")
        self.close_round()

    def close_round(self):
        rnd = self.round
        rnd.open = False
        if rnd.bytes > rnd.bound:
            raise AssertionError(f"communication bound violated in iteration {rnd.iteration}: "
                                 f"{rnd.bytes} > {rnd.bound}")
        self.stats.message_bytes += rnd.bytes
        if self.pending_master_crash == rnd.iteration:
            self.pending_master_crash = None
            self.master_alive = False
            self.epoch += 1
            self.log(f"master crash iter={rnd.iteration}")
            self.at(self.faults.master_restart_delay, "master_restore", self.epoch)
            return
        missing = [j for j in range(self.n) if j not in rnd.results]
        results = [rnd.results.get(j, MISSING) for j in range(self.n)]
        before = self.analyzer.calls
        decision = master_iteration(self.state, results, self.h, self.analyzer, timeout=None)
        self.stats.analyses += self.analyzer.calls - before
        record(self.stats, self.state, decision, missing, rnd.started)
        cost = 10 * (self.analyzer.calls - before) + 1
        self.now += cost
        verdict = verdict_of(decision)
        if verdict is not None:
            self.verdict = verdict
            self.log(f"master verdict {verdict.kind} iter={rnd.iteration}"
                     + (f" witness={' '.join(verdict.witness.word) or '<empty>'}" if verdict.witness else ""))
            return
        assert isinstance(decision, Continue)
        self.state = decision.state
        sel = ";".join(",".join(sorted(a.basis)) for a in decision.selected)
        self.log(f"master decide iter={rnd.iteration} global_states={self.state.global_abstraction.num_states} "
                 f"candidates={decision.candidates} selected=[{sel}]")
        data = checkpoint(self.state)
        for store in self.disk:
            store.put(self.state.iteration, data)
        for r, rep in enumerate(self.replicas):
            self.at(self.latency(len(data)), "ckpt", r, self.state.iteration, data)
        self.dispatch()

    def on_master_restore(self, epoch):
        if epoch != self.epoch:
            return
        restored = latest_state(self.replicas)
        self.master_alive = True
        self.analyzer = Analyzer(self.h)
        self.shipped = set()
        self.stats.restores += 1
        if restored is None:
            self.state = initial_state(self.h, self.config)
            self.log("master restore from=scratch iter=0")
        else:
            self.state = restored
            self.log(f"master restore from=checkpoint iter={restored.iteration}")
        self.dispatch()

    # -- workers ----------------------------------------------------------
    def on_task(self, epoch, iteration, j, vars, ship):
        w = self.workers[j]
        if not w.alive:
            self.log(f"worker {j} lost task iter={iteration} (down)")
            return
        if ship:
            w.has_model = True
        if not w.has_model:
            # restarted since the master last shipped the model; master resends on hello
            self.log(f"worker {j} missing model iter={iteration}")
            return
        abstraction = worker_step(self.h, vars, self.config.limits)
        compute = 500 + 20 * abstraction.num_states + 200 * len(vars) + self.rng.randint(0, 300)
        self.log(f"worker {j} recv task iter={iteration}")
        if (j, iteration) in self.pending_kills:
            self.pending_kills.discard((j, iteration))
            self.at(compute // 2, "crash", j, w.incarnation)
            return
        self.at(compute, "done", epoch, iteration, j, w.incarnation, abstraction)

    def on_done(self, epoch, iteration, j, incarnation, abstraction):
        w = self.workers[j]
        if not w.alive or w.incarnation != incarnation:
            return
        text = result_message(iteration, j, abstraction.serialize())
        size = len(text.encode())
        self.log(f"worker {j} send result iter={iteration} bytes={size}")
        self.at(self.latency(size), "result", epoch, iteration, j,
                WorkerResult(iteration, j, abstraction), size)

    def on_crash(self, j, incarnation):
        w = self.workers[j]
        if w.incarnation != incarnation or not w.alive:
            return
        w.alive = False
        w.has_model = False
        self.log(f"worker {j} crash")
        self.at(self.faults.worker_restart_delay, "restart", j)

    def on_restart(self, j):
        w = self.workers[j]
        w.alive = True
        w.incarnation += 1
        self.log(f"worker {j} restart")
        self.at(self.latency(16), "hello", j)

    def on_hello(self, j):
        if self.master_alive:
            self.shipped.discard(j)
            self.log(f"master hello worker={j}")

    def on_ckpt(self, r, iteration, data):
        self.replicas[r].put(iteration, data)
        self.log(f"replica{r} store iter={iteration} bytes={len(data)}")

    # -- main loop --------------------------------------------------------
    def run(self) -> RunResult:
        t0 = time.perf_counter()
        self.log(f"start workers={self.n} model={self.model_hash[:16]}")
        self.dispatch()
        handlers = {
            "task": self.on_task, "result": self.on_result, "timeout": self.on_timeout,
            "done": self.on_done, "crash": self.on_crash, "restart": self.on_restart,
            "hello": self.on_hello, "ckpt": self.on_ckpt, "master_restore": self.on_master_restore,
        }
        while self.queue and self.verdict is None:
            t, _, kind, payload = heapq.heappop(self.queue)
            self.now = max(self.now, t)
            handlers[kind](*payload)
        if self.verdict is None:
            self.verdict = Verdict("inconclusive", reason="event queue drained")
        self.stats.wall_time = time.perf_counter() - t0
        return RunResult(self.verdict, self.stats, self.trace, self.state)


def run_simulated(h: LinearHybridAutomaton, n: int, config: RunConfig, faults: FaultPlan | None = None,
                  seed: int | None = None) -> RunResult:
    from dataclasses import replace
    config = replace(config, workers=n, faults=faults if faults is not None else config.faults,
                     seed=config.seed if seed is None else seed, mode="sim")
    config.validate()
    return Simulation(h, config, config.faults, config.seed).run()
