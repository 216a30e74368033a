"""Real parallel transport: one OS process per worker, pipes for messages.

Workers receive the model text once (and again after a restart) and
afterwards only ``(iteration, worker, vars)`` tasks; they answer with the
serialized abstraction.  The master barriers on all results of a round, up
to ``config.iteration_timeout`` seconds, and treats silent or dead workers as
missing.  Fault plans are honoured by killing the worker process right after
its task is sent (worker kills) or by discarding the master state and
restoring it from the shadow stores (master crash).
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import time
from multiprocessing.connection import wait

from .automata import FiniteAbstraction
from .ce import Analyzer
from .checkpoint import CheckpointWriter, DirectoryStore, MemoryStore, latest_state
from .lha import LinearHybridAutomaton, parse_lha, write_lha
from .reach import EngineLimits
from .runtime import (MISSING, Continue, RunConfig, RunResult, RunStats,
                      Verdict, WorkerResult, initial_state, master_iteration,
                      record, verdict_of, worker_step)

log = logging.getLogger(__name__)


def _worker_main(conn, limits: EngineLimits):
    model = None
    while True:
        try:
            msg = conn.recv()
        except EOFError:
            return
        kind = msg[0]
        if kind == "stop":
            return
        if kind == "model":
            model = parse_lha(msg[1])
        elif kind == "task":
            _, iteration, j, vars = msg
            abstraction = worker_step(model, frozenset(vars), limits)
            conn.send(("result", iteration, j, abstraction.serialize()))


class _Pool:
    def __init__(self, n: int, model_text: str, limits: EngineLimits):
        try:
            self.ctx = mp.get_context("fork")
        except ValueError:
            self.ctx = mp.get_context("spawn")
        self.model_text = model_text
        self.limits = limits
        self.procs: list = [None] * n
        self.conns: list = [None] * n
        self.model_bytes = 0
        for j in range(n):
            self.start(j)

    def start(self, j: int):
        parent, child = self.ctx.Pipe()
        p = self.ctx.Process(target=_worker_main, args=(child, self.limits), daemon=True)
        p.start()
        child.close()
        parent.send(("model", self.model_text))
        self.model_bytes += len(self.model_text.encode())
        self.procs[j], self.conns[j] = p, parent

    def alive(self, j: int) -> bool:
        return self.procs[j] is not None and self.procs[j].is_alive()

    def kill(self, j: int):
        p = self.procs[j]
        if p is not None:
            p.kill()
            p.join()
            self.conns[j].close()
        self.procs[j] = self.conns[j] = None

    def close(self):
        for j, c in enumerate(self.conns):
            if c is not None:
                try:
                    c.send(("stop",))
                except OSError:
                    pass
        for p in self.procs:
            if p is not None:
                p.join(timeout=5)
                if p.is_alive():
                    p.kill()


def run_parallel(h: LinearHybridAutomaton, config: RunConfig) -> RunResult:
    n = config.workers
    stores = [DirectoryStore(d) for d in config.checkpoint_dirs] or [MemoryStore("shadow")]
    writer = CheckpointWriter(stores)
    pool = _Pool(n, write_lha(h), config.limits)
    stats = RunStats()
    analyzer = Analyzer(h)
    state = initial_state(h, config)
    kills = set(config.faults.worker_kills)
    master_crash = config.faults.master_crash
    t0 = time.perf_counter()
    verdict = None
    try:
        while verdict is None:
            if state.iteration >= config.max_iterations:
                verdict = Verdict("inconclusive", reason=f"iteration limit {config.max_iterations} reached")
                break
            started = time.perf_counter()
            i = state.iteration
            for j in range(n):
                if not pool.alive(j):
                    pool.start(j)
                pool.conns[j].send(("task", i, j, tuple(sorted(state.assignments[j]))))
            for j in range(n):
                if (j, i) in kills:
                    kills.discard((j, i))
                    pool.kill(j)
            results = _collect(pool, n, i, config.iteration_timeout)
            if master_crash == i:
                master_crash = None
                writer.flush()
                restored = latest_state(stores)
                state = restored or initial_state(h, config)
                analyzer = Analyzer(h)
                stats.restores += 1
                log.info("master crashed in iteration %d; restored iteration %d", i, state.iteration)
                continue
            missing = [j for j, r in enumerate(results) if r is MISSING]
            before = analyzer.calls
            decision = master_iteration(state, results, h, analyzer, timeout=config.select_timeout)
            stats.analyses += analyzer.calls - before
            record(stats, state, decision, missing, started)
            verdict = verdict_of(decision)
            if verdict is None:
                assert isinstance(decision, Continue)
                state = decision.state
                writer.submit(state)
    finally:
        pool.close()
        writer.close()
    stats.model_bytes = pool.model_bytes
    stats.wall_time = time.perf_counter() - t0
    return RunResult(verdict, stats, [], state)


def _collect(pool: _Pool, n: int, iteration: int, timeout: float) -> list:
    results: list = [MISSING] * n
    waiting = {pool.conns[j]: j for j in range(n) if pool.conns[j] is not None}
    deadline = time.monotonic() + timeout
    while waiting:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        for conn in wait(list(waiting), timeout=remaining):
            j = waiting[conn]
            try:
                msg = conn.recv()
            except (EOFError, OSError):
                del waiting[conn]
                pool.kill(j)
                continue
            _, it, wj, text = msg
            if it != iteration:
                continue  # stale answer from an earlier round
            results[j] = WorkerResult(it, wj, FiniteAbstraction.deserialize(text))
            del waiting[conn]
    for conn, j in waiting.items():
        log.warning("worker %d missed the deadline of iteration %d", j, iteration)
        pool.kill(j)
    return results
