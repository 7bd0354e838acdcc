"""Master-trader-slave task engine with stealing and dependency tracking.

The master never touches payloads: it keeps the advertisement board, brokers
slave requests, and rebroadcasts completions. Traders own their tasks'
payloads and dependency bookkeeping and advertise tasks as they become
runnable; slaves fetch payloads straight from the owning trader. An idle
slave first drains its home trader, then steals from the most loaded board
when that board's pending work is above the steal threshold relative to a
fair share (or unconditionally when nothing at all is running, so the
threshold can never stall the pool).

All actors communicate over FIFO queues; run_serial executes the same
claiming discipline single-threaded on a virtual clock for reproducible
scheduling experiments.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


class DeadlockDetected(RuntimeError):
    """No task is runnable although tasks remain (dependency bug)."""


class TaskFailed(RuntimeError):
    def __init__(self, task_id, cause: BaseException):
        super().__init__(f"task {task_id!r} failed: {cause!r}")
        self.task_id = task_id
        self.cause = cause


class ZeroSpan(ValueError):
    """Trace covers no wall-clock time."""


@dataclass(frozen=True)
class RoleConfig:
    n_traders: int = 1
    n_slaves: int = 4
    steal_threshold: float = 0.5

    def __post_init__(self):
        if self.n_traders < 1 or self.n_slaves < 1:
            raise ValueError("need at least one trader and one slave")
        if self.n_traders > self.n_slaves:
            raise ValueError("n_traders must not exceed n_slaves")


def default_traders(n_slaves: int) -> int:
    return -(-n_slaves // 4)  # ceil(n/4)


@dataclass
class TaskGraph:
    """Tasks plus prerequisite edges (task -> tasks it waits for)."""

    tasks: dict[Any, Any] = field(default_factory=dict)
    deps: dict[Any, frozenset] = field(default_factory=dict)

    def add(self, task_id, payload=None, deps=()) -> None:
        if task_id in self.tasks:
            raise ValueError(f"duplicate task id {task_id!r}")
        self.tasks[task_id] = payload
        self.deps[task_id] = frozenset(deps)

    def work(self, task_id) -> float:
        payload = self.tasks[task_id]
        return float(getattr(payload, "work_estimate", 1.0) or 1.0)

    def validate(self) -> None:
        for t, ds in self.deps.items():
            for d in ds:
                if d not in self.tasks:
                    raise ValueError(f"task {t!r} depends on unknown task {d!r}")
        # Kahn peel; leftovers mean a cycle
        remaining = {t: set(ds) for t, ds in self.deps.items()}
        ready = [t for t, ds in remaining.items() if not ds]
        dependents: dict[Any, list] = {t: [] for t in self.tasks}
        for t, ds in self.deps.items():
            for d in ds:
                dependents[d].append(t)
        seen = 0
        while ready:
            t = ready.pop()
            seen += 1
            for u in dependents[t]:
                remaining[u].discard(t)
                if not remaining[u]:
                    ready.append(u)
        if seen != len(self.tasks):
            raise DeadlockDetected("dependency graph contains a cycle")


@dataclass(frozen=True)
class TraceEvent:
    t_us: int
    slave: int
    trader: int
    task: Any
    event: str  # "claim" | "complete"


@dataclass
class TaskTrace:
    n_slaves: int
    events: list[TraceEvent] = field(default_factory=list)
    span_us: int = 0

    def intervals(self) -> dict[int, list[tuple[int, int, Any]]]:
        claims: dict[tuple[int, Any], int] = {}
        out: dict[int, list[tuple[int, int, Any]]] = {
            s: [] for s in range(self.n_slaves)
        }
        for ev in sorted(self.events, key=lambda e: (e.t_us, e.event != "claim")):
            if ev.event == "claim":
                claims[(ev.slave, ev.task)] = ev.t_us
            else:
                t0 = claims.pop((ev.slave, ev.task))
                out[ev.slave].append((t0, ev.t_us, ev.task))
        return out

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(
                {
                    "t_us": ev.t_us,
                    "slave": ev.slave,
                    "trader": ev.trader,
                    "task": ev.task,
                    "event": ev.event,
                }
            )
            for ev in self.events
        )

    @classmethod
    def from_jsonl(cls, text: str, n_slaves: int) -> "TaskTrace":
        events = []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            events.append(
                TraceEvent(d["t_us"], d["slave"], d["trader"], d["task"], d["event"])
            )
        span = max((e.t_us for e in events), default=0)
        return cls(n_slaves=n_slaves, events=events, span_us=span)


def busy_fraction(trace: TaskTrace) -> float:
    """Mean over slaves of busy time divided by the wall-clock span."""
    if trace.span_us <= 0:
        raise ZeroSpan("trace has zero span")
    per_slave = []
    for s, iv in trace.intervals().items():
        per_slave.append(sum(t1 - t0 for t0, t1, _ in iv) / trace.span_us)
    return sum(per_slave) / trace.n_slaves


def assign_to_traders(
    tree, graph: TaskGraph, n_traders: int
) -> dict[int, list]:
    """Longest-processing-time assignment of tasks to traders.

    Tasks are already contiguous chunks of the partition tree, so handing
    whole tasks out keeps every trader's region set contiguous per task;
    LPT keeps the trader work totals within one task's work of each other.
    The tree argument is accepted for callers that want to key ordering off
    it; assignment itself only needs the per-task work.
    """
    if n_traders < 1:
        raise ValueError("n_traders must be >= 1")
    order = sorted(graph.tasks, key=lambda t: (-graph.work(t), str(t)))
    loads = [0.0] * n_traders
    out: dict[int, list] = {i: [] for i in range(n_traders)}
    for t in order:
        tid = min(range(n_traders), key=lambda i: (loads[i], i))
        out[tid].append(t)
        loads[tid] += graph.work(t)
    return out


def _pick_assignment(
    home: int,
    boards: dict[int, list],
    board_work: dict[int, float],
    inflight: int,
    steal_threshold: float,
):
    """Shared claiming rule: home queue first, then thresholded stealing."""
    if boards[home]:
        return home, boards[home][0]
    candidates = [t for t, b in boards.items() if b]
    if not candidates:
        return None
    total = sum(board_work[t] for t in candidates)
    fair = total / max(len(boards), 1)
    victim = max(candidates, key=lambda t: (board_work[t], -t))
    if board_work[victim] > steal_threshold * fair or inflight == 0:
        return victim, boards[victim][0]
    return None


def run(
    graph: TaskGraph,
    roles: RoleConfig,
    executor: Callable[[Any], Any],
) -> tuple[dict, TaskTrace]:
    """Execute the graph on a threaded worker pool; returns (results, trace).

    Every task runs exactly once, only after its prerequisites completed.
    Raises DeadlockDetected when nothing is runnable while tasks remain and
    TaskFailed (after draining in-flight work) when the executor raises.
    """
    graph.validate()
    if not graph.tasks:
        return {}, TaskTrace(n_slaves=roles.n_slaves, events=[], span_us=0)

    assignment = assign_to_traders(None, graph, roles.n_traders)
    owner_of = {t: tr for tr, ts in assignment.items() for t in ts}
    master_q: queue.Queue = queue.Queue()
    trader_qs = [queue.Queue() for _ in range(roles.n_traders)]
    slave_qs = [queue.Queue() for _ in range(roles.n_slaves)]
    t0_ns = time.perf_counter_ns()

    def now_us() -> int:
        return (time.perf_counter_ns() - t0_ns) // 1000

    def trader_loop(tid: int):
        own = assignment[tid]
        pending = {t: set(graph.deps[t]) for t in own}
        waiting_on: dict[Any, list] = {}
        for t in own:
            for d in pending[t]:
                waiting_on.setdefault(d, []).append(t)
        results: dict[Any, Any] = {}
        for t in sorted((t for t in own if not pending[t]), key=str):
            master_q.put(("advertise", tid, t, graph.work(t)))
        while True:
            msg = trader_qs[tid].get()
            kind = msg[0]
            if kind == "completed":
                done = msg[1]
                for t in waiting_on.pop(done, []):
                    pending[t].discard(done)
                    if not pending[t]:
                        master_q.put(("advertise", tid, t, graph.work(t)))
            elif kind == "fetch":
                _, task, sid = msg
                slave_qs[sid].put(("payload", task, graph.tasks[task]))
            elif kind == "result":
                _, task, sid, t_claim, t_done, value, error = msg
                if error is None:
                    results[task] = value
                master_q.put(("task_done", tid, task, sid, t_claim, t_done, error))
            elif kind == "probe":
                master_q.put(("probe_ack", tid, msg[1]))
            elif kind == "shutdown":
                master_q.put(("results", tid, results))
                return

    def slave_loop(sid: int):
        while True:
            master_q.put(("request", sid))
            msg = slave_qs[sid].get()
            if msg[0] == "shutdown":
                return
            _, task, tid = msg
            t_claim = now_us()
            trader_qs[tid].put(("fetch", task, sid))
            _, _, payload = slave_qs[sid].get()
            error = None
            value = None
            try:
                value = executor(payload)
            except BaseException as exc:  # noqa: BLE001 - reported to master
                error = exc
            t_done = now_us()
            trader_qs[tid].put(("result", task, sid, t_claim, t_done, value, error))

    threads = [
        threading.Thread(target=trader_loop, args=(i,), daemon=True)
        for i in range(roles.n_traders)
    ] + [
        threading.Thread(target=slave_loop, args=(i,), daemon=True)
        for i in range(roles.n_slaves)
    ]
    for th in threads:
        th.start()

    boards: dict[int, list] = {i: [] for i in range(roles.n_traders)}
    board_entry: dict[Any, tuple[int, float]] = {}
    board_work = {i: 0.0 for i in range(roles.n_traders)}
    home_of = {s: s % roles.n_traders for s in range(roles.n_slaves)}
    waiting_slaves: list[int] = []
    inflight = 0
    completed = 0
    total = len(graph.tasks)
    failure: Optional[TaskFailed] = None
    events: list[TraceEvent] = []
    probe_seq = 0
    probe_acks_due = 0
    results: dict[Any, Any] = {}
    results_due = 0
    span_us = 0

    def try_assign():
        nonlocal inflight
        if failure is not None:
            return
        progressed = True
        while progressed and waiting_slaves:
            progressed = False
            for idx, sid in enumerate(list(waiting_slaves)):
                pick = _pick_assignment(
                    home_of[sid], boards, board_work, inflight, roles.steal_threshold
                )
                if pick is None:
                    continue
                tid, task = pick
                boards[tid].remove(task)
                board_work[tid] -= board_entry.pop(task)[1]
                waiting_slaves.remove(sid)
                inflight += 1
                slave_qs[sid].put(("assign", task, tid))
                progressed = True
                break

    def finished() -> bool:
        if failure is not None:
            return inflight == 0
        return completed == total

    while True:
        msg = master_q.get()
        kind = msg[0]
        if kind == "advertise":
            _, tid, task, work = msg
            boards[tid].append(task)
            board_entry[task] = (tid, work)
            board_work[tid] += work
            probe_acks_due = 0
            try_assign()
        elif kind == "request":
            waiting_slaves.append(msg[1])
            try_assign()
        elif kind == "task_done":
            _, tid, task, sid, t_claim, t_done, error = msg
            inflight -= 1
            completed += 1
            span_us = max(span_us, t_done)
            events.append(TraceEvent(t_claim, sid, tid, task, "claim"))
            events.append(TraceEvent(t_done, sid, tid, task, "complete"))
            probe_acks_due = 0
            if error is not None and failure is None:
                failure = TaskFailed(task, error)
            for q in trader_qs:
                q.put(("completed", task))
            try_assign()
        elif kind == "probe_ack":
            _, tid, seq = msg
            if seq == probe_seq and probe_acks_due > 0:
                probe_acks_due -= 1
                if probe_acks_due == 0:
                    deadlocked = (
                        failure is None
                        and completed < total
                        and inflight == 0
                        and not any(boards.values())
                        and len(waiting_slaves) == roles.n_slaves
                    )
                    if deadlocked:
                        failure = None
                        for sid in waiting_slaves:
                            slave_qs[sid].put(("shutdown",))
                        for q in trader_qs:
                            q.put(("shutdown",))
                        raise DeadlockDetected(
                            f"{total - completed} tasks remain but none are runnable"
                        )
        elif kind == "results":
            _, tid, part = msg
            results.update(part)
            results_due -= 1
            if results_due == 0:
                break
        if finished() and results_due == 0:
            for sid in range(roles.n_slaves):
                slave_qs[sid].put(("shutdown",))
            for q in trader_qs:
                q.put(("shutdown",))
            results_due = roles.n_traders
        elif (
            failure is None
            and completed < total
            and inflight == 0
            and not any(boards.values())
            and len(waiting_slaves) == roles.n_slaves
            and probe_acks_due == 0
            and kind not in ("probe_ack", "results")
        ):
            probe_seq += 1
            probe_acks_due = roles.n_traders
            for q in trader_qs:
                q.put(("probe", probe_seq))

    for th in threads:
        th.join(timeout=5.0)
    trace = TaskTrace(n_slaves=roles.n_slaves, events=sorted(events, key=lambda e: e.t_us), span_us=span_us)
    if failure is not None:
        raise failure
    return results, trace


def run_serial(
    graph: TaskGraph,
    roles: RoleConfig,
    executor: Callable[[Any], Any],
    duration: Optional[Callable[[Any, Any], float]] = None,
) -> tuple[dict, TaskTrace]:
    """Deterministic single-threaded execution on a virtual clock.

    Claiming follows the same home-then-steal rule as the threaded engine;
    each task occupies its slave for duration(task, payload) virtual
    microseconds (the task's work estimate by default). Two calls with the
    same inputs produce identical traces.
    """
    graph.validate()
    if not graph.tasks:
        return {}, TaskTrace(n_slaves=roles.n_slaves, events=[], span_us=0)
    if duration is None:
        duration = lambda t, payload: graph.work(t)

    assignment = assign_to_traders(None, graph, roles.n_traders)
    boards: dict[int, list] = {i: [] for i in range(roles.n_traders)}
    board_work = {i: 0.0 for i in range(roles.n_traders)}
    owner_of = {t: tr for tr, ts in assignment.items() for t in ts}
    pending = {t: set(ds) for t, ds in graph.deps.items()}
    home_of = {s: s % roles.n_traders for s in range(roles.n_slaves)}

    def advertise(task):
        tid = owner_of[task]
        boards[tid].append(task)
        boards[tid].sort(key=str)
        board_work[tid] += graph.work(task)

    for t in sorted(graph.tasks, key=str):
        if not pending[t]:
            advertise(t)

    idle = list(range(roles.n_slaves))
    running: list[tuple[float, int, Any, int, float]] = []  # (t_end, slave, task, trader, t_start)
    clock = 0.0
    events: list[TraceEvent] = []
    results: dict[Any, Any] = {}
    completed = 0
    failure: Optional[TaskFailed] = None

    while completed < len(graph.tasks):
        # hand out everything assignable at the current instant
        progressed = True
        while progressed and idle and failure is None:
            progressed = False
            for sid in sorted(idle):
                pick = _pick_assignment(
                    home_of[sid], boards, board_work, len(running), roles.steal_threshold
                )
                if pick is None:
                    continue
                tid, task = pick
                boards[tid].remove(task)
                board_work[tid] -= graph.work(task)
                idle.remove(sid)
                try:
                    results[task] = executor(graph.tasks[task])
                except BaseException as exc:  # noqa: BLE001
                    if failure is None:
                        failure = TaskFailed(task, exc)
                d = float(duration(task, graph.tasks[task]))
                events.append(TraceEvent(int(round(clock)), sid, tid, task, "claim"))
                running.append((clock + d, sid, task, tid, clock))
                progressed = True
                break
        if not running:
            if failure is not None:
                raise failure
            raise DeadlockDetected(
                f"{len(graph.tasks) - completed} tasks remain but none are runnable"
            )
        running.sort(key=lambda r: (r[0], r[1]))
        t_end, sid, task, tid, _ = running.pop(0)
        clock = t_end
        completed += 1
        idle.append(sid)
        events.append(TraceEvent(int(round(clock)), sid, tid, task, "complete"))
        for u, ds in pending.items():
            if task in ds:
                ds.discard(task)
                if not ds and u != task:
                    advertise(u)
    if failure is not None:
        raise failure
    trace = TaskTrace(
        n_slaves=roles.n_slaves, events=events, span_us=int(round(clock))
    )
    return results, trace
