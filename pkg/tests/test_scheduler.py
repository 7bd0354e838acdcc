import time

import numpy as np
import pytest

from steerflow.scheduler import (
    DeadlockDetected,
    RoleConfig,
    TaskFailed,
    TaskGraph,
    TaskTrace,
    TraceEvent,
    ZeroSpan,
    assign_to_traders,
    busy_fraction,
    run,
    run_serial,
)


def graph_of(n, deps=None):
    g = TaskGraph()
    for i in range(n):
        g.add(i, payload=i, deps=(deps or {}).get(i, ()))
    return g


def random_dag(rng, n=24, p=0.15):
    g = TaskGraph()
    for i in range(n):
        deps = [j for j in range(i) if rng.random() < p]
        g.add(i, payload=i, deps=deps)
    return g


class TestRoles:
    def test_bounds(self):
        with pytest.raises(ValueError):
            RoleConfig(n_traders=0, n_slaves=1)
        with pytest.raises(ValueError):
            RoleConfig(n_traders=3, n_slaves=2)


class TestBusyFraction:
    def test_fully_busy_single_slave(self):
        tr = TaskTrace(
            n_slaves=1,
            events=[TraceEvent(0, 0, 0, "a", "claim"), TraceEvent(100, 0, 0, "a", "complete")],
            span_us=100,
        )
        assert busy_fraction(tr) == 1.0

    def test_half_busy_plus_idle_slave(self):
        tr = TaskTrace(
            n_slaves=2,
            events=[TraceEvent(0, 0, 0, "a", "claim"), TraceEvent(50, 0, 0, "a", "complete")],
            span_us=100,
        )
        assert busy_fraction(tr) == 0.25

    def test_zero_span_raises(self):
        with pytest.raises(ZeroSpan):
            busy_fraction(TaskTrace(n_slaves=1, events=[], span_us=0))

    def test_replay_from_jsonl(self):
        g = graph_of(10)
        roles = RoleConfig(n_traders=2, n_slaves=4)
        _, trace = run_serial(g, roles, executor=lambda p: p)
        replayed = TaskTrace.from_jsonl(trace.to_jsonl(), n_slaves=4)
        assert busy_fraction(replayed) == pytest.approx(busy_fraction(trace))


class TestAssign:
    def test_single_trader_gets_all(self):
        g = graph_of(7)
        out = assign_to_traders(None, g, 1)
        assert sorted(out[0]) == list(range(7))

    def test_equal_tasks_split_evenly(self):
        g = graph_of(4)
        out = assign_to_traders(None, g, 2)
        assert len(out[0]) == 2 and len(out[1]) == 2

    def test_matches_independent_lpt(self):
        rng = np.random.default_rng(5)
        works = rng.integers(1, 100, size=17)
        g = TaskGraph()
        for i, w in enumerate(works):

            class P:
                pass

            p = P()
            p.work_estimate = float(w)
            g.add(i, payload=p)
        out = assign_to_traders(None, g, 3)
        loads = [sum(works[t] for t in ts) for ts in out.values()]

        # oracle: textbook LPT reimplementation
        order = sorted(range(17), key=lambda i: (-works[i], str(i)))
        oracle = [0.0, 0.0, 0.0]
        for i in order:
            k = oracle.index(min(oracle))
            oracle[k] += works[i]
        assert max(loads) <= max(oracle)


class TestRun:
    def test_empty_graph(self):
        results, trace = run(TaskGraph(), RoleConfig(1, 2), executor=lambda p: p)
        assert results == {}
        assert trace.span_us == 0

    def test_linear_chain_completion_order(self):
        g = graph_of(3, deps={1: (0,), 2: (1,)})
        results, trace = run(g, RoleConfig(1, 3), executor=lambda p: p * 10)
        assert results == {0: 0, 1: 10, 2: 20}
        completes = [e for e in trace.events if e.event == "complete"]
        assert [e.task for e in sorted(completes, key=lambda e: e.t_us)] == [0, 1, 2]

    def test_busy_fraction_with_sleepy_tasks(self):
        g = graph_of(64)
        results, trace = run(
            g, RoleConfig(n_traders=1, n_slaves=4), executor=lambda p: time.sleep(0.008) or p
        )
        serial_results, _ = run_serial(g, RoleConfig(1, 4), executor=lambda p: p)
        assert results == serial_results
        assert busy_fraction(trace) >= 0.9

    @pytest.mark.parametrize("seed", range(5))
    def test_happens_before_on_random_dags(self, seed):
        rng = np.random.default_rng(seed)
        g = random_dag(rng)
        _, trace = run(g, RoleConfig(n_traders=2, n_slaves=4), executor=lambda p: p)
        claim = {e.task: e.t_us for e in trace.events if e.event == "claim"}
        complete = {e.task: e.t_us for e in trace.events if e.event == "complete"}
        assert set(claim) == set(g.tasks)
        for t, ds in g.deps.items():
            for d in ds:
                assert complete[d] <= claim[t]

    def test_each_task_runs_exactly_once(self):
        calls = []
        g = graph_of(20)
        run(g, RoleConfig(2, 4), executor=lambda p: calls.append(p))
        assert sorted(calls) == list(range(20))

    def test_executor_failure_propagates_after_drain(self):
        g = graph_of(8)

        def exe(p):
            if p == 3:
                raise ValueError("boom")
            time.sleep(0.002)
            return p

        with pytest.raises(TaskFailed) as ei:
            run(g, RoleConfig(1, 2), executor=exe)
        assert ei.value.task_id == 3

    def test_cycle_raises_deadlock(self):
        g = TaskGraph()
        g.add("a", deps=("b",))
        g.add("b", deps=("a",))
        with pytest.raises(DeadlockDetected):
            run(g, RoleConfig(1, 2), executor=lambda p: p)

    def test_unknown_dep_rejected(self):
        g = TaskGraph()
        g.add("a", deps=("ghost",))
        with pytest.raises(ValueError):
            run(g, RoleConfig(1, 1), executor=lambda p: p)

    def test_results_independent_of_roles(self):
        rng = np.random.default_rng(9)
        g = random_dag(rng, n=30)
        expected, _ = run_serial(g, RoleConfig(1, 1), executor=lambda p: p * p)
        for roles in (RoleConfig(1, 2), RoleConfig(2, 4), RoleConfig(3, 5)):
            got, _ = run(g, roles, executor=lambda p: p * p)
            assert got == expected


class TestSerialMode:
    def test_replays_identically(self):
        rng = np.random.default_rng(2)
        g = random_dag(rng, n=40)
        roles = RoleConfig(n_traders=2, n_slaves=4)
        r1, t1 = run_serial(g, roles, executor=lambda p: p + 1)
        r2, t2 = run_serial(g, roles, executor=lambda p: p + 1)
        assert r1 == r2
        assert t1.events == t2.events
        assert t1.span_us == t2.span_us

    def test_respects_dependencies(self):
        g = graph_of(3, deps={2: (0, 1)})
        _, trace = run_serial(g, RoleConfig(1, 2), executor=lambda p: p)
        claim = {e.task: e.t_us for e in trace.events if e.event == "claim"}
        complete = {e.task: e.t_us for e in trace.events if e.event == "complete"}
        assert complete[0] <= claim[2] and complete[1] <= claim[2]

    def test_cycle_raises(self):
        g = TaskGraph()
        g.add(0, deps=(1,))
        g.add(1, deps=(0,))
        with pytest.raises(DeadlockDetected):
            run_serial(g, RoleConfig(1, 1), executor=lambda p: p)

    def test_balanced_tasks_beat_skewed_tasks(self):
        # same total work, one layout has a dominating chunk
        balanced = TaskGraph()
        skewed = TaskGraph()

        class P:
            def __init__(self, w):
                self.work_estimate = w

        for i in range(8):
            balanced.add(i, payload=P(10.0))
        skewed.add(0, payload=P(73.0))
        for i in range(1, 8):
            skewed.add(i, payload=P(1.0))
        roles = RoleConfig(n_traders=2, n_slaves=4)
        _, tb = run_serial(balanced, roles, executor=lambda p: None)
        _, ts = run_serial(skewed, roles, executor=lambda p: None)
        assert busy_fraction(tb) >= busy_fraction(ts)
