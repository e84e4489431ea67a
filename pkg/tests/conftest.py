"""Shared builders for the test suite."""

from __future__ import annotations

import random

import pytest

from waasim.cloud import CloudConfig, VmType
from waasim.estimator import EstimatorConfig
from waasim.workflow import TaskRecord, WorkflowSpec, WorkloadSpec, _assemble


def build_workflow(task_rows, budget=1.0, arrival=0.0, wid="wf") -> WorkflowSpec:
    """task_rows: (id, kind, runtime, parent ids)."""
    tasks = [
        TaskRecord(id=tid, kind=kind, reference_runtime=runtime,
                   parents=frozenset(parents))
        for tid, kind, runtime, parents in task_rows
    ]
    return _assemble(wid, tasks, budget, arrival)


def chain_workflow(runtimes, budget=1.0, wid="chain") -> WorkflowSpec:
    rows = []
    prev = None
    for i, runtime in enumerate(runtimes):
        tid = f"t{i}"
        rows.append((tid, tid, runtime, [prev] if prev else []))
        prev = tid
    return build_workflow(rows, budget=budget, wid=wid)


def diamond_workflow(budget=1.0, wid="diamond") -> WorkflowSpec:
    return build_workflow([
        ("a", "a", 10.0, []),
        ("b", "b", 5.0, ["a"]),
        ("c", "c", 20.0, ["a"]),
        ("d", "d", 1.0, ["b", "c"]),
    ], budget=budget, wid=wid)


def random_dag(rng: random.Random, max_tasks: int = 12, wid="rand") -> WorkflowSpec:
    """Random DAG with edges only from lower to higher indices."""
    n = rng.randint(1, max_tasks)
    rows = []
    for i in range(n):
        parents = [f"t{j}" for j in range(i) if rng.random() < 0.35]
        rows.append((f"t{i}", f"k{rng.randint(0, 3)}", rng.randint(1, 300) * 1.0, parents))
    return build_workflow(rows, budget=rng.random(), wid=wid)


def single_workload(spec: WorkflowSpec, arrival=0.0) -> WorkloadSpec:
    wf = spec.copy()
    wf.arrival_time = arrival
    return WorkloadSpec(workflows=[wf], arrival_rate=1.0, seed=0)


MICRO = VmType("t2.micro", 1, 1024, 0.0000041, 1.0)
LARGE = VmType("t2.large", 2, 8192, 0.0000382, 2.0)


@pytest.fixture
def mono_cloud() -> CloudConfig:
    return CloudConfig(catalog=(MICRO,), provisioning_delay=0.0,
                       deprovisioning_delay=0.0, idle_threshold=60.0,
                       scan_interval=10.0)


@pytest.fixture
def oracle() -> EstimatorConfig:
    return EstimatorConfig(mode="oracle")
