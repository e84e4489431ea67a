"""Workflow DAG model: validation, canonical JSON format, levels, templates
and seeded multi-workflow workload generation."""

from __future__ import annotations

import copy
import hashlib
import json
import random
from dataclasses import dataclass

from .errors import CycleError, DanglingRefError, SchemaError

TASK_STATES = ("pending", "ready", "queued", "scheduled", "running", "completed")

GENOME_KINDS = ("individuals", "sifting", "individuals_merge", "mutations_overlap", "frequency")

# Synthetic desk-scale reference runtimes (seconds on the speed-1.0 VM type).
# No published per-task runtimes exist for these applications; values are
# chosen so default-budget runs exercise the full VM-type range.
GENOME_RUNTIMES = {
    "individuals": 150.0,
    "sifting": 180.0,
    "individuals_merge": 3000.0,
    "mutations_overlap": 600.0,
    "frequency": 720.0,
}
VINA01_RUNTIMES = (1800.0, 300.0, 300.0, 240.0, 240.0, 180.0, 120.0)
VINA02_RUNTIMES = (1200.0, 240.0, 180.0, 180.0, 120.0, 120.0, 60.0)


@dataclass
class TaskRecord:
    """One workflow node with static attributes and a lifecycle state."""

    id: str
    kind: str
    reference_runtime: float
    parents: frozenset[str] = frozenset()
    children: frozenset[str] = frozenset()
    level: int = 0
    transfer_time: float = 0.0
    state: str = "pending"

    @property
    def total_runtime(self) -> float:
        """Reference runtime plus any explicit data-transfer overhead."""
        return self.reference_runtime + self.transfer_time

    def advance(self, new_state: str) -> None:
        """Move to a later lifecycle state; transitions are monotone."""
        if TASK_STATES.index(new_state) < TASK_STATES.index(self.state):
            raise ValueError(f"task {self.id}: cannot move {self.state} -> {new_state}")
        self.state = new_state


@dataclass
class WorkflowSpec:
    """A validated DAG of tasks with a user budget and arrival time."""

    id: str
    tasks: dict[str, TaskRecord]
    budget: float
    arrival_time: float = 0.0

    def entry_ids(self) -> list[str]:
        return [t.id for t in self.tasks.values() if not t.parents]

    def exit_ids(self) -> list[str]:
        return [t.id for t in self.tasks.values() if not t.children]

    def copy(self) -> "WorkflowSpec":
        return copy.deepcopy(self)


@dataclass
class WorkloadSpec:
    """An ordered stream of workflows plus the parameters that produced it."""

    workflows: list[WorkflowSpec]
    arrival_rate: float
    seed: int = 0

    def total_tasks(self) -> int:
        return sum(len(w.tasks) for w in self.workflows)


def _assemble(workflow_id: str, tasks: list[TaskRecord], budget: float,
              arrival_time: float) -> WorkflowSpec:
    """Derive children, validate every invariant and compute levels."""
    if not tasks:
        raise SchemaError(f"workflow {workflow_id!r}: tasks must be non-empty")
    if budget < 0:
        raise SchemaError(f"workflow {workflow_id!r}: budget must be >= 0")
    if arrival_time < 0:
        raise SchemaError(f"workflow {workflow_id!r}: arrival_time must be >= 0")

    by_id: dict[str, TaskRecord] = {}
    for task in tasks:
        if task.id in by_id:
            raise SchemaError(f"workflow {workflow_id!r}: duplicate task id {task.id!r}")
        if task.reference_runtime <= 0:
            raise SchemaError(f"task {task.id!r}: runtime must be > 0")
        if task.transfer_time < 0:
            raise SchemaError(f"task {task.id!r}: transfer must be >= 0")
        by_id[task.id] = task

    children: dict[str, set[str]] = {tid: set() for tid in by_id}
    for task in tasks:
        for parent in task.parents:
            if parent not in by_id:
                raise DanglingRefError(f"task {task.id!r}: unknown parent {parent!r}")
            children[parent].add(task.id)
    for task in tasks:
        task.children = frozenset(children[task.id])

    spec = WorkflowSpec(
        id=workflow_id,
        tasks={tid: by_id[tid] for tid in sorted(by_id)},
        budget=budget,
        arrival_time=arrival_time,
    )
    for tid, level in compute_levels(spec).items():
        spec.tasks[tid].level = level
    return spec


def compute_levels(spec: WorkflowSpec) -> dict[str, int]:
    """Longest-path-from-entry level for each task (entry tasks are level 0)."""
    indegree = {tid: len(t.parents) for tid, t in spec.tasks.items()}
    levels = {tid: 0 for tid, d in indegree.items() if d == 0}
    frontier = sorted(levels)
    seen = len(frontier)
    while frontier:
        nxt: list[str] = []
        for tid in frontier:
            for child in spec.tasks[tid].children:
                levels[child] = max(levels.get(child, 0), levels[tid] + 1)
                indegree[child] -= 1
                if indegree[child] == 0:
                    nxt.append(child)
                    seen += 1
        frontier = sorted(nxt)
    if seen != len(spec.tasks):
        raise CycleError(f"workflow {spec.id!r}: task graph contains a cycle")
    return levels


def validate_workflow(spec: WorkflowSpec) -> None:
    """Re-check all invariants on an existing spec (used by the CLI)."""
    rebuilt = _assemble(spec.id, [copy.deepcopy(t) for t in spec.tasks.values()],
                        spec.budget, spec.arrival_time)
    for tid, task in spec.tasks.items():
        if task.children != rebuilt.tasks[tid].children:
            raise SchemaError(f"task {tid!r}: parent/child links are inconsistent")


def workflow_from_dict(doc: dict) -> WorkflowSpec:
    if not isinstance(doc, dict):
        raise SchemaError("workflow document must be a JSON object")
    for key in ("id", "budget", "tasks"):
        if key not in doc:
            raise SchemaError(f"workflow document: missing field {key!r}")
    if not isinstance(doc["tasks"], list):
        raise SchemaError("workflow document: 'tasks' must be a list")
    tasks = []
    for i, entry in enumerate(doc["tasks"]):
        if not isinstance(entry, dict):
            raise SchemaError(f"tasks[{i}]: must be an object")
        for key in ("id", "kind", "runtime"):
            if key not in entry:
                raise SchemaError(f"tasks[{i}]: missing field {key!r}")
        tasks.append(TaskRecord(
            id=str(entry["id"]),
            kind=str(entry["kind"]),
            reference_runtime=float(entry["runtime"]),
            parents=frozenset(str(p) for p in entry.get("parents", [])),
            transfer_time=float(entry.get("transfer", 0.0)),
        ))
    return _assemble(str(doc["id"]), tasks, float(doc["budget"]),
                     float(doc.get("arrival_time", 0.0)))


def parse_workflow(text: str) -> WorkflowSpec:
    """Parse and fully validate a canonical workflow JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return workflow_from_dict(doc)


def workflow_to_dict(spec: WorkflowSpec, with_arrival: bool = False) -> dict:
    doc: dict = {"id": spec.id, "budget": spec.budget}
    if with_arrival:
        doc["arrival_time"] = spec.arrival_time
    doc["tasks"] = []
    for tid in sorted(spec.tasks):
        task = spec.tasks[tid]
        entry: dict = {
            "id": task.id,
            "kind": task.kind,
            "runtime": task.reference_runtime,
            "parents": sorted(task.parents),
        }
        if task.transfer_time:
            entry["transfer"] = task.transfer_time
        doc["tasks"].append(entry)
    return doc


def serialize_workflow(spec: WorkflowSpec) -> str:
    return json.dumps(workflow_to_dict(spec), indent=2) + "\n"


def workload_from_dict(doc: dict) -> WorkloadSpec:
    for key in ("arrival_rate", "workflows"):
        if key not in doc:
            raise SchemaError(f"workload document: missing field {key!r}")
    workflows = [workflow_from_dict(w) for w in doc["workflows"]]
    arrivals = [w.arrival_time for w in workflows]
    if any(b < a for a, b in zip(arrivals, arrivals[1:])):
        raise SchemaError("workload document: arrival_time must be non-decreasing")
    return WorkloadSpec(workflows=workflows, arrival_rate=float(doc["arrival_rate"]),
                        seed=int(doc.get("seed", 0)))


def parse_workload(text: str) -> WorkloadSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return workload_from_dict(doc)


def workload_to_dict(workload: WorkloadSpec) -> dict:
    return {
        "arrival_rate": workload.arrival_rate,
        "seed": workload.seed,
        "workflows": [workflow_to_dict(w, with_arrival=True) for w in workload.workflows],
    }


def serialize_workload(workload: WorkloadSpec) -> str:
    return json.dumps(workload_to_dict(workload), indent=2) + "\n"


def workload_hash(workload: WorkloadSpec) -> str:
    return hashlib.sha256(serialize_workload(workload).encode()).hexdigest()


def genome_template(chromosome: str, fan_out: int,
                    runtime_profile: dict[str, float] | None = None,
                    budget: float = 0.0) -> WorkflowSpec:
    """Mutation-analysis workflow shape: fan_out parallel data-extraction
    tasks plus one scoring task feed a merge, which feeds two exit tasks."""
    if fan_out < 1:
        raise ValueError("fan_out must be >= 1")
    profile = dict(GENOME_RUNTIMES)
    profile.update(runtime_profile or {})
    width = max(2, len(str(fan_out)))
    tasks = [
        TaskRecord(id=f"individuals_{i:0{width}d}", kind="individuals",
                   reference_runtime=profile["individuals"])
        for i in range(1, fan_out + 1)
    ]
    ind_ids = frozenset(t.id for t in tasks)
    tasks.append(TaskRecord(id="sifting", kind="sifting",
                            reference_runtime=profile["sifting"]))
    tasks.append(TaskRecord(id="individuals_merge", kind="individuals_merge",
                            reference_runtime=profile["individuals_merge"],
                            parents=ind_ids))
    join = frozenset({"individuals_merge", "sifting"})
    tasks.append(TaskRecord(id="mutations_overlap", kind="mutations_overlap",
                            reference_runtime=profile["mutations_overlap"], parents=join))
    tasks.append(TaskRecord(id="frequency", kind="frequency",
                            reference_runtime=profile["frequency"], parents=join))
    return _assemble(chromosome, tasks, budget, 0.0)


def vina_template(ligand_count: int,
                  runtimes: tuple[float, ...] | list[float] | None = None,
                  kind_prefix: str = "docking",
                  workflow_id: str = "vina",
                  budget: float = 0.0) -> WorkflowSpec:
    """Molecular-docking workflow shape: an edge-free bag of independent tasks."""
    if ligand_count < 1:
        raise ValueError("ligand_count must be >= 1")
    if runtimes is None:
        runtimes = (300.0,) * ligand_count
    if len(runtimes) != ligand_count:
        raise ValueError("runtimes must supply one value per ligand")
    width = max(2, len(str(ligand_count)))
    tasks = [
        TaskRecord(id=f"ligand_{i:0{width}d}", kind=f"{kind_prefix}_{i:0{width}d}",
                   reference_runtime=float(runtimes[i - 1]))
        for i in range(1, ligand_count + 1)
    ]
    return _assemble(workflow_id, tasks, budget, 0.0)


def generate_workload(catalog: list[tuple[WorkflowSpec, float]], count: int,
                      rate_wf_per_min: float, seed: int) -> WorkloadSpec:
    """Draw `count` workflows uniformly from the catalog with exponential
    inter-arrival gaps of mean 60/rate seconds.

    One seeded RNG stream is used with a fixed draw order per workflow:
    first the catalog index, then the inter-arrival gap.
    """
    if not catalog:
        raise ValueError("catalog must be non-empty")
    if count < 1:
        raise ValueError("count must be >= 1")
    if rate_wf_per_min <= 0:
        raise ValueError("rate must be > 0")
    rng = random.Random(seed)
    rate_per_sec = rate_wf_per_min / 60.0
    workflows: list[WorkflowSpec] = []
    clock = 0.0
    width = max(3, len(str(count)))
    for i in range(count):
        template, budget = catalog[rng.randrange(len(catalog))]
        clock += rng.expovariate(rate_per_sec)
        wf = template.copy()
        wf.id = f"wf{i:0{width}d}-{template.id}"
        wf.budget = budget
        wf.arrival_time = clock
        workflows.append(wf)
    return WorkloadSpec(workflows=workflows, arrival_rate=rate_wf_per_min, seed=seed)
