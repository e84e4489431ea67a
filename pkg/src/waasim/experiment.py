"""Experiment runner: scenario sweeps over arrival rates and schedulers,
metrics aggregation, CSV output and report comparison."""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import engine
from .cloud import CloudConfig, VariabilityConfig, VmType
from .errors import ConfigError, ManifestMismatch
from .estimator import EstimatorConfig
from .metrics import (MetricsReport, assignments_to_csv, report_from_json,
                      report_to_json, workflows_to_csv)
from .scheduler import SCHEDULER_NAMES
from .units import substream_seed
from .workflow import (GENOME_RUNTIMES, VINA01_RUNTIMES, VINA02_RUNTIMES,
                       WorkflowSpec, generate_workload, genome_template,
                       vina_template)


@dataclass
class TemplateConfig:
    name: str
    shape: str  # "genome" or "vina"
    budgets: list[float]
    fan_out: int = 10
    ligand_count: int = 7
    runtime_profile: dict[str, float] | None = None
    runtimes: list[float] | None = None

    def build(self) -> WorkflowSpec:
        if self.shape == "genome":
            return genome_template(self.name, self.fan_out,
                                   runtime_profile=self.runtime_profile)
        if self.shape == "vina":
            return vina_template(self.ligand_count,
                                 runtimes=self.runtimes,
                                 kind_prefix=f"{self.name}_dock",
                                 workflow_id=self.name)
        raise ConfigError(f"templates[{self.name}].shape: unknown shape {self.shape!r}")


def default_templates() -> list[TemplateConfig]:
    """The four evaluation workflows with their published budget levels."""
    return [
        TemplateConfig("chr21", "genome", [0.1, 0.25, 0.45, 0.65], fan_out=9,
                       runtime_profile=dict(GENOME_RUNTIMES)),
        TemplateConfig("chr22", "genome", [0.1, 0.25, 0.45, 0.65], fan_out=10,
                       runtime_profile=dict(GENOME_RUNTIMES)),
        TemplateConfig("vina01", "vina", [0.05, 0.15, 0.25, 0.35],
                       runtimes=list(VINA01_RUNTIMES)),
        TemplateConfig("vina02", "vina", [0.01, 0.04, 0.06, 0.08],
                       runtimes=list(VINA02_RUNTIMES)),
    ]


@dataclass
class ExperimentConfig:
    cloud: CloudConfig = field(default_factory=CloudConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    templates: list[TemplateConfig] = field(default_factory=default_templates)
    budget_levels: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    workflow_count: int = 20
    arrival_rates: list[float] = field(default_factory=lambda: [0.5, 2.0, 6.0, 12.0])
    schedulers: list[str] = field(default_factory=lambda: ["ebpsm"])
    repetitions: int = 1
    seed_base: int = 42
    output_dir: str = "results"
    write_traces: bool = False

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ConfigError("repetitions: must be >= 1")
        if self.workflow_count < 1:
            raise ConfigError("workflow_count: must be >= 1")
        if not self.arrival_rates or any(r <= 0 for r in self.arrival_rates):
            raise ConfigError("arrival_rates: every rate must be > 0")
        if not self.schedulers:
            raise ConfigError("schedulers: must be non-empty")
        for name in self.schedulers:
            if name not in SCHEDULER_NAMES:
                raise ConfigError(f"schedulers: unknown scheduler {name!r}")
        if not self.templates:
            raise ConfigError("templates: must be non-empty")
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise ConfigError("templates: names must be unique")
        for tpl in self.templates:
            if not tpl.budgets:
                raise ConfigError(f"templates[{tpl.name}].budgets: must be non-empty")
            if any(b <= a for a, b in zip(tpl.budgets, tpl.budgets[1:])):
                raise ConfigError(
                    f"templates[{tpl.name}].budgets: must be strictly increasing")
        if not self.budget_levels:
            raise ConfigError("budget_levels: must be non-empty")
        for level in self.budget_levels:
            for tpl in self.templates:
                if not 1 <= level <= len(tpl.budgets):
                    raise ConfigError(
                        f"budget_levels: level {level} outside templates[{tpl.name}].budgets")

    def build_catalog(self) -> list[tuple[WorkflowSpec, float]]:
        catalog = []
        for tpl in self.templates:
            spec = tpl.build()
            for level in self.budget_levels:
                catalog.append((spec, tpl.budgets[level - 1]))
        return catalog


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}{key}: missing field")
    return doc[key]


_CONFIG_KEYS = ("cloud", "estimator", "templates", "budget_levels", "workflow_count",
                "arrival_rates", "schedulers", "repetitions", "seed_base",
                "output_dir", "write_traces")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed JSON."""
    if not isinstance(doc, dict):
        raise ConfigError("config: must be a JSON object")
    for key in doc:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config: unknown field {key!r}")
    kwargs: dict = {}
    if "cloud" in doc:
        cdoc = dict(doc["cloud"])
        if "catalog" in cdoc:
            cdoc["catalog"] = tuple(
                VmType(
                    name=_require(t, "name", "cloud.catalog[]."),
                    vcpus=int(t.get("vcpus", 1)),
                    memory_mb=int(t.get("memory_mb", 1024)),
                    price_per_second=float(_require(t, "price_per_second", "cloud.catalog[].")),
                    speed_factor=float(_require(t, "speed_factor", "cloud.catalog[].")),
                )
                for t in cdoc["catalog"]
            )
        if "variability" in cdoc:
            cdoc["variability"] = VariabilityConfig(**cdoc["variability"])
        kwargs["cloud"] = CloudConfig(**cdoc)
    if "estimator" in doc:
        kwargs["estimator"] = EstimatorConfig(**doc["estimator"])
    if "templates" in doc:
        templates = []
        for i, t in enumerate(doc["templates"]):
            templates.append(TemplateConfig(
                name=_require(t, "name", f"templates[{i}]."),
                shape=_require(t, "shape", f"templates[{i}]."),
                budgets=[float(b) for b in _require(t, "budgets", f"templates[{i}].")],
                fan_out=int(t.get("fan_out", 10)),
                ligand_count=int(t.get("ligand_count", 7)),
                runtime_profile=t.get("runtime_profile"),
                runtimes=t.get("runtimes"),
            ))
        kwargs["templates"] = templates
    for key in ("budget_levels", "workflow_count", "arrival_rates", "schedulers",
                "repetitions", "seed_base", "output_dir", "write_traces"):
        if key in doc:
            kwargs[key] = doc[key]
    try:
        config = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from exc
    config.validate()
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "cloud": {
            "catalog": [
                {"name": t.name, "vcpus": t.vcpus, "memory_mb": t.memory_mb,
                 "price_per_second": t.price_per_second, "speed_factor": t.speed_factor}
                for t in config.cloud.catalog
            ],
            "provisioning_delay": config.cloud.provisioning_delay,
            "deprovisioning_delay": config.cloud.deprovisioning_delay,
            "idle_threshold": config.cloud.idle_threshold,
            "scan_interval": config.cloud.scan_interval,
            "variability": {"mode": config.cloud.variability.mode,
                            "sigma": config.cloud.variability.sigma},
            "bill_provisioning": config.cloud.bill_provisioning,
        },
        "estimator": {"mode": config.estimator.mode, "window": config.estimator.window,
                      "cold_start_margin": config.estimator.cold_start_margin},
        "templates": [
            {"name": t.name, "shape": t.shape, "budgets": t.budgets,
             "fan_out": t.fan_out, "ligand_count": t.ligand_count,
             "runtime_profile": t.runtime_profile, "runtimes": t.runtimes}
            for t in config.templates
        ],
        "budget_levels": config.budget_levels,
        "workflow_count": config.workflow_count,
        "arrival_rates": config.arrival_rates,
        "schedulers": config.schedulers,
        "repetitions": config.repetitions,
        "seed_base": config.seed_base,
        "output_dir": config.output_dir,
        "write_traces": config.write_traces,
    }


def config_hash(config: ExperimentConfig) -> str:
    text = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def _rate_label(rate: float) -> str:
    return f"{rate:g}"


@dataclass
class RunSpec:
    run_id: str
    scheduler: str
    rate: float
    repetition: int
    workload_seed: int
    run_seed: int


def plan_runs(config: ExperimentConfig) -> list[RunSpec]:
    runs = []
    for rate in config.arrival_rates:
        for scheduler in config.schedulers:
            for rep in range(config.repetitions):
                label = _rate_label(rate)
                runs.append(RunSpec(
                    run_id=f"{scheduler}_rate{label}_rep{rep}",
                    scheduler=scheduler,
                    rate=rate,
                    repetition=rep,
                    workload_seed=substream_seed(
                        config.seed_base, f"workload/rate={label}/rep={rep}"),
                    run_seed=substream_seed(
                        config.seed_base, f"run/rate={label}/rep={rep}"),
                ))
    return runs


def execute_run(config: ExperimentConfig, spec: RunSpec) -> engine.SimulationResult:
    workload = generate_workload(config.build_catalog(), config.workflow_count,
                                 spec.rate, spec.workload_seed)
    return engine.run(workload, scheduler=spec.scheduler, cloud=config.cloud,
                      estimator=config.estimator, seed=spec.run_seed)


def _run_for_pool(args: tuple) -> tuple[str, dict, str, str, str | None]:
    config_doc, spec = args
    config = config_from_dict(config_doc)
    result = execute_run(config, spec)
    trace_text = engine.checkpoint_trace(result.trace) if config.write_traces else None
    return (spec.run_id, result.report.to_dict(), workflows_to_csv(result.report),
            assignments_to_csv(result.assignments), trace_text)


def summarize_budget_met(reports_by_rate: dict[float, list[MetricsReport]]) -> list[dict]:
    """Per rate: budget-met percentage and the mean overrun ratio of the
    violating workflows only."""
    rows = []
    for rate in sorted(reports_by_rate):
        reports = reports_by_rate[rate]
        total = sum(len(r.workflows) for r in reports)
        met = sum(sum(1 for w in r.workflows if w.budget_met) for r in reports)
        ratios = [ratio for r in reports for ratio in r.violation_ratios()]
        rows.append({
            "rate": rate,
            "workflows": total,
            "budget_met_pct": 100.0 * met / total if total else 100.0,
            "violations": len(ratios),
            "mean_violation_ratio": sum(ratios) / len(ratios) if ratios else None,
        })
    return rows


SUMMARY_COLUMNS = (
    "run_id", "scheduler", "rate", "repetition", "workload_seed", "run_seed",
    "workflows", "budget_met_pct", "mean_makespan_s", "total_workflow_cost_usd",
    "fleet_cost_usd", "utilization_pct", "vm_count",
)


def _summary_row(spec: RunSpec, report: MetricsReport) -> dict:
    makespans = [w.makespan_s for w in report.workflows]
    return {
        "run_id": spec.run_id,
        "scheduler": spec.scheduler,
        "rate": spec.rate,
        "repetition": spec.repetition,
        "workload_seed": spec.workload_seed,
        "run_seed": spec.run_seed,
        "workflows": len(report.workflows),
        "budget_met_pct": report.budget_met_pct(),
        "mean_makespan_s": sum(makespans) / len(makespans) if makespans else 0.0,
        "total_workflow_cost_usd": sum(w.cost_usd for w in report.workflows),
        "fleet_cost_usd": report.fleet.total_cost_usd,
        "utilization_pct": report.fleet.utilization_pct,
        "vm_count": report.fleet.total_vms,
    }


def _format_summary_csv(rows: list[dict], type_names: list[str]) -> str:
    buf = io.StringIO()
    columns = list(SUMMARY_COLUMNS) + [f"vms_{n}" for n in type_names]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([
            row["run_id"], row["scheduler"], f"{row['rate']:g}", row["repetition"],
            row["workload_seed"], row["run_seed"], row["workflows"],
            f"{row['budget_met_pct']:.4f}", f"{row['mean_makespan_s']:.6f}",
            f"{row['total_workflow_cost_usd']:.9f}", f"{row['fleet_cost_usd']:.9f}",
            f"{row['utilization_pct']:.4f}", row["vm_count"],
            *[row["vm_counts"].get(n, 0) for n in type_names],
        ])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, jobs: int = 1,
                   output_dir: str | Path | None = None) -> dict:
    """Run the full sweep; write per-run CSVs, reports, a summary CSV, a
    budget-met summary and a manifest. Returns the manifest."""
    config.validate()
    out = Path(output_dir if output_dir is not None else config.output_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)

    specs = plan_runs(config)
    results: dict[str, tuple[dict, str, str, str | None]] = {}
    if jobs > 1:
        config_doc = config_to_dict(config)
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for run_id, report_doc, wf_csv, assign_csv, trace_text in pool.map(
                    _run_for_pool, [(config_doc, spec) for spec in specs]):
                results[run_id] = (report_doc, wf_csv, assign_csv, trace_text)
    else:
        for spec in specs:
            result = execute_run(config, spec)
            trace_text = engine.checkpoint_trace(result.trace) if config.write_traces else None
            results[spec.run_id] = (
                result.report.to_dict(), workflows_to_csv(result.report),
                assignments_to_csv(result.assignments), trace_text)

    summary_rows = []
    reports_by_rate: dict[float, list[MetricsReport]] = {}
    manifest_runs = []
    for spec in specs:
        report_doc, wf_csv, assign_csv, trace_text = results[spec.run_id]
        report = report_from_json(json.dumps(report_doc))
        (runs_dir / f"{spec.run_id}.csv").write_text(wf_csv)
        (runs_dir / f"{spec.run_id}.assign.csv").write_text(assign_csv)
        (runs_dir / f"{spec.run_id}.report.json").write_text(report_to_json(report))
        if trace_text is not None:
            (runs_dir / f"{spec.run_id}.trace").write_text(trace_text)
        row = _summary_row(spec, report)
        row["vm_counts"] = report.fleet.vm_counts
        summary_rows.append(row)
        reports_by_rate.setdefault(spec.rate, []).append(report)
        manifest_runs.append({
            "run_id": spec.run_id,
            "scheduler": spec.scheduler,
            "rate": spec.rate,
            "repetition": spec.repetition,
            "workload_seed": spec.workload_seed,
            "run_seed": spec.run_seed,
            "workload_hash": report.workload_hash,
        })

    type_names = [t.name for t in config.cloud.catalog]
    (out / "summary.csv").write_text(_format_summary_csv(summary_rows, type_names))

    budget_rows = summarize_budget_met(reports_by_rate)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rate", "workflows", "budget_met_pct", "violations",
                     "mean_violation_ratio"])
    for row in budget_rows:
        ratio = row["mean_violation_ratio"]
        writer.writerow([
            f"{row['rate']:g}", row["workflows"], f"{row['budget_met_pct']:.4f}",
            row["violations"], "" if ratio is None else f"{ratio:.6f}",
        ])
    (out / "budget_summary.csv").write_text(buf.getvalue())

    manifest = {
        "config_hash": config_hash(config),
        "seed_base": config.seed_base,
        "runs": manifest_runs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out / "config.json").write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
    return manifest


@dataclass
class ComparisonRow:
    workflow_id: str
    makespan_ratio: float
    cost_ratio: float


@dataclass
class ComparisonReport:
    """Directional comparison of two runs over the same workload."""

    rows: list[ComparisonRow]
    mean_makespan_ratio: float
    mean_cost_ratio: float
    speedup_a_vs_b: float
    fleet_cost_ratio: float
    a_faster: bool
    a_cheaper: bool

    def render(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["workflow_id", "makespan_ratio_a_over_b", "cost_ratio_a_over_b"])
        for row in self.rows:
            writer.writerow([row.workflow_id, f"{row.makespan_ratio:.6f}",
                             f"{row.cost_ratio:.6f}"])
        buf.write(f"# mean_makespan_ratio={self.mean_makespan_ratio:.6f}\n")
        buf.write(f"# mean_cost_ratio={self.mean_cost_ratio:.6f}\n")
        buf.write(f"# speedup_a_vs_b={self.speedup_a_vs_b:.6f}\n")
        buf.write(f"# fleet_cost_ratio={self.fleet_cost_ratio:.6f}\n")
        buf.write(f"# a_faster={self.a_faster} a_cheaper={self.a_cheaper}\n")
        return buf.getvalue()


def compare(report_a: MetricsReport, report_b: MetricsReport) -> ComparisonReport:
    """Per-workflow makespan/cost ratios of A over B plus aggregates."""
    if report_a.workload_hash != report_b.workload_hash:
        raise ManifestMismatch(
            f"workload hashes differ: {report_a.workload_hash[:12]} vs "
            f"{report_b.workload_hash[:12]}")
    b_by_id = {w.workflow_id: w for w in report_b.workflows}
    rows = []
    speedups = []
    for wa in report_a.workflows:
        wb = b_by_id[wa.workflow_id]
        rows.append(ComparisonRow(
            workflow_id=wa.workflow_id,
            makespan_ratio=wa.makespan_s / wb.makespan_s,
            cost_ratio=wa.cost_usd / wb.cost_usd if wb.cost_usd else float("inf"),
        ))
        speedups.append(wb.makespan_s / wa.makespan_s)
    mean_mk = sum(r.makespan_ratio for r in rows) / len(rows)
    mean_cost = sum(r.cost_ratio for r in rows) / len(rows)
    fleet_ratio = (report_a.fleet.total_cost_usd / report_b.fleet.total_cost_usd
                   if report_b.fleet.total_cost_usd else float("inf"))
    return ComparisonReport(
        rows=rows,
        mean_makespan_ratio=mean_mk,
        mean_cost_ratio=mean_cost,
        speedup_a_vs_b=sum(speedups) / len(speedups),
        fleet_cost_ratio=fleet_ratio,
        a_faster=mean_mk < 1.0,
        a_cheaper=fleet_ratio < 1.0,
    )


def compare_files(path_a: str | Path, path_b: str | Path) -> ComparisonReport:
    return compare(report_from_json(Path(path_a).read_text()),
                   report_from_json(Path(path_b).read_text()))
