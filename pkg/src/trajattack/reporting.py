"""Campaign and sweep persistence: CSV records, JSON summaries, SVG figures.

Floats are written with repr so reruns of a deterministic campaign produce
byte-identical files. Figures embed their data points in SVG element ids
(matplotlib artist gids), so a chart can be audited without the CSV next to
it.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import (
    CampaignResult,
    ExperimentConfig,
    InstanceOutcome,
    SweepResult,
    config_fingerprint,
    parse_config,
)
from .objectives import EvalRecord
from .trajectory import save_trajectory

RECORD_COLUMNS = (
    "instance",
    "objmc_clean",
    "objmc_attack",
    "success",
    "queries_used",
    "budget_used",
    "incomplete",
)

REPORT_COLUMNS = (
    "label",
    "instances",
    "asr",
    "mean_objmc_clean",
    "mean_objmc_attack",
    "mean_queries",
    "fingerprint",
)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_records_csv(path: Path, records: tuple[EvalRecord, ...]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.instance,
                    _fmt(r.objmc_clean),
                    _fmt(r.objmc_attack),
                    int(r.success),
                    r.queries_used,
                    _fmt(r.budget_used),
                    int(r.incomplete),
                ]
            )


def read_records_csv(path: Path) -> tuple[EvalRecord, ...]:
    records = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != list(RECORD_COLUMNS):
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            record = EvalRecord(
                instance=int(row["instance"]),
                objmc_clean=float(row["objmc_clean"]),
                objmc_attack=float(row["objmc_attack"]),
                queries_used=int(row["queries_used"]),
                budget_used=float(row["budget_used"]),
                incomplete=bool(int(row["incomplete"])),
            )
            if int(row["success"]) != int(record.success):
                raise ValueError(
                    f"{path}: instance {record.instance} success flag disagrees "
                    f"with its stored metrics"
                )
            records.append(record)
    return tuple(records)


def summary_payload(campaign: CampaignResult) -> dict:
    return {
        "fingerprint": campaign.fingerprint,
        "instances": len(campaign.records),
        "incomplete": sum(r.incomplete for r in campaign.records),
        "asr": campaign.asr,
        "mean_objmc_clean": campaign.mean_objmc_clean,
        "mean_objmc_attack": campaign.mean_objmc_attack,
        "mean_queries": campaign.mean_queries,
    }


def write_summary_json(path: Path, campaign: CampaignResult) -> None:
    with open(path, "w") as handle:
        json.dump(summary_payload(campaign), handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_config_json(path: Path, config: ExperimentConfig) -> None:
    with open(path, "w") as handle:
        json.dump(dataclasses.asdict(config), handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_tracks(path: Path, tracks) -> None:
    with open(path, "w") as handle:
        json.dump([[list(map(float, p)) for p in frame] for frame in tracks], handle)
        handle.write("\n")


def save_instance_artifacts(out_dir: Path, outcome: InstanceOutcome) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_trajectory(outcome.clean_trajectory, out_dir / "clean_trajectory.json")
    save_trajectory(outcome.perturbed_trajectory, out_dir / "perturbed_trajectory.json")
    _write_tracks(out_dir / "clean_tracks.json", outcome.clean_tracks)
    _write_tracks(out_dir / "attacked_tracks.json", outcome.attacked_tracks)
    with open(out_dir / "objectives.json", "w") as handle:
        json.dump(
            {
                "velocity_objective_clean": outcome.velocity_objective_clean,
                "velocity_objective_attack": outcome.velocity_objective_attack,
            },
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")


def save_campaign(
    out_dir: Path,
    campaign: CampaignResult,
    outcomes: list[InstanceOutcome] | None = None,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_json(out_dir / "config.json", campaign.config)
    write_records_csv(out_dir / "records.csv", campaign.records)
    write_summary_json(out_dir / "summary.json", campaign)
    if outcomes is not None:
        for outcome in outcomes:
            save_instance_artifacts(
                out_dir / "instances" / f"instance_{outcome.record.instance:03d}",
                outcome,
            )


def load_campaign(campaign_dir: Path) -> CampaignResult:
    """Reload a persisted campaign, recomputing the aggregates from the
    records and refusing a directory whose summary disagrees."""
    campaign_dir = Path(campaign_dir)
    with open(campaign_dir / "config.json") as handle:
        config = parse_config(json.load(handle))
    records = read_records_csv(campaign_dir / "records.csv")
    campaign = CampaignResult(
        config=config,
        records=records,
        fingerprint=config_fingerprint(config),
        duration_seconds=0.0,
    )
    with open(campaign_dir / "summary.json") as handle:
        stored = json.load(handle)
    recomputed = summary_payload(campaign)
    if stored != recomputed:
        diffs = sorted(
            k
            for k in stored.keys() | recomputed.keys()
            if stored.get(k) != recomputed.get(k)
        )
        raise ValueError(
            f"{campaign_dir}: summary.json disagrees with records.csv on {diffs}"
        )
    return campaign


# --- sweeps -------------------------------------------------------------------


def write_sweep_csv(path: Path, sweep: SweepResult) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "parameter",
                "value",
                "asr",
                "mean_objmc_clean",
                "mean_objmc_attack",
                "mean_queries",
                "fingerprint",
            ]
        )
        for point in sweep.points:
            c = point.campaign
            writer.writerow(
                [
                    sweep.parameter,
                    json.dumps(point.value),
                    _fmt(c.asr),
                    _fmt(c.mean_objmc_clean),
                    _fmt(c.mean_objmc_attack),
                    _fmt(c.mean_queries),
                    c.fingerprint,
                ]
            )


def read_sweep_csv(path: Path) -> tuple[str, list, list[float], list[float], list[float]]:
    parameter = ""
    values: list = []
    asrs: list[float] = []
    clean_means: list[float] = []
    attack_means: list[float] = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            parameter = row["parameter"]
            values.append(json.loads(row["value"]))
            asrs.append(float(row["asr"]))
            clean_means.append(float(row["mean_objmc_clean"]))
            attack_means.append(float(row["mean_objmc_attack"]))
    return parameter, values, asrs, clean_means, attack_means


def save_sweep_table(out_dir: Path, sweep: SweepResult) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_dir / "sweep.csv", sweep)


def _sweep_axis(values: list) -> tuple[list[float], list[str]]:
    """Numeric values plot on their own scale; anything else is categorical."""
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        return [float(v) for v in values], [str(v) for v in values]
    return list(range(len(values))), [str(v) for v in values]


def render_sweep_chart(path: Path, sweep: SweepResult) -> None:
    render_sweep_rows(
        path,
        sweep.parameter,
        [p.value for p in sweep.points],
        [p.campaign.asr for p in sweep.points],
        [p.campaign.mean_objmc_clean for p in sweep.points],
        [p.campaign.mean_objmc_attack for p in sweep.points],
    )


def render_sweep_rows(
    path: Path,
    parameter: str,
    values: list,
    asrs: list[float],
    clean_means: list[float],
    attack_means: list[float],
) -> None:
    xs, labels = _sweep_axis(values)

    fig, (ax_asr, ax_obj) = plt.subplots(1, 2, figsize=(10, 4))
    line = ax_asr.plot(xs, asrs, marker="o", color="tab:red")[0]
    line.set_gid(f"sweep|{parameter}|asr")
    for x, label, asr in zip(xs, labels, asrs):
        point = ax_asr.plot([x], [asr], marker="o", color="tab:red")[0]
        point.set_gid(f"asr|{label}|{_fmt(asr)}")
    ax_asr.set_xlabel(parameter)
    ax_asr.set_ylabel("attack success rate")
    ax_asr.set_ylim(-0.05, 1.05)

    for series, color, name in (
        (clean_means, "tab:blue", "clean"),
        (attack_means, "tab:orange", "attack"),
    ):
        line = ax_obj.plot(xs, series, marker="s", color=color, label=name)[0]
        line.set_gid(f"sweep|{parameter}|objmc_{name}")
        for x, label, y in zip(xs, labels, series):
            point = ax_obj.plot([x], [y], marker="s", color=color)[0]
            point.set_gid(f"objmc_{name}|{label}|{_fmt(y)}")
    ax_obj.set_xlabel(parameter)
    ax_obj.set_ylabel("mean track position error")
    ax_obj.legend()

    if labels != [str(x) for x in xs]:
        for ax in (ax_asr, ax_obj):
            ax.set_xticks(xs)
            ax.set_xticklabels(labels)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# --- report emission ----------------------------------------------------------


def render_campaign_figures(out_dir: Path, records: tuple[EvalRecord, ...]) -> list[Path]:
    """Scatter of clean vs attacked position error and a histogram of their
    differences, written next to the delimited output."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cleans = [r.objmc_clean for r in records]
    attacks = [r.objmc_attack for r in records]

    scatter_path = out_dir / "objmc_scatter.svg"
    fig, ax = plt.subplots(figsize=(5, 5))
    lo = min(cleans + attacks)
    hi = max(cleans + attacks)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="gray", linestyle="--")
    for r in records:
        point = ax.plot(
            [r.objmc_clean],
            [r.objmc_attack],
            marker="o",
            color="tab:green" if r.success else "tab:red",
        )[0]
        point.set_gid(
            f"instance|{r.instance}|{_fmt(r.objmc_clean)}|{_fmt(r.objmc_attack)}"
        )
    ax.set_xlabel("clean position error")
    ax.set_ylabel("attacked position error")
    fig.tight_layout()
    fig.savefig(scatter_path, format="svg")
    plt.close(fig)

    hist_path = out_dir / "objmc_delta_hist.svg"
    fig, ax = plt.subplots(figsize=(6, 4))
    deltas = [a - c for c, a in zip(cleans, attacks)]
    counts, edges, patches = ax.hist(deltas, bins=16, color="tab:purple")
    for count, left, patch in zip(counts, edges[:-1], patches):
        patch.set_gid(f"bin|{_fmt(left)}|{int(count)}")
    ax.set_xlabel("attacked minus clean position error")
    ax.set_ylabel("instances")
    fig.tight_layout()
    fig.savefig(hist_path, format="svg")
    plt.close(fig)
    return [scatter_path, hist_path]


def _report_row(label: str, campaign: CampaignResult) -> dict:
    return {
        "label": label,
        "instances": len(campaign.records),
        "asr": campaign.asr,
        "mean_objmc_clean": campaign.mean_objmc_clean,
        "mean_objmc_attack": campaign.mean_objmc_attack,
        "mean_queries": campaign.mean_queries,
        "fingerprint": campaign.fingerprint,
    }


def discover_campaigns(in_dir: Path) -> list[tuple[str, CampaignResult]]:
    """A directory holds either one campaign or a sweep of point_NN
    campaigns."""
    in_dir = Path(in_dir)
    if (in_dir / "records.csv").exists():
        return [(in_dir.name, load_campaign(in_dir))]
    if (in_dir / "sweep.csv").exists():
        found = []
        for point_dir in sorted(in_dir.glob("point_*")):
            if (point_dir / "records.csv").exists():
                found.append((point_dir.name, load_campaign(point_dir)))
        if not found:
            raise ValueError(f"{in_dir}: sweep.csv present but no point_* campaigns")
        return found
    raise ValueError(f"{in_dir}: no records.csv or sweep.csv found")


def emit_report(in_dir: Path, out_dir: Path) -> list[Path]:
    """Summarize persisted results: one CSV row per campaign, a JSON mirror,
    figures per campaign, and a sweep chart when the input is a sweep."""
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    campaigns = discover_campaigns(in_dir)
    rows = [_report_row(label, campaign) for label, campaign in campaigns]

    written = []
    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["label"],
                    row["instances"],
                    _fmt(row["asr"]),
                    _fmt(row["mean_objmc_clean"]),
                    _fmt(row["mean_objmc_attack"]),
                    _fmt(row["mean_queries"]),
                    row["fingerprint"],
                ]
            )
    written.append(csv_path)

    json_path = out_dir / "report.json"
    with open(json_path, "w") as handle:
        json.dump(rows, handle, indent=2, sort_keys=True)
        handle.write("\n")
    written.append(json_path)

    for label, campaign in campaigns:
        written.extend(render_campaign_figures(out_dir / label, campaign.records))

    if (in_dir / "sweep.csv").exists():
        parameter, values, asrs, clean_means, attack_means = read_sweep_csv(
            in_dir / "sweep.csv"
        )
        chart_path = out_dir / "sweep.svg"
        render_sweep_rows(chart_path, parameter, values, asrs, clean_means, attack_means)
        written.append(chart_path)
    return written
