"""Experiment harness: config plumbing, pairing, and campaign execution."""

import dataclasses
import json

import numpy as np
import pytest

from trajattack.harness import (
    AttackSpec,
    CampaignResult,
    ConfigError,
    ExperimentConfig,
    InstanceSpec,
    VictimSpec,
    build_victim,
    config_fingerprint,
    evaluate_instance,
    generate_instance,
    load_config,
    pairing_seed,
    parse_config,
    run_campaign,
    run_sweep,
    set_by_path,
)
from trajattack.objectives import EvalRecord
from trajattack.trajectory import centers, generate_instances
from trajattack.victims import GenerationRequest


def tiny_config_obj(**overrides):
    obj = {
        "instances": {"count": 2, "frame_count": 6, "speed_min": 2.0, "speed_max": 3.0},
        "victim": {"kind": "faithful", "jitter_sigma": 0.3},
        "attack": {
            "kind": "blackbox",
            "mode_count": 2,
            "population": 4,
            "query_budget": 12,
            "eps_max": 4.0,
        },
    }
    for key, value in overrides.items():
        section, _, field = key.partition(".")
        if field:
            obj[section][field] = value
        else:
            obj[section] = value
    return obj


def tiny_config(**overrides):
    return parse_config(tiny_config_obj(**overrides))


# --- parsing and coercion ----------------------------------------------------------


def test_parse_config_defaults():
    config = parse_config({})
    assert config.instances == InstanceSpec()
    assert config.victim == VictimSpec()
    assert config.attack == AttackSpec()
    assert config.workers == 1
    assert config.out_dir is None


def test_parse_config_reads_sections():
    config = tiny_config()
    assert config.instances.count == 2
    assert config.victim.jitter_sigma == 0.3
    assert config.attack.population == 4


@pytest.mark.parametrize(
    "obj, message",
    [
        ([], "root must be an object"),
        ({"extra": {}}, "unknown keys"),
        ({"attack": 3}, "attack: expected an object"),
        ({"attack": {"bogus": 1}}, "unknown keys"),
        ({"workers": 0}, "workers"),
        ({"workers": True}, "workers"),
        ({"out_dir": 4}, "string or null"),
    ],
)
def test_parse_config_rejects(obj, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(obj)


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"attack.antithetic": 1}, "expected true/false"),
        ({"attack.population": 4.5}, "expected an integer"),
        ({"attack.population": True}, "got a boolean"),
        ({"attack.eps_max": "big"}, "expected a number"),
        ({"victim.kind": 9}, "expected a string"),
        ({"victim.url": 9}, "string or null"),
    ],
)
def test_field_coercion_rejects(overrides, message):
    with pytest.raises(ConfigError, match=message):
        tiny_config(**overrides)


def test_float_fields_accept_integers():
    config = tiny_config(**{"attack.eps_max": 8})
    assert config.attack.eps_max == 8.0
    assert isinstance(config.attack.eps_max, float)


def test_load_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_obj()))
    assert load_config(str(path)) == tiny_config()

    path.write_text('{"instances": \n  oops}')
    with pytest.raises(ConfigError, match=r"line 2, column 3"):
        load_config(str(path))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.json"))


# --- validation ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"instances.count": 0}, "count must be >= 1"),
        ({"instances.frame_count": 1}, "frame_count must be >= 2"),
        ({"instances.motion_family": "zigzag"}, "motion_family"),
        ({"instances.speed_min": 0.0}, "speed_min <= speed_max"),
        ({"instances.speed_min": 5.0, "instances.speed_max": 3.0}, "speed_min <= speed_max"),
        ({"victim.kind": "oracle"}, "victim.kind"),
        ({"attack.kind": "magic"}, "attack.kind"),
        ({"attack.ablation": "none"}, "attack.ablation"),
        ({"attack.kind": "whitebox"}, "needs victim.kind 'coordfield'"),
        ({"victim.kind": "external"}, "exactly one of victim.url/victim.command"),
        (
            {"victim.kind": "external", "victim.url": "http://h:1", "victim.command": "v"},
            "exactly one of",
        ),
        ({"attack.population": 1}, "population"),
        ({"attack.query_budget": 2}, "query_budget"),
    ],
)
def test_validate_config_rejects(overrides, message):
    with pytest.raises(ConfigError, match=message):
        tiny_config(**overrides)


def test_set_by_path():
    config = tiny_config()
    assert set_by_path(config, "attack.eps_max", 2).attack.eps_max == 2.0
    assert set_by_path(config, "workers", 3).workers == 3
    assert set_by_path(config, "out_dir", "runs").out_dir == "runs"
    assert set_by_path(config, "out_dir", None).out_dir is None
    for path in ("nope", "a.b.c", "attack.bogus", "attack"):
        with pytest.raises(ConfigError, match="unknown config path"):
            set_by_path(config, path, 1)
    with pytest.raises(ConfigError, match="count must be >= 1"):
        set_by_path(config, "instances.count", 0)
    # the original is untouched
    assert config.attack.eps_max == 4.0


# --- identity -----------------------------------------------------------------------


def test_fingerprint_tracks_semantics_only():
    base = tiny_config()
    assert config_fingerprint(base) == config_fingerprint(tiny_config())
    assert config_fingerprint(base) != config_fingerprint(tiny_config(**{"attack.seed": 9}))
    relocated = dataclasses.replace(base, workers=4, out_dir="elsewhere")
    assert config_fingerprint(base) == config_fingerprint(relocated)
    assert len(config_fingerprint(base)) == 64


def test_pairing_seed_spreads():
    seeds = {pairing_seed(0, i) for i in range(50)} | {pairing_seed(1, i) for i in range(50)}
    assert len(seeds) == 100
    assert pairing_seed(3, 7) == pairing_seed(3, 7)


def test_generate_instance_matches_batch():
    spec = InstanceSpec(count=5, frame_count=6, speed_min=2.0, speed_max=3.0)
    batch = generate_instances(5, 6, 256.0, 256.0, "linear", 0, (2.0, 3.0))
    one = generate_instance(spec, 3)
    assert np.array_equal(centers(one), centers(batch[3]))


# --- victims ------------------------------------------------------------------------


def test_build_victim_kinds():
    for kind in ("faithful", "inertial", "coordfield"):
        handle = build_victim(VictimSpec(kind=kind))
        instance = generate_instances(1, 4, 256.0, 256.0, "linear", 0, (2.0, 3.0))[0]
        tracks = handle.fn(GenerationRequest(trajectory=instance, seed=0, track_points=2))
        assert tracks.shape == (4, 2, 2)
        handle.close()
    with pytest.raises(ConfigError, match="victim.kind"):
        build_victim(VictimSpec(kind="bogus"))


def test_build_victim_external_uses_client():
    import shlex
    import sys
    from pathlib import Path

    script = Path(__file__).parent / "helpers" / "stdio_victim.py"
    command = f"{shlex.quote(sys.executable)} {shlex.quote(str(script))} ok"
    handle = build_victim(VictimSpec(kind="external", command=command, timeout=30.0))
    try:
        instance = generate_instances(1, 4, 256.0, 256.0, "linear", 0, (2.0, 3.0))[0]
        tracks = handle.fn(GenerationRequest(trajectory=instance, seed=5, track_points=3))
        assert np.array_equal(tracks, centers(instance)[:, None, :].repeat(3, axis=1))
        assert handle._client.queries_used == 1
    finally:
        handle.close()


# --- campaign execution --------------------------------------------------------------


def test_evaluate_instance_zero_jitter_clean_is_exact():
    config = tiny_config(**{"victim.jitter_sigma": 0.0})
    outcome = evaluate_instance(config, 0)
    record = outcome.record
    assert record.instance == 0
    # numpy's strided mean can be an ulp off even on bitwise-identical points
    assert record.objmc_clean < 1e-12
    assert record.objmc_attack > 0.0
    assert record.success
    assert record.queries_used == 12
    assert record.budget_used <= 4.0 + 1e-12
    assert not record.incomplete
    assert np.array_equal(outcome.clean_tracks[:, 0, :], centers(outcome.clean_trajectory))
    assert outcome.velocity_objective_attack >= outcome.velocity_objective_clean


def test_campaign_records_are_worker_invariant():
    solo = run_campaign(tiny_config())
    pooled = run_campaign(dataclasses.replace(tiny_config(), workers=2))
    assert solo.records == pooled.records
    assert solo.fingerprint == pooled.fingerprint == config_fingerprint(tiny_config())
    assert solo.duration_seconds > 0.0
    assert len(solo.records) == 2
    assert solo.mean_queries == 12.0


def test_campaign_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    config = dataclasses.replace(tiny_config(), out_dir=str(out))
    run_campaign(config)
    assert (out / "config.json").is_file()
    assert (out / "records.csv").is_file()
    assert (out / "summary.json").is_file()
    assert (out / "instances" / "instance_000" / "clean_trajectory.json").is_file()
    assert (out / "instances" / "instance_001" / "attacked_tracks.json").is_file()


def test_campaign_result_handles_incomplete_records():
    def record(n, incomplete):
        return EvalRecord(
            instance=n,
            objmc_clean=1.0,
            objmc_attack=2.0,
            queries_used=4,
            budget_used=1.0,
            incomplete=incomplete,
        )

    config = tiny_config()
    half = CampaignResult(
        config=config,
        records=(record(0, False), record(1, True)),
        fingerprint=config_fingerprint(config),
        duration_seconds=0.1,
    )
    assert half.complete_records == (half.records[0],)
    assert half.asr == 1.0
    dead = CampaignResult(
        config=config,
        records=(record(0, True),),
        fingerprint=config_fingerprint(config),
        duration_seconds=0.1,
    )
    assert dead.complete_records == ()
    assert dead.asr == 0.0


def test_run_sweep_zero_budget_point_never_succeeds(tmp_path):
    config = dataclasses.replace(tiny_config(), out_dir=str(tmp_path / "sweep"))
    sweep = run_sweep(config, "attack.eps_max", [0.0, 4.0])
    assert sweep.parameter == "attack.eps_max"
    assert [p.value for p in sweep.points] == [0.0, 4.0]
    # a zero box pins the trajectory, the paired seeds reproduce the clean
    # tracks exactly, and the strict inequality never fires
    assert sweep.points[0].campaign.asr == 0.0
    assert sweep.points[1].campaign.asr > 0.0
    assert (tmp_path / "sweep" / "sweep.csv").is_file()
    assert (tmp_path / "sweep" / "point_00" / "records.csv").is_file()
    assert (tmp_path / "sweep" / "point_01" / "records.csv").is_file()


def test_run_sweep_needs_values():
    with pytest.raises(ConfigError, match="at least one value"):
        run_sweep(tiny_config(), "attack.eps_max", [])
