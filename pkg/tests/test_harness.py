import dataclasses
import json
import math

import numpy as np
import pytest

import td3fg.harness as harness
from td3fg.env import EnvSpec, rollout
from td3fg.errors import InvalidConfigError, NumericError, UnknownPresetError
from td3fg.harness import (
    CSV_HEADER,
    PRESET_NAMES,
    EvalRecord,
    ExperimentConfig,
    RunLog,
    emit_csv,
    emit_svg_curves,
    evaluate,
    preset,
    read_csv,
    run_experiment,
    run_sweep,
)
from td3fg.nn import forward, mlp_init


def tiny(name="td3fg", **overrides):
    base = preset(name).with_total_steps(600)
    small = dict(
        warmup_steps=100, eval_every=200, eval_episodes=1, hidden=(8, 8), batch_size=16,
        pretrain_iters=30, demo_mix="expert:3,suboptimal:2,failing:1", preload_best_k=2, preload_n=100,
        buffer_capacity=500, seeds=(0, 1),
    )
    small.update(overrides)
    return dataclasses.replace(base, **small)


def test_presets_exist_and_validate():
    for name in PRESET_NAMES:
        cfg = preset(name)
        assert cfg.name == name
        if name != "paper":
            assert cfg.total_steps == 50_000 and (cfg.T1, cfg.T2, cfg.T3) == (10_000, 5_000, 5_000)
            assert max(cfg.T1, cfg.T2, cfg.T3) <= cfg.total_steps
    assert preset("td3").variant == "td3" and not preset("td3").preload_demos
    assert preset("ddpgfd_like").preload_demos and preset("ddpgfd_like").preload_best_k == 10
    buf = preset("td3fg_buffer")
    assert buf.variant == "td3fg" and buf.preload_demos
    paper = preset("paper")
    assert (paper.total_steps, paper.T1, paper.hidden) == (750_000, 600_000, (256, 512, 256))


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        preset("sac")


def test_with_total_steps_scales_horizons():
    cfg = preset("td3fg").with_total_steps(5_000)
    assert (cfg.T1, cfg.T2, cfg.T3) == (1_000, 500, 500)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        ExperimentConfig(total_steps=0)
    with pytest.raises(InvalidConfigError):
        ExperimentConfig(variant="ddpg")
    with pytest.raises(InvalidConfigError):
        ExperimentConfig(env_overrides={"gravity": 1.0})


def test_config_text_round_trip(tmp_path):
    cfg = dataclasses.replace(preset("ddpgfd_like"), env_overrides={"drag": 0.1}, hidden=(4, 5), tau=0.0125)
    path = cfg.save(tmp_path / "run.cfg")
    assert ExperimentConfig.load(path) == cfg


def test_config_text_parsing():
    cfg = ExperimentConfig.from_text("# comment\nvariant = td3\ntotal_steps = 2e4\nenv.drag = 0.2\npreload_demos = yes\n")
    assert (cfg.variant, cfg.total_steps, cfg.env_overrides, cfg.preload_demos) == ("td3", 20_000, {"drag": 0.2}, True)
    for bad in ("nonsense", "colour = red", "env.gravity = 3", "total_steps = many"):
        with pytest.raises(InvalidConfigError):
            ExperimentConfig.from_text(bad)


def test_evaluate_single_episode_matches_rollout():
    spec = EnvSpec()
    actor = mlp_init([4, 8, 2], "tanh", "tanh", seed=0)
    result = evaluate(actor, spec, 1, seed=3)
    traj = rollout(spec, lambda obs: forward(actor, obs), seed=harness._episode_seed(3, 0))
    assert result.mean_return == traj.total_return


def test_evaluate_is_pure_and_linear():
    spec = EnvSpec()
    actor = mlp_init([4, 8, 2], "tanh", "tanh", seed=1)
    before = actor.params.copy()
    r = evaluate(actor, spec, 3, seed=0)
    assert np.array_equal(actor.params, before)
    assert r.mean_return == pytest.approx(r.fr + r.hr - r.cc - r.tc, rel=1e-12)
    assert evaluate(actor, spec, 3, seed=0) == r
    with pytest.raises(InvalidConfigError):
        evaluate(actor, spec, 0, seed=0)


@pytest.fixture(scope="module")
def tiny_runs():
    cfg = tiny("td3fg")
    return cfg, run_experiment(cfg, 0), run_experiment(cfg, 0)


def test_run_log_shape(tiny_runs):
    cfg, log, _ = tiny_runs
    assert [r.step for r in log.records] == [200, 400, 600]
    assert log.n_updates == 500
    assert log.aborted_at is None
    assert log.config == cfg.to_dict()
    s = cfg.schedules()
    for r in log.records:
        assert (r.alpha, r.beta, r.gamma_w, r.delta_w) == (s.alpha(r.step), 0.0, s.gamma(r.step), s.delta(r.step))


def test_run_is_deterministic(tiny_runs, tmp_path):
    _, a, b = tiny_runs
    assert a == b
    assert a.to_json(include_timing=False) == b.to_json(include_timing=False)
    pa, pb = emit_csv(a, tmp_path / "a.csv"), emit_csv(b, tmp_path / "b.csv")
    assert pa.read_bytes() == pb.read_bytes()


def test_seed_changes_run(tiny_runs):
    cfg, a, _ = tiny_runs
    assert run_experiment(cfg, 1).records != a.records


def test_degenerate_schedules_match_td3():
    # horizons of one step leave nothing but the RL loss once warmup ends
    fg = tiny("td3fg", T1=1, T2=1, T3=1)
    td3 = tiny("td3", expl_noise=0.0)
    a, b = run_experiment(fg, 0), run_experiment(td3, 0)
    assert len(a.records) == len(b.records)
    assert all(x.same_as(y) for x, y in zip(a.records, b.records))


def test_warmup_longer_than_run_never_trains():
    cfg = tiny("td3", total_steps=150, warmup_steps=1_000, eval_every=50)
    log, nets = run_experiment(cfg, 0, return_agent=True)
    assert log.n_updates == 0
    assert len({r.mean_return for r in log.records}) == 1
    assert all(math.isnan(r.critic_loss) and math.isnan(r.actor_loss) for r in log.records)


@pytest.mark.parametrize("name", ["bcft", "ddpgfd_like", "td3fg_qfilter", "td3fg_noise", "td3fg_noise_only", "td3fg_buffer"])
def test_every_preset_runs(name):
    log = run_experiment(tiny(name, total_steps=300, eval_every=300), 0)
    assert len(log.records) == 1 and math.isfinite(log.final_return)


def test_bcft_starts_from_generator():
    cfg = tiny("bcft", warmup_steps=10_000, total_steps=200)
    _, nets = run_experiment(cfg, 0, return_agent=True)
    assert nets.actor == nets.generator


def test_numeric_error_is_recorded(monkeypatch):
    real = harness.train_step

    def exploding(nets, buffer, t, *args):
        if t >= 150:
            raise NumericError("non-finite gradient")
        return real(nets, buffer, t, *args)

    monkeypatch.setattr(harness, "train_step", exploding)
    log = run_experiment(tiny("td3"), 0)
    assert log.aborted_at == 150
    assert "step 150" in log.error
    assert log.summary()["aborted_at"] == 150


def record(step, value):
    return EvalRecord(step, value, 1.0, 2.0, 0.1, 0.0, 0.5, 0.0, 0.25, 0.95, 0.1 / 3, float("nan"))


def test_csv_round_trip(tmp_path):
    log = RunLog({}, 0, [record(1000, 1 / 3), record(2000, -2.5e-17)])
    path = emit_csv(log, tmp_path / "out" / "run.csv")
    back = read_csv(path)
    assert all(a.same_as(b) for a, b in zip(back, log.records)) and len(back) == 2
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_empty_log_gives_header_only_csv(tmp_path):
    path = emit_csv(RunLog({}, 0), tmp_path / "empty.csv")
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert read_csv(path) == []


def test_svg_has_one_series_per_run(tmp_path):
    logs = [RunLog({"name": "x"}, s, [record(1000, s), record(2000, 2 * s + 1)]) for s in (0, 1)]
    text = emit_svg_curves(logs, tmp_path / "c.svg").read_text()
    assert text.startswith("<svg") and text.count('class="series"') == 2
    with pytest.raises(InvalidConfigError):
        emit_svg_curves([], tmp_path / "none.svg")


def test_sweep_writes_files(tmp_path):
    cfg = tiny("td3", total_steps=200, eval_every=100)
    logs = run_sweep(cfg, seeds=(0, 1), out_dir=tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["curves.svg", "seed0.csv", "seed0.json", "seed1.csv", "seed1.json", "summary.json"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["median_final_return"] == float(np.median([rl.final_return for rl in logs]))
