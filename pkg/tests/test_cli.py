import json

import pytest

from td3fg.cli import build_parser, main
from td3fg.demos import load_demos
from td3fg.harness import read_csv
from td3fg.nn import load_net

SMALL = "warmup_steps = 50\neval_every = 100\neval_episodes = 1\nhidden = 8,8\nbatch_size = 16\npretrain_iters = 10\n" \
    "demo_mix = expert:2,failing:1\npreload_best_k = 1\npreload_n = 50\n"


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return str(path)


def test_every_subcommand_is_registered():
    parser = build_parser()
    for cmd in ("pretrain", "gen-demos", "train", "eval", "plot", "sweep"):
        args = parser.parse_args([cmd, "x.csv"] if cmd in ("plot", "eval") else [cmd])
        assert callable(args.func)


def test_gen_demos_and_pretrain(tmp_path, small_cfg, capsys):
    demos_path = tmp_path / "d.txt"
    assert main(["gen-demos", "--config", small_cfg, "--seed", "1", "--out", str(demos_path)]) == 0
    assert len(load_demos(demos_path)) == 3
    ckpt = tmp_path / "g.npz"
    assert main(["pretrain", "--config", small_cfg, "--demos", str(demos_path), "--steps", "120", "--out", str(ckpt)]) == 0
    assert load_net(ckpt).layer_sizes == (4, 8, 8, 2)
    assert "windowed mse" in capsys.readouterr().out


def test_train_eval_plot(tmp_path, small_cfg, capsys):
    out = tmp_path / "run"
    assert main(["train", "--preset", "td3", "--config", small_cfg, "--steps", "200", "--seed", "3", "--out", str(out)]) == 0
    records = read_csv(out / "seed3.csv")
    assert [r.step for r in records] == [100, 200]
    assert json.loads(capsys.readouterr().out)["seed"] == 3
    assert main(["eval", str(out / "actor_seed3.npz"), "--episodes", "1"]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"mean_return", "fr", "hr", "cc", "tc"}
    svg = tmp_path / "c.svg"
    assert main(["plot", str(out / "seed3.csv"), "--out", str(svg)]) == 0
    assert svg.read_text().count('class="series"') == 1


def test_sweep(tmp_path, small_cfg, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", "--preset", "ddpgfd_like", "--config", small_cfg, "--steps", "100", "--seeds", "0", "1", "--out", str(out)]) == 0
    assert (out / "summary.json").exists() and (out / "seed1.csv").exists()
    assert "median final return" in capsys.readouterr().out


def test_errors_are_reported(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["train", "--env", "ant-v2"]) == 2
    with pytest.raises(SystemExit):
        main(["train", "--preset", "nope"])
