import subprocess
import sys

import pytest

from dronepatrol.cli import main
from dronepatrol.qnet import load_checkpoint

SMALL = ["--set", "grid.n_x=6", "--set", "grid.n_y=7", "--set", "grid.height=6", "--set", "grid.width=7",
         "--horizon", "25"]
TINY_NET = ["--set", "qnet.net_dims=13,16,5", "--set", "learner.iterations=2",
            "--set", "learner.collect_steps=60", "--set", "learner.batch_size=8"]


def files(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    d = tmp_path_factory.mktemp("ckpt")
    path = d / "q.ckpt"
    assert main(["train", "--seed", "1", "--epochs", "3", "--out", str(path), *SMALL, *TINY_NET]) == 0
    return path


def test_eval_twice_identical(tmp_path):
    args = ["eval", "--policy", "random", "--seed", "7", *SMALL]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert sorted(a) == ["config.cfg", "metrics.csv", "summary.csv", "trajectory.csv"]
    assert a == b


def test_eval_from_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[grid]\nn_x = 5\nn_y = 5\nheight = 5\nwidth = 5\n[run]\nhorizon = 10\n")
    assert main(["eval", "--policy", "greedy", "--seed", "2", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "metrics.csv").read_text().splitlines()) == 11


def test_eval_refuses_nonempty_dir(tmp_path, capsys):
    out = tmp_path / "o"
    args = ["eval", "--policy", "random", "--seed", "1", *SMALL, "--out", str(out)]
    assert main(args) == 0
    assert main(args) == 1
    assert "--force" in capsys.readouterr().err
    assert main([*args, "--force"]) == 0


def test_train_requires_seed(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", *SMALL])
    assert exc.value.code != 0
    assert "--seed" in capsys.readouterr().err


def test_unknown_flag_and_command():
    for argv in (["eval", "--seed", "1", "--bogus"], ["launch"], []):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code != 0


def test_rl_without_checkpoint_is_one_line_error(tmp_path, capsys):
    assert main(["eval", "--policy", "rl", "--seed", "1", *SMALL, "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "checkpoint" in err[0]


def test_bad_override_reported(capsys):
    assert main(["eval", "--policy", "random", "--seed", "1", "--set", "run.nonsense=3"]) == 1
    assert "run.nonsense" in capsys.readouterr().err


def test_train_outputs_and_metadata(checkpoint):
    params, opt, meta = load_checkpoint(checkpoint.read_bytes())
    assert params.dims == (13, 16, 5) and opt is not None
    assert meta["grid"] == "6x7" and meta["seed"] == "1" and meta["map"] == "train"
    assert len(meta["train_config_hash"]) == 16
    loss = checkpoint.with_suffix(".loss.csv").read_text().splitlines()
    assert loss[0] == "epoch,mean_loss" and len(loss) == 4


def test_train_deterministic(tmp_path, checkpoint):
    again = tmp_path / "q.ckpt"
    assert main(["train", "--seed", "1", "--epochs", "3", "--out", str(again), *SMALL, *TINY_NET]) == 0
    assert again.read_bytes() == checkpoint.read_bytes()


def test_collect_then_train_from_data(tmp_path):
    data = tmp_path / "t.npz"
    assert main(["collect", "--seed", "4", "--steps", "30", "--out", str(data), *SMALL]) == 0
    ck = tmp_path / "q.ckpt"
    assert main(["train", "--seed", "4", "--epochs", "2", "--data", str(data), "--out", str(ck),
                 *SMALL, *TINY_NET]) == 0
    assert load_checkpoint(ck.read_bytes())[2]["epochs"] == "2"


def test_compare_four_rows(tmp_path, checkpoint, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", "--policies", "random,greedy,sweeping,rl", "--checkpoint", str(checkpoint),
                 "--seed", "3", "--out", str(out), *SMALL, *TINY_NET]) == 0
    rows = (out / "summary.csv").read_text().splitlines()
    assert len(rows) == 5
    assert [r.split(",")[0] for r in rows[1:]] == ["random", "greedy", "sweeping", "rl"]
    assert "sweeping" in capsys.readouterr().out


def test_compare_rejects_unknown_policy(tmp_path):
    assert main(["compare", "--policies", "random,teleport", "--out", str(tmp_path / "o"), *SMALL]) == 1


def test_wrong_net_dims_rejected(tmp_path, checkpoint, capsys):
    assert main(["eval", "--policy", "rl", "--checkpoint", str(checkpoint), "--seed", "1",
                 "--out", str(tmp_path / "o"), *SMALL]) == 1
    assert "(13, 16, 5)" in capsys.readouterr().err


def test_transfer_smoke(tmp_path, checkpoint, capsys):
    out = tmp_path / "tr"
    assert main(["transfer", "--checkpoint", str(checkpoint), "--seed", "0", "--out", str(out),
                 *SMALL[:-2], "--set", "environment.hotspots=3", *TINY_NET]) == 0
    text = capsys.readouterr().out
    assert "frozen rl / random" in text
    rows = (out / "summary.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["rl", "random"]


def test_render_frames(tmp_path, checkpoint):
    out = tmp_path / "frames"
    assert main(["render", "--policy", "rl", "--checkpoint", str(checkpoint), "--seed", "0",
                 "--frame-every", "5", "--out", str(out), *SMALL, *TINY_NET]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["0000.csv", "0005.csv", "0010.csv", "0015.csv", "0020.csv"]


def test_rl_decentralized_switch(tmp_path, checkpoint):
    out = tmp_path / "sw"
    assert main(["eval", "--policy", "rl", "--checkpoint", str(checkpoint), "--seed", "0", "--switch-step", "10",
                 "--out", str(out), *SMALL, *TINY_NET]) == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 4 * 25 + 1


def test_console_script_module_entry():
    res = subprocess.run([sys.executable, "-m", "dronepatrol.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "transfer" in res.stdout
