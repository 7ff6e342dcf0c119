import pytest

from xviewtrack.cli import main

NOISE_FREE = "n_agents = 4\nn_views = 3\nn_frames = 40\nembedding_dim = 32\nseed = 5\n"


@pytest.fixture
def scene(tmp_path):
    cfg = tmp_path / "scene.cfg"
    cfg.write_text(NOISE_FREE)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "sim")]) == 0
    assert main(["track", "--dets", str(tmp_path / "sim" / "dets"), "--out", str(tmp_path / "run")]) == 0
    return tmp_path


def test_noise_free_end_to_end(scene, capsys):
    capsys.readouterr()
    code = main(["evaluate", "--gt", str(scene / "sim" / "gt"), "--pred", str(scene / "run" / "cross"),
                 "--cross-view"])
    out = capsys.readouterr().out
    assert code == 0
    assert "cvidf1=1.000000" in out.splitlines()
    assert "cvma=1.000000" in out.splitlines()


def test_single_view_evaluation(scene, capsys):
    capsys.readouterr()
    assert main(["evaluate", "--gt", str(scene / "sim" / "gt"), "--pred", str(scene / "run" / "single")]) == 0
    out = capsys.readouterr().out
    assert "idsw=0" in out.splitlines()
    assert "cvma" not in out


def test_view_mismatch_fails(scene, capsys):
    (scene / "run" / "cross" / "view_2.txt").unlink()
    code = main(["evaluate", "--gt", str(scene / "sim" / "gt"), "--pred", str(scene / "run" / "cross")])
    assert code != 0
    assert "view mismatch" in capsys.readouterr().err


def test_missing_directory_fails(tmp_path, capsys):
    assert main(["track", "--dets", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_agents = 3\nflavour = mint\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "flavour" in capsys.readouterr().err


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["train-demo", "--mode", "bogus"])
    assert exc.value.code == 1


def test_train_demo_prints_accuracy(capsys):
    assert main(["train-demo", "--mode", "conflict-free", "--seed", "1", "--epochs", "20"]) == 0
    out = capsys.readouterr().out
    assert "mode=conflict-free" in out
    assert any(line.startswith("matching_accuracy=") for line in out.splitlines())


@pytest.mark.slow
def test_selfcheck_passes(capsys):
    assert main(["selfcheck"]) == 0
    assert "FAIL" not in capsys.readouterr().out
