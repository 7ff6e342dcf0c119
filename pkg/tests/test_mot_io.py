import numpy as np
import pytest

from xviewtrack.assoc_sv import RunConfig
from xviewtrack.mot_io import (
    ConfigError, FormatError, build_config, dump_config, format_mot, format_sidecar, load_config,
    parse_flat, parse_mot_text, parse_sidecar_text, read_detections, write_detections,
)
from xviewtrack.simulate import SceneConfig, generate_scene


def test_parse_single_detection_line():
    (r,) = parse_mot_text("1,-1,10,20,30,40,0.9,-1,-1,-1\n")
    assert (r.frame, r.id, r.conf) == (1, -1, 0.9)
    assert (r.bb_left, r.bb_top, r.bb_width, r.bb_height) == (10, 20, 30, 40)
    assert (r.x, r.y, r.z) == (-1, -1, -1)


def test_empty_file_is_empty_stream():
    assert parse_mot_text("") == []


def test_malformed_line_reports_line_number():
    with pytest.raises(FormatError, match=":2:"):
        parse_mot_text("1,1,0,0,5,5,1,-1,-1,-1\n1,1,zero,0,5,5\n")
    with pytest.raises(FormatError):
        parse_mot_text("1,1,0,0\n")


def test_frames_must_not_decrease():
    with pytest.raises(FormatError, match="frame"):
        parse_mot_text("2,1,0,0,5,5,1,-1,-1,-1\n1,1,0,0,5,5,1,-1,-1,-1\n")


def test_round_trip_byte_identical(tmp_path):
    cfg = SceneConfig(n_frames=20, miss_prob=0.1, fp_rate=0.3, box_jitter_sigma=1.5,
                      sigma_cross=0.1, sigma_single=0.1, embedding_dim=16, seed=2)
    _, dets = generate_scene(cfg)
    write_detections(tmp_path / "a", 0, dets[0])
    frames = read_detections(tmp_path / "a", 0)
    write_detections(tmp_path / "b", 0, frames)
    first = (tmp_path / "a" / "view_0.txt").read_text()
    second = (tmp_path / "b" / "view_0.txt").read_text()
    assert first == second
    third = format_mot(parse_mot_text(second))
    assert third == second
    for name in ("view_0.single.emb", "view_0.cross.emb"):
        a = parse_sidecar_text((tmp_path / "a" / name).read_text())[1]
        b = parse_sidecar_text((tmp_path / "b" / name).read_text())[1]
        assert a.keys() == b.keys()
        for k in a:
            np.testing.assert_allclose(a[k], b[k], atol=1e-7)


def test_sidecar_format():
    text = format_sidecar([(1, 0, [0.5, -0.25]), (1, 1, [1.0, 0.0])], dim=2)
    assert text == "dim=2\n1,0,0.5,-0.25\n1,1,1,0\n"
    dim, rows = parse_sidecar_text(text)
    assert dim == 2 and list(rows[(1, 0)]) == [0.5, -0.25]


def test_sidecar_errors():
    with pytest.raises(FormatError, match="dim"):
        parse_sidecar_text("1,0,0.5\n")
    with pytest.raises(FormatError, match=":2:"):
        parse_sidecar_text("dim=3\n1,0,0.5,0.5\n")
    with pytest.raises(FormatError):
        format_sidecar([(1, 0, [1.0])], dim=2)


def test_sidecar_row_count_must_match(tmp_path):
    _, dets = generate_scene(SceneConfig(n_frames=3, embedding_dim=4))
    write_detections(tmp_path, 0, dets[0])
    side = tmp_path / "view_0.cross.emb"
    side.write_text("\n".join(side.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(FormatError):
        read_detections(tmp_path, 0)


def test_config_parsing():
    values = parse_flat("# run\ndelta_s = 0.25  # tighter\n\niou_fallback = off\nmax_age=5\n")
    cfg = build_config(RunConfig, values)
    assert (cfg.delta_s, cfg.iou_fallback, cfg.max_age) == (0.25, False, 5)
    assert cfg.delta_c == RunConfig().delta_c


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        build_config(RunConfig, {"delta_q": "1"})
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"max_age": "soon"})
    with pytest.raises(ConfigError):
        build_config(RunConfig, {"delta_s": "5"})
    with pytest.raises(ConfigError):
        parse_flat("just words\n")
    with pytest.raises(ConfigError, match="not found"):
        load_config(RunConfig, tmp_path / "missing.cfg")


def test_config_dump_round_trip():
    cfg = SceneConfig(n_agents=3, arena=(0.0, 0.0, 12.0, 8.0), hard_negatives=True, sigma_cross=0.05)
    again = build_config(SceneConfig, parse_flat(dump_config(cfg)))
    assert dump_config(again) == dump_config(cfg)
    assert again.arena == (0.0, 0.0, 12.0, 8.0) and again.hard_negatives
