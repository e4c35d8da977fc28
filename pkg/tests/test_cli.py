import json

import numpy as np
import pytest

from submin.basis import random_weights, write_weights
from submin.cli import main
from submin.fileio import read_flo, read_png_mask, read_pfm, write_png, write_png_mask
from submin.synthetic import iou, translated_pair, two_color_fixture


@pytest.fixture()
def image_pair(tmp_path):
    src, tgt = translated_pair(128, 96, (2.0, 0.0), seed=20)
    a = tmp_path / "target.png"
    b = tmp_path / "source.png"
    write_png(a, tgt)
    write_png(b, src)
    return a, b


class TestFlowCommand:
    def test_identical_images_produce_zero_flow(self, tmp_path):
        img, _ = translated_pair(96, 64, (0.0, 0.0), seed=21)
        p = tmp_path / "a.png"
        write_png(p, img)
        out = tmp_path / "f.flo"
        rc = main(["flow", str(p), str(p), "--out", str(out)])
        assert rc == 0
        flow = read_flo(out)
        assert flow.shape == (64, 96, 2)
        assert np.max(np.abs(flow)) == 0.0

    def test_json_report_schema(self, image_pair, tmp_path):
        tgt, src = image_pair
        out = tmp_path / "f.flo"
        report_path = tmp_path / "report.json"
        rc = main(["flow", str(tgt), str(src), "--out", str(out),
                   "--json-report", str(report_path)])
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["task"] == "flow"
        assert "wall_ms" in report
        assert len(report["levels"]) == 4
        for level in report["levels"]:
            assert {"level", "k", "iterations"} <= set(level)
            for it in level["iterations"]:
                assert it["energy_after"] <= it["energy_before"]
                assert {"energy_before", "energy_after", "step_norm", "damping"} <= set(it)

    def test_deterministic_output_bytes(self, image_pair, tmp_path):
        tgt, src = image_pair
        out1 = tmp_path / "f1.flo"
        out2 = tmp_path / "f2.flo"
        assert main(["flow", str(tgt), str(src), "--out", str(out1)]) == 0
        assert main(["flow", str(tgt), str(src), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestStereoCommand:
    def test_writes_pfm_disparity(self, image_pair, tmp_path):
        tgt, src = image_pair
        out = tmp_path / "d.pfm"
        rc = main(["stereo", str(tgt), str(src), "--out", str(out)])
        assert rc == 0
        disp = read_pfm(out)
        inner = np.s_[16:-16, 16:-16]
        assert abs(disp[:, :, 0][inner].mean() - 2.0) < 0.3

    def test_corrupt_weights_file_fails_with_diagnostic(self, image_pair, tmp_path, capsys):
        tgt, src = image_pair
        weights = random_weights([(32, 4, 2), (32, 4, 4), (16, 2, 8), (16, 2, 16)])
        wpath = tmp_path / "w.lsmw"
        write_weights(wpath, weights)
        raw = bytearray(wpath.read_bytes())
        raw[-1] ^= 0xFF  # corrupt the trailing checksum
        wpath.write_bytes(bytes(raw))
        rc = main(["stereo", str(tgt), str(src), "--out", str(tmp_path / "d.pfm"),
                   "--basis", f"generated:{wpath}"])
        assert rc == 1
        assert "checksum" in capsys.readouterr().err


class TestIsegCommand:
    def test_two_color_fixture_segmentation(self, tmp_path):
        image, gt, _ = two_color_fixture(128)
        img_path = tmp_path / "img.png"
        write_png(img_path, image)
        scr_path = tmp_path / "scr.json"
        scr_path.write_text(json.dumps({
            "foreground": [[[32, 16], [32, 112]]],
            "background": [[[96, 16], [96, 112]]],
        }))
        out = tmp_path / "mask.png"
        rc = main(["iseg", str(img_path), str(scr_path), "--out", str(out)])
        assert rc == 0
        mask = read_png_mask(out)
        assert iou(mask, gt) >= 0.95

    def test_missing_background_polyline_is_error(self, tmp_path, capsys):
        image, _, _ = two_color_fixture(64)
        img_path = tmp_path / "img.png"
        write_png(img_path, image)
        scr_path = tmp_path / "scr.json"
        scr_path.write_text(json.dumps({"foreground": [[[8, 8], [8, 40]]]}))
        rc = main(["iseg", str(img_path), str(scr_path), "--out", str(tmp_path / "m.png")])
        assert rc == 1
        assert "background" in capsys.readouterr().err


class TestVsegCommand:
    def test_static_sequence(self, tmp_path):
        image, gt, _ = two_color_fixture(128)
        prev_p = tmp_path / "prev.png"
        cur_p = tmp_path / "cur.png"
        mask_p = tmp_path / "mask.png"
        write_png(prev_p, image)
        write_png(cur_p, image)
        write_png_mask(mask_p, gt)
        out = tmp_path / "out.png"
        rc = main(["vseg", str(prev_p), str(cur_p), str(mask_p), "--out", str(out)])
        assert rc == 0
        assert iou(read_png_mask(out), gt) >= 0.9


class TestVerifyCommand:
    def test_clean_build_passes(self, capsys):
        rc = main(["verify"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "FAIL" not in out
        assert out.count("PASS") >= 6


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, image_pair, tmp_path):
        tgt, src = image_pair
        with pytest.raises(SystemExit) as exc:
            main(["flow", str(tgt), str(src), "--out", str(tmp_path / "f.flo"),
                  "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_input_file_exits_1(self, tmp_path, capsys):
        rc = main(["flow", str(tmp_path / "nope.png"), str(tmp_path / "nope.png"),
                   "--out", str(tmp_path / "f.flo")])
        assert rc == 1
        assert "nope.png" in capsys.readouterr().err

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_k_schedule_length(self, image_pair, tmp_path):
        tgt, src = image_pair
        rc = main(["flow", str(tgt), str(src), "--out", str(tmp_path / "f.flo"),
                   "--k-schedule", "2,4"])
        assert rc == 1
