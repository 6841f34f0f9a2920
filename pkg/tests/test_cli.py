import json
import subprocess
import sys

import numpy as np
import pytest

from subbitsnn import pack, weights_io
from subbitsnn.cli import main


@pytest.fixture
def weights(tmp_path):
    rng = np.random.default_rng(0)
    ws = [rng.normal(size=(16, 2, 3, 3)), rng.normal(size=(8, 16, 3, 3)), rng.normal(size=(10, 8))]
    ws[0][0, 0, 1, 1] = 9.0
    path = tmp_path / "w.s2dw"
    weights_io.save(path, ws)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_weights_io_round_trip_and_errors(tmp_path):
    ws = [np.arange(6.0).reshape(2, 3), np.ones((1, 1, 3, 3))]
    data = weights_io.dumps(ws)
    back = weights_io.loads(data)
    for a, b in zip(ws, back):
        np.testing.assert_array_equal(a, b)
    for bad in (b"nope", data[:-1], data + b"\0"):
        with pytest.raises(weights_io.WeightsFormatError):
            weights_io.loads(bad)


def test_quantize_table_and_output(capsys, weights, tmp_path):
    out = tmp_path / "q.s2nn"
    code, text, err = run(capsys, "quantize", "--weights", weights, "--eta", 6, "--out", out)
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0].startswith("layer,c_out,c_in,k,eta,bits_per_weight")
    assert len(lines) == 3
    assert lines[1].split(",")[7] == "0.666667"
    assert "left uncompressed" in err
    model = pack.load(out)
    assert [m.shape for m in model] == [(16, 2, 3, 3), (8, 16, 3, 3)]


def test_quantize_rejects_non_sub_bit(capsys, weights, tmp_path):
    code, _, err = run(capsys, "quantize", "--weights", weights, "--eta", 9, "--out", tmp_path / "x.s2nn")
    assert code != 0 and "not sub-bit" in err
    assert not (tmp_path / "x.s2nn").exists()


def test_quantize_baseline_differs_only_where_outliers(capsys, weights, tmp_path):
    run(capsys, "quantize", "--weights", weights, "--eta", 4, "--out", tmp_path / "a.s2nn")
    run(capsys, "quantize", "--weights", weights, "--eta", 4, "--baseline", "--out", tmp_path / "b.s2nn")
    a, b = pack.load(tmp_path / "a.s2nn"), pack.load(tmp_path / "b.s2nn")
    assert a[0].codebook == b[0].codebook
    assert not np.array_equal(a[0].indices, b[0].indices)


def test_missing_file_names_path(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", "--weights", tmp_path / "missing.s2dw")
    assert code != 0 and "missing.s2dw" in err
    code, _, err = run(capsys, "pack", "--model", tmp_path / "gone.s2nn")
    assert code != 0 and "gone.s2nn" in err


def test_pack_dump_header_and_corruption(capsys, weights, tmp_path):
    q = tmp_path / "q.s2nn"
    run(capsys, "quantize", "--weights", weights, "--eta", 5, "--out", q)
    code, text, _ = run(capsys, "pack", "--model", q, "--dump-header")
    assert code == 0 and text.startswith("magic=S2NN version=1 layers=2")
    bad = tmp_path / "bad.s2nn"
    bad.write_bytes(b"XXXX" + q.read_bytes()[4:])
    code, _, err = run(capsys, "pack", "--model", bad)
    assert code != 0 and "magic" in err


def test_analyze_sections(capsys, weights):
    code, text, _ = run(capsys, "analyze", "--weights", weights, "--gamma", 1.5)
    assert code == 0
    for header in ("layer,codeword_id,count", "layer,k,ratio", "layer,gamma,fraction", "layer,kernel_index,i,j,value,omega"):
        assert header in text
    assert "0,0,1,1,9," in text


def test_report(capsys, weights, tmp_path):
    q = tmp_path / "q.s2nn"
    run(capsys, "quantize", "--weights", weights, "--eta", 5, "--out", q)
    code, text, _ = run(capsys, "report", "--model", q, "--input-shape", "2,8,8", "--T", 4, "--fr", 0.2)
    assert code == 0
    assert "3.6x" in text
    assert "e_mac_pj,e_ac_pj" in text
    code, _, err = run(capsys, "report", "--model", q, "--input-shape", "3,8,8", "--T", 4, "--fr", 0.2)
    assert code != 0 and "channels" in err


def test_train_toy_then_infer(capsys, tmp_path):
    cfg = {
        "net": {"input_shape": [1, 8, 8], "convs": [{"c_in": 1, "c_out": 4, "eta": 4}], "n_classes": 2, "T": 4},
        "train": {"epochs": 4, "seed": 1, "gamma": 1.5, "lambda": 0.0},
        "data": {"samples": 40},
        "out": {"metrics": "m.csv", "model": "toy.s2nn"},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    code, text, _ = run(capsys, "train-toy", "--config", tmp_path / "cfg.json")
    assert code == 0
    first = (tmp_path / "m.csv").read_bytes()
    model_bytes = (tmp_path / "toy.s2nn").read_bytes()
    assert first.decode() == text
    assert (tmp_path / "toy.dense.npz").exists()
    run(capsys, "train-toy", "--config", tmp_path / "cfg.json")
    assert (tmp_path / "m.csv").read_bytes() == first
    assert (tmp_path / "toy.s2nn").read_bytes() == model_bytes

    x = (np.random.default_rng(0).random((4, 3, 1, 8, 8)) < 0.3).astype(np.uint8)
    np.save(tmp_path / "x.npy", x)
    code, a, _ = run(capsys, "infer", "--model", tmp_path / "toy.s2nn", "--input", tmp_path / "x.npy", "--T", 4)
    assert code == 0
    code, b, _ = run(capsys, "infer", "--model", tmp_path / "toy.s2nn", "--input", tmp_path / "x.npy", "--T", 4, "--reference")
    assert a.split("\n\n")[0] == b.split("\n\n")[0]
    code, _, err = run(capsys, "infer", "--model", tmp_path / "toy.s2nn", "--input", tmp_path / "x.npy", "--T", 3)
    assert code != 0 and "timesteps" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "subbitsnn", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("quantize", "pack", "infer", "analyze", "report", "train-toy"):
        assert cmd in out.stdout
