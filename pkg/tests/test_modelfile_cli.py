from dataclasses import replace

import numpy as np
import pytest

from emotraj import modelfile
from emotraj.cli import main
from emotraj.errors import EmptyTestSet, SingleClass, UnreadableModel, VersionMismatch
from emotraj.imagecore import GrayImage, load_manifest, write_manifest, write_pgm
from emotraj.pipeline import train_pipeline
from emotraj.trajectory import EmotionPolynomialModel

SIZE = ["--canonical-size", "24"]


@pytest.fixture(scope="module")
def small_pipeline(small_synth_dir):
    manifest = load_manifest(small_synth_dir / "manifest.csv", canonical_size=(24, 24))
    return train_pipeline(manifest, k=20, d=6)[0], manifest


@pytest.fixture(scope="module")
def cli_model(small_synth_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "m.txt"
    code = main(["train", "--manifest", str(small_synth_dir / "manifest.csv"), "--model", str(path),
                 "--k", "20", "--d", "6", *SIZE])
    assert code == 0
    return path


# -- model file ------------------------------------------------------------------

def test_round_trip_is_bit_exact(small_pipeline):
    p, _ = small_pipeline
    text = modelfile.dumps(p)
    q = modelfile.loads(text)
    assert modelfile.dumps(q) == text
    for a, b in ((p.eigen.mean, q.eigen.mean), (p.eigen.eigenfaces, q.eigen.eigenfaces),
                 (p.eigen.eigenvalues, q.eigen.eigenvalues), (p.poly.coefficients, q.poly.coefficients)):
        assert a.tobytes() == b.tobytes()
    assert q.poly.scalers == p.poly.scalers and q.poly.directions == p.poly.directions
    assert q.emotions == p.emotions and q.length == 8 and q.canonical_size == (24, 24)


def test_save_load_save_bytes(small_pipeline, tmp_path):
    p, _ = small_pipeline
    modelfile.save(p, tmp_path / "a.txt")
    modelfile.save(modelfile.load(tmp_path / "a.txt"), tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_header_layout(small_pipeline):
    lines = modelfile.dumps(small_pipeline[0]).splitlines()
    assert lines[0] == "EMMODEL 1"
    assert lines[1] == "size 24 24" and lines[2] == "L 8"
    assert lines[-1] == "end"
    assert sum(line.startswith("poly ") for line in lines) == 4 * 6


def test_version_mismatch(small_pipeline):
    text = modelfile.dumps(small_pipeline[0]).replace("EMMODEL 1", "EMMODEL 2", 1)
    with pytest.raises(VersionMismatch):
        modelfile.loads(text)


@pytest.mark.parametrize("cut", [0.1, 0.5, 0.99])
def test_truncated_model(small_pipeline, cut):
    text = modelfile.dumps(small_pipeline[0])
    with pytest.raises(UnreadableModel):
        modelfile.loads(text[: int(len(text) * cut)])


def test_corrupt_model(small_pipeline, tmp_path):
    text = modelfile.dumps(small_pipeline[0])
    with pytest.raises(UnreadableModel):
        modelfile.loads(text.replace("centering on", "centering maybe"))
    with pytest.raises(UnreadableModel):
        modelfile.loads(text + "extra\n")
    with pytest.raises(UnreadableModel):
        modelfile.loads("hello\n")
    with pytest.raises(UnreadableModel):
        modelfile.load(tmp_path / "absent.txt")


def test_detector_block_round_trip(small_pipeline):
    from emotraj.haarlite import HaarFeature, StumpClassifier
    stumps = (StumpClassifier(HaarFeature("four", 0, 2, 2, 3, 8), -12.5, 1, 0.75),
              StumpClassifier(HaarFeature("two_h", 1, 1, 3, 2, 8), 0.1, -1, 1 / 3))
    p = replace(small_pipeline[0], stumps=stumps, detector_window=8)
    q = modelfile.loads(modelfile.dumps(p))
    assert q.stumps == stumps and q.detector_window == 8


def test_whitespace_emotion_names_rejected(small_pipeline):
    p = small_pipeline[0]
    poly = EmotionPolynomialModel(("a b",) + p.emotions[1:], p.poly.directions, p.poly.coefficients, p.poly.scalers)
    with pytest.raises(ValueError):
        modelfile.dumps(replace(p, poly=poly))


# -- pipeline --------------------------------------------------------------------

def test_training_sequences_replay_to_own_label(small_pipeline):
    p, manifest = small_pipeline
    for rec in manifest.records:
        idx, res = p.classify_record(rec)
        assert p.emotions[idx] == rec.label
        assert res[idx] == res.min()


def test_mean_face_sequence_is_deterministic(small_pipeline):
    p, _ = small_pipeline
    frames = np.tile(p.eigen.mean, (8, 1))
    a = p.classify_frames(frames)
    b = p.classify_frames(frames)
    assert a[0] == b[0] and a[1].tobytes() == b[1].tobytes()
    assert a[0] == int(np.argmin(a[1]))
    # with the same polynomials for every emotion all residuals tie and the first emotion wins
    same = np.repeat(p.poly.coefficients[:1], len(p.emotions), axis=0)
    sym = replace(p, poly=EmotionPolynomialModel(p.emotions, p.poly.directions, same, p.poly.scalers))
    idx, res = sym.classify_frames(frames)
    assert idx == 0 and np.all(res == res[0])


def test_single_emotion_manifest(small_synth_dir):
    manifest = load_manifest(small_synth_dir / "manifest.csv", canonical_size=(24, 24))
    only = manifest.subset(r for r in manifest.records if r.label == "anger")
    with pytest.raises(SingleClass):
        train_pipeline(only)


# -- CLI -------------------------------------------------------------------------

def test_cli_train_output(small_synth_dir, tmp_path, capsys):
    model = tmp_path / "m.txt"
    assert main(["train", "--manifest", str(small_synth_dir / "manifest.csv"), "--model", str(model),
                 "--k", "20", "--d", "6", *SIZE]) == 0
    out = capsys.readouterr().out
    assert "K effective: 20" in out and "training sequences: 12" in out and out.count("training residual") == 4
    text = model.read_text()
    assert "\nE 4\n" in text and "\nD 6\n" in text and "\nL 8\n" in text


def test_cli_single_emotion_exit_code(small_synth_dir, tmp_path, capsys):
    manifest = load_manifest(small_synth_dir / "manifest.csv", canonical_size=(24, 24))
    write_manifest(manifest.subset(r for r in manifest.records if r.label == "sorrow"), tmp_path / "one.csv")
    code = main(["train", "--manifest", str(tmp_path / "one.csv"), "--model", str(tmp_path / "m.txt"), *SIZE])
    assert code == SingleClass.exit_code == 10
    assert "error:" in capsys.readouterr().err


def test_cli_train_and_evaluate_are_deterministic(small_synth_dir, tmp_path, capsys):
    args = ["--manifest", str(small_synth_dir / "manifest.csv"), *SIZE, "--train-fraction", "0.4", "--seed", "1"]
    for name in ("a", "b"):
        assert main(["train", "--model", str(tmp_path / f"{name}.txt"), "--k", "20", "--d", "6", *args]) == 0
        assert main(["evaluate", "--model", str(tmp_path / f"{name}.txt"), *args,
                     "--out", str(tmp_path / f"{name}.csv")]) == 0
    capsys.readouterr()
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_evaluate_reports(cli_model, small_synth_dir, capsys):
    assert main(["evaluate", "--model", str(cli_model), "--manifest", str(small_synth_dir / "manifest.csv"), *SIZE]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0].split() == ["anger", "happiness", "sorrow", "surprise"]
    assert "accuracy (diagonal mean): 100.0 %" in text
    assert main(["evaluate", "--model", str(cli_model), "--manifest", str(small_synth_dir / "manifest.csv"),
                 *SIZE, "--report", "csv"]) == 0
    assert capsys.readouterr().out.startswith("true,predicted,fraction\n")


def test_cli_evaluate_empty_manifest(cli_model, tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("path,sequence_id,frame_index,label,eye_lx,eye_ly,eye_rx,eye_ry\n")
    code = main(["evaluate", "--model", str(cli_model), "--manifest", str(tmp_path / "empty.csv"), *SIZE])
    assert code == EmptyTestSet.exit_code


def test_cli_classify_manifest_and_frames(cli_model, small_synth_dir, capsys):
    assert main(["classify", "--model", str(cli_model), "--manifest", str(small_synth_dir / "manifest.csv"), *SIZE]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 12
    for line in lines:
        seq, label, *res = line.split()
        assert seq.startswith(label) and len(res) == 4
    frames = [str(small_synth_dir / "frames" / f"surprise_01_{t}.pgm") for t in range(8)]
    assert main(["classify", "--model", str(cli_model), "--frames", *frames, "--sequence-id", "probe"]) == 0
    assert capsys.readouterr().out.split()[:2] == ["probe", "surprise"]
    assert main(["classify", "--model", str(cli_model), "--frames", *frames[:7]]) != 0


def test_cli_classify_rejects_wrong_size_frames(cli_model, tmp_path, capsys):
    paths = []
    for t in range(8):
        write_pgm(GrayImage(np.zeros((10, 10))), tmp_path / f"{t}.pgm")
        paths.append(str(tmp_path / f"{t}.pgm"))
    assert main(["classify", "--model", str(cli_model), "--frames", *paths]) == 31


def test_cli_truncated_model(cli_model, tmp_path, small_synth_dir, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text(cli_model.read_text()[:500])
    code = main(["classify", "--model", str(bad), "--manifest", str(small_synth_dir / "manifest.csv"), *SIZE])
    assert code == UnreadableModel.exit_code


def test_cli_synth(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "d"), "--seed", "7", "--per-emotion", "10"]) == 0
    assert "wrote 40 sequences, 320 images" in capsys.readouterr().out
    assert len(list((tmp_path / "d" / "frames").glob("*.pgm"))) == 320
    assert main(["synth", "--out", str(tmp_path / "e"), "--seed", "7", "--per-emotion", "10"]) == 0
    for p in (tmp_path / "d").rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "e" / p.relative_to(tmp_path / "d")).read_bytes()


def test_cli_synth_unwritable(tmp_path, capsys):
    (tmp_path / "f").write_text("")
    assert main(["synth", "--out", str(tmp_path / "f" / "x"), "--per-emotion", "2"]) == 50
    assert main(["synth", "--out", str(tmp_path / "g"), "--per-emotion", "1"]) == 19


def test_cli_detect(small_synth_dir, tmp_path, capsys):
    model = tmp_path / "m.txt"
    assert main(["train", "--manifest", str(small_synth_dir / "manifest.csv"), "--model", str(model),
                 "--k", "10", "--d", "4", *SIZE, "--detector-rounds", "3", "--detector-window", "12"]) == 0
    capsys.readouterr()
    frame = small_synth_dir / "frames" / "anger_00_0.pgm"
    assert main(["detect", "--model", str(model), "--scales", "1,2", str(frame)]) == 0
    for line in capsys.readouterr().out.splitlines():
        path, x, y, size, score = line.split()
        assert path == str(frame) and 0 < float(score) <= 1


def test_cli_detect_without_detector(cli_model, small_synth_dir):
    assert main(["detect", "--model", str(cli_model), str(small_synth_dir / "frames" / "anger_00_0.pgm")]) == 19


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["classify", "--model", "x"])
