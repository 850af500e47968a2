import itertools

import numpy as np
import pytest

from emotraj.eigenspace import train_pca
from emotraj.errors import IoError
from emotraj.imagecore import canonical_eyes, load_manifest, read_image
from emotraj.synthgen import SynthConfig, generate, load_config, synthesize

# noise-free margins of the default generator, computed once and pinned
APEX_MARGIN = 3.330078125
STEP_MARGIN = 0.327392578125


def test_frame_zero_is_base_plus_noise():
    sf = synthesize(SynthConfig(sequences_per_emotion=2, noise_sigma=0.0))
    base = np.clip(np.floor(sf.base + 0.5), 0, 255)
    for _, _, frames in sf.sequences:
        np.testing.assert_array_equal(frames[0], base)
    noisy = synthesize(SynthConfig(sequences_per_emotion=2, noise_sigma=2.0))
    for _, _, frames in noisy.sequences:
        diff = frames[0] - sf.base
        assert abs(diff.mean()) < 0.2 and 1.5 < diff.std() < 2.5


def test_fields_orthogonal_with_common_norm():
    sf = synthesize(SynthConfig(sequences_per_emotion=2))
    fields = [f.ravel() for f in sf.fields.values()]
    for a, b in itertools.combinations(fields, 2):
        assert abs(a @ b) <= 1e-8
    for f in fields:
        assert np.linalg.norm(f) == pytest.approx(600.0)


def test_noise_free_margins():
    sf = synthesize(SynthConfig(noise_sigma=0.0, sequences_per_emotion=2))
    apex = {lab: fr[-1] for _, lab, fr in sf.sequences}
    inter = min(np.mean(np.abs(apex[a] - apex[b])) for a, b in itertools.combinations(apex, 2))
    intra = max(np.mean(np.abs(fr[t + 1] - fr[t])) for *_, fr in sf.sequences for t in range(len(fr) - 1))
    assert inter == APEX_MARGIN and intra == STEP_MARGIN
    assert inter >= 10 * intra


def test_noise_free_trajectories_are_distinct():
    sf = synthesize(SynthConfig(noise_sigma=0.0, sequences_per_emotion=2, width=32, height=32))
    stacks = {lab: np.stack([f.ravel() for f in fr]) for _, lab, fr in sf.sequences}
    model = train_pca(np.concatenate(list(stacks.values())), k=20)
    trajs = {lab: model.project_sequence(s) for lab, s in stacks.items()}
    for a, b in itertools.combinations(trajs, 2):
        assert np.linalg.norm(trajs[a] - trajs[b]) > 1.0


def test_generate_writes_manifest(tmp_path):
    cfg = SynthConfig(seed=5, sequences_per_emotion=2, width=24, height=24)
    manifest = generate(cfg, tmp_path)
    loaded = load_manifest(tmp_path / "manifest.csv", canonical_size=(24, 24))
    assert loaded == manifest
    assert len(manifest.records) == 8 and len(list((tmp_path / "frames").iterdir())) == 64
    left, right = canonical_eyes(24, 24)
    assert all(rec.eye_left == (left,) * 8 and rec.eye_right == (right,) * 8 for rec in manifest.records)
    sf = synthesize(cfg)
    np.testing.assert_array_equal(read_image(manifest.records[3].frames[5]).pixels, sf.sequences[3][2][5])


def test_same_seed_same_bytes(tmp_path):
    cfg = SynthConfig(seed=11, sequences_per_emotion=2, width=16, height=16)
    generate(cfg, tmp_path / "a")
    generate(cfg, tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    generate(SynthConfig(seed=12, sequences_per_emotion=2, width=16, height=16), tmp_path / "c")
    frame = "frames/anger_00_3.pgm"
    assert (tmp_path / "c" / frame).read_bytes() != (tmp_path / "a" / frame).read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        generate(SynthConfig(sequences_per_emotion=2, width=8, height=8), blocker / "sub")


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(sequences_per_emotion=1)
    with pytest.raises(ValueError):
        SynthConfig(noise_sigma=-1.0)
    with pytest.raises(ValueError):
        SynthConfig(emotions=("a", "a"))


def test_config_file(tmp_path):
    path = tmp_path / "synth.cfg"
    path.write_text("# demo\nseed = 9\nper-emotion = 3\nnoise_sigma = 0.5\nemotions = anger, fear\n")
    cfg = load_config(path)
    assert (cfg.seed, cfg.sequences_per_emotion, cfg.noise_sigma, cfg.emotions) == (9, 3, 0.5, ("anger", "fear"))
    path.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        load_config(path)
