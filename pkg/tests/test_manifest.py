import json

import numpy as np
import pytest

from synthcapt.manifest import CorpusManifest, ManifestEntry, ManifestError, write_corpus
from synthcapt.world import WorldConfig, make_world

WORLD = WorldConfig(n_l1_speakers=4, n_l2_train_speakers=2, n_l2_test_speakers=2, n_l1=6, n_l2_train=5,
                    n_l2_test=5, seed=2)


@pytest.fixture(scope="module")
def world():
    return make_world(WORLD)


@pytest.fixture
def written(world, tmp_path):
    entries = []
    for split, corpus in (("train_L1", world.l1), ("train_L2", world.l2_train), ("test_L2", world.l2_test)):
        entries += write_corpus(tmp_path, corpus, split, seed=2, prefix=split)
    manifest = CorpusManifest(entries)
    manifest.save(tmp_path / "manifest.json")
    return tmp_path, manifest


def test_roundtrip(world, written):
    root, manifest = written
    loaded = CorpusManifest.load(root / "manifest.json")
    assert loaded == manifest
    back = loaded.load_examples(root, "test_L2")
    assert len(back) == len(world.l2_test)
    for a, b in zip(back, world.l2_test):
        assert a.canonical == b.canonical and a.labels == b.labels
        assert np.array_equal(a.speech.speech, b.speech.speech)


def test_splits_speaker_disjoint(written):
    _, manifest = written
    assert not manifest.speakers(["test_L2"]) & manifest.speakers(["train_L1", "train_L2"])


def test_leaked_test_speaker_rejected(written):
    root, manifest = written
    test_spk = next(iter(manifest.speakers(["test_L2"])))
    leaky = CorpusManifest([e if e.split != "train_L1" else ManifestEntry(**{**e.__dict__, "speaker": test_spk})
                            for e in manifest.entries])
    with pytest.raises(ManifestError, match="test speakers"):
        leaky.save(root / "bad.json")
    data = json.loads((root / "manifest.json").read_text())
    data["entries"][0]["speaker"] = test_spk
    (root / "manifest.json").write_text(json.dumps(data))
    with pytest.raises(ManifestError):
        CorpusManifest.load(root / "manifest.json")


def test_file_count_mismatch_rejected(written):
    root, manifest = written
    (root / "train_L1" / "00000.npy").unlink()
    with pytest.raises(ManifestError):
        CorpusManifest.load(root / "manifest.json")


def test_extra_file_rejected(written):
    root, _ = written
    np.save(root / "test_L2" / "stray.npy", np.zeros(3))
    with pytest.raises(ManifestError, match="on disk"):
        CorpusManifest.load(root / "manifest.json")


def test_schema_checks(written):
    root, _ = written
    data = json.loads((root / "manifest.json").read_text())
    (root / "m2.json").write_text(json.dumps({**data, "schema_version": 99}))
    with pytest.raises(ManifestError, match="schema"):
        CorpusManifest.load(root / "m2.json")
    bad = dict(data)
    bad["entries"] = [{**data["entries"][0], "split": "dev"}]
    (root / "m3.json").write_text(json.dumps(bad))
    with pytest.raises(ManifestError):
        CorpusManifest.load(root / "m3.json", check_files=False)
