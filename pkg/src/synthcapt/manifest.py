"""Versioned corpus manifests: utterance files on disk plus labels, provenance and split tags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .injector import PROVENANCES, TrainingExample
from .phonemes import ErrorLabels, PhonemeSeq
from .speech import Utterance

MANIFEST_SCHEMA = 1
SPLITS = ("train_L1", "train_L2", "test_L2")
TRAIN_SPLITS = ("train_L1", "train_L2")


class ManifestError(ValueError):
    """The manifest is malformed, inconsistent with the files on disk, or leaks test speakers."""


@dataclass(frozen=True)
class ManifestEntry:
    path: str                        # utterance stem relative to the manifest directory
    canonical: str                   # canonical phonemes, words separated by " | "
    labels: tuple[int, ...]          # per-word error labels
    phoneme_labels: tuple[int, ...]  # per-phoneme error labels
    provenance: str                  # "original", "p2p", "t2s" or "s2s"
    speaker: int
    seed: int
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split tag {self.split!r}")
        if self.provenance not in PROVENANCES:
            raise ManifestError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        object.__setattr__(self, "phoneme_labels", tuple(int(y) for y in self.phoneme_labels))


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    schema_version: int = MANIFEST_SCHEMA

    def speakers(self, splits: Iterable[str]) -> set[int]:
        splits = set(splits)
        return {e.speaker for e in self.entries if e.split in splits}

    def check_speaker_disjoint(self) -> None:
        leaked = self.speakers(["test_L2"]) & self.speakers(TRAIN_SPLITS)
        if leaked:
            raise ManifestError(f"test speakers present in training splits: {sorted(leaked)}")

    def check_files(self, root) -> None:
        """Every entry resolves to an utterance and the corpus directory holds nothing else."""
        root = Path(root)
        stems = {e.path for e in self.entries}
        if len(stems) != len(self.entries):
            raise ManifestError("duplicate utterance paths")
        for stem in stems:
            if not (root / f"{stem}.npy").is_file() or not (root / f"{stem}.json").is_file():
                raise ManifestError(f"unresolvable utterance {stem}")
        dirs = {(root / s).parent for s in stems}
        on_disk = sum(1 for d in dirs for _ in d.glob("*.npy"))
        if on_disk != len(self.entries):
            raise ManifestError(f"{len(self.entries)} entries but {on_disk} utterance files on disk")

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "entries": [asdict(e) for e in self.entries]}

    def save(self, path) -> None:
        self.check_speaker_disjoint()
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path, check_files: bool = True) -> "CorpusManifest":
        path = Path(path)
        data = json.loads(path.read_text())
        if data.get("schema_version") != MANIFEST_SCHEMA:
            raise ManifestError(f"{path}: unsupported manifest schema {data.get('schema_version')!r}")
        try:
            manifest = cls([ManifestEntry(**e) for e in data["entries"]])
        except TypeError as exc:
            raise ManifestError(f"{path}: malformed entry ({exc})") from None
        manifest.check_speaker_disjoint()
        if check_files:
            manifest.check_files(path.parent)
        return manifest

    def load_examples(self, root, split: str | None = None) -> list[TrainingExample]:
        """Rebuild training examples (utterance, canonical, labels) from disk."""
        root = Path(root)
        out = []
        for e in self.entries:
            if split is not None and e.split != split:
                continue
            u = Utterance.load(root / e.path)
            r = PhonemeSeq.parse(e.canonical)
            out.append(TrainingExample(ErrorLabels(e.phoneme_labels, e.labels), u, r, e.provenance,
                                       {"split": e.split, "speaker": e.speaker}))
        return out


def write_corpus(root, examples: Sequence[TrainingExample], split: str, seed: int, prefix: str) -> list[ManifestEntry]:
    """Save every example's utterance under ``root/prefix`` and return its manifest entries."""
    root = Path(root)
    (root / prefix).mkdir(parents=True, exist_ok=True)
    entries = []
    for k, ex in enumerate(examples):
        stem = f"{prefix}/{k:05d}"
        ex.speech.save(root / stem)
        entries.append(ManifestEntry(stem, str(ex.canonical), ex.labels.word_errors, ex.labels.phoneme_errors,
                                     ex.provenance, int(ex.speech.speaker.speaker_id), int(seed), split))
    return entries


__all__ = ["CorpusManifest", "ManifestEntry", "ManifestError", "write_corpus", "MANIFEST_SCHEMA", "SPLITS"]
