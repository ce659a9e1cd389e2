"""Experiment orchestration: declarative configs, staged runs, metric reports and artifacts.

A run regenerates everything from ``(config, seed)``: the toy world, the
synthetic training data, the detector and its evaluation.  Per seed it
writes the corpus manifest and utterances, model checkpoints and a report;
per run it writes ``metrics.json`` (deterministic), ``pr_curve.csv`` and a
static ``pr_curve.svg``.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .detectors import detect_prlik, detect_prnolik, detect_prpm
from .injector import PerturbationConfig, TrainingExample
from .manifest import CorpusManifest, write_corpus
from .metrics import SEVERITY_BUCKETS, auc, pr_curve, precision_at_recall, severity_report
from .phonemes import Lexicon
from .pm import PMConfig, PMModel, build_pm_corpus, score, train_pm
from .recognizer import RecognizerConfig, RecognizerModel, recognize, train_recognizer
from .stress import (StressConfig, StressModel, StressWorldConfig, generate_stress_errors, make_stress_corpus,
                     stress_probs, train_stress_model)
from .weakly_s import MDNModel, WeaklySConfig, WeaklySData, predict_weakly_s, train_weakly_s
from .world import (METHODS, World, WorldConfig, default_lexicon, make_world, severity_test_set, synthetic_corpus,
                    variant_test_set)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1
DETECTORS = ("prnolik", "prlik", "prpm", "weakly_s")
TEST_SETS = ("l2_test", "variants")
ABLATIONS = ("full", "NO-SYNTH-ERR", "NO-L2-ADAPT", "NO-L1L2-TRAIN")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class StageError(RuntimeError):
    """A run stage failed; artifacts written so far are kept."""

    def __init__(self, stage: str, seed: int | None, cause: BaseException):
        where = f" (seed {seed})" if seed is not None else ""
        super().__init__(f"stage '{stage}' failed{where}: {type(cause).__name__}: {cause}")
        self.stage, self.seed, self.cause = stage, seed, cause


# --- configuration ---------------------------------------------------------------

def _build(cls, values: dict | None, section: str):
    """Dataclass ``cls`` from a config table; lists become tuples, unknown keys are rejected."""
    values = dict(values or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    method: str = "p2p"                       # synthetic data: none, p2p, t2s, s2s
    detector: str = "weakly_s"                # prnolik, prlik, prpm, weakly_s
    seeds: tuple[int, ...] = (0,)
    n_synthetic: int = 400                    # native utterances fed to the generator
    test_set: str = "l2_test"                 # held-out L2 corpus, or the lexicon-variant set
    n_variant_test: int = 200
    severity: bool = False                    # also report per-distance AUC on an S2S severity set
    n_severity: int = 200
    target_recall: float = 0.4
    n_boot: int = 1000
    pm_k: int = 8                             # recogniser hypotheses marginalised by the PM
    write_corpus: bool = True
    lexicon: str | None = None                # lexicon TSV; the packaged toy lexicon by default
    world: WorldConfig = WorldConfig()
    perturbation: PerturbationConfig = PerturbationConfig()
    weakly_s: WeaklySConfig = WeaklySConfig()
    recognizer: RecognizerConfig = RecognizerConfig()
    pm: PMConfig = PMConfig()

    SECTIONS = {"world": WorldConfig, "perturbation": PerturbationConfig, "weakly_s": WeaklySConfig,
                "recognizer": RecognizerConfig, "pm": PMConfig}

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.test_set not in TEST_SETS:
            raise ConfigError(f"test_set must be one of {TEST_SETS}, got {self.test_set!r}")
        seeds = tuple(self.seeds)
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            raise ConfigError("seeds must be a non-empty list of integers")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        if not 0.0 < self.target_recall <= 1.0:
            raise ConfigError("target_recall must lie in (0, 1]")
        if self.n_synthetic < 0 or self.n_boot < 0:
            raise ConfigError("counts must be non-negative")
        if self.lexicon is not None and not Path(self.lexicon).is_file():
            raise ConfigError(f"lexicon {self.lexicon} does not exist")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        top = dict(doc.pop("experiment", {}))
        nested = {}
        for key, sub in cls.SECTIONS.items():
            if key in doc:
                nested[key] = _build(sub, doc.pop(key), key)
        doc.pop("stress", None)
        if doc:
            raise ConfigError(f"unknown sections: {', '.join(sorted(doc))}")
        unknown = sorted(set(top) - ({f.name for f in fields(cls)} - set(cls.SECTIONS)))
        if unknown:
            raise ConfigError(f"[experiment] unknown keys: {', '.join(unknown)}")
        if "seeds" in top:
            top["seeds"] = tuple(top["seeds"])
        return cls(**top, **nested)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_toml(path))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in self.SECTIONS}
        out["seeds"] = list(self.seeds)
        for key in self.SECTIONS:
            out[key] = asdict(getattr(self, key))
        return json.loads(json.dumps(out))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def lexicon_obj(self) -> Lexicon:
        return Lexicon.load(self.lexicon) if self.lexicon else default_lexicon()


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# --- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    auc: float
    precision: float
    recall: float
    threshold: float
    precision_ci: tuple[float, float] | None
    recall_ci: tuple[float, float] | None
    pr_points: tuple[tuple[float, float, float], ...]   # (threshold, precision, recall), highest threshold first
    n_words: int
    n_errors: int
    severity: dict[str, float | None] | None = None

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc outside [0, 1]")
        for point, ci in ((self.precision, self.precision_ci), (self.recall, self.recall_ci)):
            if ci is not None and not ci[0] <= point <= ci[1]:
                raise ValueError("confidence interval does not contain the point estimate")
        recalls = [p[2] for p in self.pr_points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValueError("PR points must be ordered by non-decreasing recall")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pr_points"] = [list(p) for p in self.pr_points]
        for k in ("precision_ci", "recall_ci"):
            d[k] = list(d[k]) if d[k] is not None else None
        return d


def make_report(scores: Sequence[np.ndarray], labels: Sequence[Sequence[int]], target_recall: float,
                n_boot: int = 1000, seed: int = 0, severity: dict | None = None) -> MetricsReport:
    """Word-level metrics; the bootstrap resamples utterances."""
    s = np.concatenate([np.asarray(x, dtype=np.float64) for x in scores])
    y = np.concatenate([np.asarray(x, dtype=int) for x in labels])
    groups = np.concatenate([np.full(len(x), k) for k, x in enumerate(scores)])
    op = precision_at_recall(s, y, target_recall, groups=groups, n_boot=n_boot, seed=seed)
    prec, rec, thr = pr_curve(s, y)
    points = tuple((float(t), float(p), float(r)) for p, r, t in zip(prec, rec, thr))
    return MetricsReport(auc(s, y), op.precision, op.recall, op.threshold, op.precision_ci, op.recall_ci,
                         points, int(len(y)), int(y.sum()), severity)


# --- stages ----------------------------------------------------------------------

@dataclass
class SeedRun:
    """Everything one seed of a run produced (models are kept in memory for reuse)."""

    seed: int
    world: World
    synthetic: list[TrainingExample]
    models: dict[str, Any] = field(default_factory=dict)
    report: MetricsReport | None = None


@contextmanager
def _stage(name: str, seed: int | None):
    log.info("%s (seed %s)", name, seed)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, seed, exc) from exc


def generate(cfg: ExperimentConfig, seed: int, out_dir: Path | None = None) -> SeedRun:
    world = make_world(replace(cfg.world, seed=seed), cfg.lexicon_obj())
    synthetic = synthetic_corpus(world.l1, cfg.method, cfg.n_synthetic, seed, replace(cfg.perturbation, seed=seed))
    if out_dir is not None and cfg.write_corpus:
        entries = []
        for split in ("train_L1", "train_L2", "test_L2"):
            entries += write_corpus(out_dir, world.corpora[split], split, seed, f"corpus/{split}")
        entries += write_corpus(out_dir, synthetic, "train_L1", seed, f"corpus/synthetic_{cfg.method}")
        manifest = CorpusManifest(entries)
        manifest.save(out_dir / "manifest.json")
        manifest.check_files(out_dir)
    return SeedRun(seed, world, synthetic)


def _recognizer_corpus(run: SeedRun):
    pairs = [(e.speech, e.speech.canonical) for e in run.world.l1]
    pairs += [(e.speech, e.speech.canonical) for e in run.synthetic if e.provenance in ("t2s", "s2s")]
    return pairs


def train(cfg: ExperimentConfig, run: SeedRun, ckpt_dir: Path | None = None, reuse: bool = False) -> None:
    """Train (or reload) the models the detector needs."""
    seed = run.seed

    def cached(name, loader):
        stem = ckpt_dir / name if ckpt_dir is not None else None
        if reuse and stem is not None and stem.with_suffix(".pt").is_file():
            return loader(stem), stem
        return None, stem

    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    if cfg.detector == "weakly_s":
        model, stem = cached("weakly_s", MDNModel.load)
        if model is None:
            model = train_weakly_s(WeaklySData(run.world.l1, run.world.l2_train, run.synthetic),
                                   replace(cfg.weakly_s, seed=seed))
            if stem is not None:
                model.save(stem)
        run.models["weakly_s"] = model
        return
    rec, stem = cached("recognizer", RecognizerModel.load)
    if rec is None:
        rec = train_recognizer(_recognizer_corpus(run), replace(cfg.recognizer, seed=seed))
        if stem is not None:
            rec.save(stem)
    run.models["recognizer"] = rec
    if cfg.detector == "prpm":
        pm, stem = cached("pm", PMModel.load)
        if pm is None:
            pm = train_pm(build_pm_corpus(rec, run.world.l1), replace(cfg.pm, seed=seed))
            if stem is not None:
                pm.save(stem)
        run.models["pm"] = pm


def score_examples(cfg: ExperimentConfig, run: SeedRun, examples: Sequence[TrainingExample]) -> list[np.ndarray]:
    """Per-word error scores of the configured detector."""
    if cfg.detector == "weakly_s":
        return predict_weakly_s(run.models["weakly_s"], examples)
    rec = run.models["recognizer"]
    out = []
    for ex in examples:
        res = recognize(rec, ex.speech)
        if cfg.detector == "prnolik":
            probs = detect_prnolik(res, ex.canonical).probs
        elif cfg.detector == "prlik":
            probs = detect_prlik(res, ex.canonical).probs
        else:
            probs = detect_prpm(res, score(run.models["pm"], res, ex.canonical, k=cfg.pm_k), ex.canonical).probs
        out.append(np.asarray(probs))
    return out


def evaluation_examples(cfg: ExperimentConfig, run: SeedRun) -> list[TrainingExample]:
    if cfg.test_set == "variants":
        return variant_test_set(run.world, cfg.n_variant_test, run.seed)
    return run.world.l2_test


def evaluate(cfg: ExperimentConfig, run: SeedRun) -> MetricsReport:
    test = evaluation_examples(cfg, run)
    scores = score_examples(cfg, run, test)
    severity = None
    if cfg.severity:
        sev = severity_test_set(run.world, cfg.n_severity, run.seed)
        s = np.concatenate(score_examples(cfg, run, sev))
        y = np.concatenate([e.labels.word_errors for e in sev])
        d = np.concatenate([e.info["distances"] for e in sev])
        severity = severity_report(s, y, d)
    return make_report(scores, [e.labels.word_errors for e in test], cfg.target_recall, cfg.n_boot, run.seed,
                       severity)


# --- runs ------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict[int, SeedRun]
    summary: dict

    @property
    def reports(self) -> dict[int, MetricsReport]:
        return {s: r.report for s, r in self.runs.items()}

    def metrics_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA, "name": self.config.name, "config": self.config.to_dict(),
                "per_seed": {str(s): r.report.to_dict() for s, r in self.runs.items()}, "summary": self.summary}


def summarize(reports: dict[int, MetricsReport]) -> dict:
    vals = list(reports.values())
    out = {
        "seeds": sorted(reports),
        "auc": [r.auc for r in vals],
        "auc_median": float(np.median([r.auc for r in vals])),
        "precision_median": float(np.median([r.precision for r in vals])),
        "recall_median": float(np.median([r.recall for r in vals])),
    }
    if all(r.severity is not None for r in vals):
        sev = {}
        for b in SEVERITY_BUCKETS:
            got = [r.severity[b] for r in vals if r.severity.get(b) is not None]
            sev[b] = float(np.median(got)) if got else None
        out["severity_median"] = sev
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None, reuse_checkpoints: bool = False,
                   stages: Sequence[str] = ("generate", "train", "evaluate")) -> ExperimentResult:
    """Generate, train and evaluate every seed; write artifacts under ``out_dir`` when given.

    Stage failures raise :class:`StageError`; files written before the
    failure stay on disk.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
    runs: dict[int, SeedRun] = {}
    for seed in cfg.seeds:
        seed_dir = out / f"seed{seed}" if out is not None else None
        if seed_dir is not None:
            seed_dir.mkdir(exist_ok=True)
        with _stage("generate", seed):
            run = generate(cfg, seed, seed_dir if "generate" in stages else None)
        if "train" in stages:
            with _stage("train", seed):
                train(cfg, run, seed_dir / "checkpoints" if seed_dir is not None else None, reuse_checkpoints)
        if "evaluate" in stages:
            with _stage("evaluate", seed):
                run.report = evaluate(cfg, run)
            if seed_dir is not None:
                (seed_dir / "report.json").write_text(json.dumps(run.report.to_dict(), indent=1, sort_keys=True))
        runs[seed] = run
    summary = summarize({s: r.report for s, r in runs.items()}) if "evaluate" in stages else {}
    result = ExperimentResult(cfg, runs, summary)
    if out is not None and "evaluate" in stages:
        with _stage("report", None):
            write_artifacts(result, out)
    return result


def write_artifacts(result: ExperimentResult, out: Path) -> None:
    (out / "metrics.json").write_text(json.dumps(result.metrics_dict(), indent=1, sort_keys=True))
    with (out / "pr_curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "threshold", "precision", "recall"])
        for seed, rep in result.reports.items():
            for t, p, r in rep.pr_points:
                w.writerow([seed, repr(t), repr(p), repr(r)])
    plot_pr_curves({f"seed {s}": r for s, r in result.reports.items()}, out / "pr_curve.svg",
                   title=result.config.name)


def plot_pr_curves(reports: dict[str, MetricsReport], path, title: str = "") -> None:
    """Static SVG of raw PR operating points (no interpolation)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "synthcapt"
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, rep in reports.items():
        pts = np.array([(r, p) for _, p, r in rep.pr_points])
        ax.step(pts[:, 0], pts[:, 1], where="post", label=f"{label} (AUC {rep.auc:.3f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


TABLE_HEADER = ("variant", "auc_median", "precision_median", "recall_median", "aucs")


def _table_row(name: str, res: ExperimentResult) -> list:
    s = res.summary
    return [name, f"{s['auc_median']:.4f}", f"{s['precision_median']:.4f}", f"{s['recall_median']:.4f}",
            " ".join(f"{a:.4f}" for a in s["auc"])]


def compare_methods(cfg: ExperimentConfig, out_dir, methods: Sequence[str] = ("p2p", "t2s", "s2s")) -> dict[str, ExperimentResult]:
    """One run per generation method with identical seeds; writes ``methods.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {m: run_experiment(cfg.with_(method=m, name=f"{cfg.name}-{m}"), out / m) for m in methods}
    _write_table(out / "methods.csv", TABLE_HEADER, [_table_row(m, r) for m, r in results.items()])
    return results


def ablation_config(cfg: ExperimentConfig, variant: str) -> ExperimentConfig:
    if variant == "full":
        return cfg
    if variant == "NO-SYNTH-ERR":
        return cfg.with_(method="none")
    if variant == "NO-L2-ADAPT":
        return cfg.with_(weakly_s=replace(cfg.weakly_s, l2_adapt=False))
    if variant == "NO-L1L2-TRAIN":
        return cfg.with_(weakly_s=replace(cfg.weakly_s, use_l1l2=False))
    raise ConfigError(f"unknown ablation {variant!r}")


def ablate(cfg: ExperimentConfig, out_dir, variants: Sequence[str] = ABLATIONS) -> dict[str, ExperimentResult]:
    """WEAKLY-S ablations with identical seeds; writes ``ablation.csv``."""
    if cfg.detector != "weakly_s":
        raise ConfigError("ablations apply to the weakly_s detector")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {v: run_experiment(ablation_config(cfg, v).with_(name=f"{cfg.name}-{v}"), out / v) for v in variants}
    _write_table(out / "ablation.csv", TABLE_HEADER, [_table_row(v, r) for v, r in results.items()])
    return results


# --- lexical stress --------------------------------------------------------------

@dataclass(frozen=True)
class StressExperimentConfig:
    name: str = "stress"
    seeds: tuple[int, ...] = (0,)
    n_synthetic: int = 1000                   # words synthesised twice (correct and moved stress)
    target_recall: float = 0.5
    n_boot: int = 1000
    world: StressWorldConfig = StressWorldConfig()
    model: StressConfig = StressConfig()

    def __post_init__(self):
        seeds = tuple(self.seeds)
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            raise ConfigError("seeds must be a non-empty list of integers")
        object.__setattr__(self, "seeds", seeds)
        if not 0.0 < self.target_recall <= 1.0:
            raise ConfigError("target_recall must lie in (0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "StressExperimentConfig":
        doc = dict(doc)
        nested = {}
        if "world" in doc:
            nested["world"] = _build(StressWorldConfig, doc.pop("world"), "stress.world")
        if "model" in doc:
            nested["model"] = _build(StressConfig, doc.pop("model"), "stress.model")
        unknown = sorted(set(doc) - {"name", "seeds", "n_synthetic", "target_recall", "n_boot"})
        if unknown:
            raise ConfigError(f"[stress] unknown keys: {', '.join(unknown)}")
        if "seeds" in doc:
            doc["seeds"] = tuple(doc["seeds"])
        return cls(**doc, **nested)

    @classmethod
    def from_toml(cls, path) -> "StressExperimentConfig":
        return cls.from_dict(load_toml(path).get("stress", {}))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return json.loads(json.dumps(d))


STRESS_VARIANTS = (("Att_TTS", True, True), ("Att_NoTTS", True, False),
                   ("NoAtt_TTS", False, True), ("NoAtt_NoTTS", False, False))


def stress_scores(model: StressModel, examples) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-syllable mismatch probabilities and per-syllable error labels."""
    feats = [ex.features(model.config.ternary) for ex in examples]
    probs = stress_probs(model, feats)
    scores = [1.0 - p[np.arange(f.n_syllables), list(f.canonical)] for p, f in zip(probs, feats)]
    labels = [np.array(ex.syllable_errors(model.config.ternary)) for ex in examples]
    return scores, labels


def run_stress_experiment(cfg: StressExperimentConfig, out_dir=None,
                          variants: Sequence[tuple[str, bool, bool]] = STRESS_VARIANTS) -> dict:
    """Attention / non-attention stress models with and without T2S stress errors.

    Reports word-level metrics (a word's score is its largest syllable
    mismatch probability) and syllable-level AUC and precision.
    """
    out = Path(out_dir) if out_dir is not None else None
    per_seed: dict[str, dict] = {}
    for seed in cfg.seeds:
        with _stage("stress corpus", seed):
            corpus = make_stress_corpus(replace(cfg.world, seed=seed))
            human = corpus["train_L1"] + corpus["train_L2"]
            synthetic = generate_stress_errors(default_lexicon(), cfg.n_synthetic, seed) if cfg.n_synthetic else []
        rows = {}
        for name, attention, augmented in variants:
            with _stage(f"stress {name}", seed):
                model = train_stress_model(human + (synthetic if augmented else []), replace(cfg.model, seed=seed),
                                           attention=attention)
                if out is not None:
                    (out / f"seed{seed}").mkdir(parents=True, exist_ok=True)
                    model.save(out / f"seed{seed}" / name)
                syl_scores, syl_labels = stress_scores(model, corpus["test_L2"])
                word = make_report([np.array([s.max()]) for s in syl_scores],
                                   [[int(y.max())] for y in syl_labels], cfg.target_recall, cfg.n_boot, seed)
                syl = make_report(syl_scores, syl_labels, cfg.target_recall, cfg.n_boot, seed)
                rows[name] = {"word": word.to_dict(), "syllable": syl.to_dict()}
        per_seed[str(seed)] = rows
    summary = {name: {"word_auc_median": float(np.median([per_seed[str(s)][name]["word"]["auc"] for s in cfg.seeds])),
                      "word_auc": [per_seed[str(s)][name]["word"]["auc"] for s in cfg.seeds],
                      "word_precision_median": float(np.median([per_seed[str(s)][name]["word"]["precision"]
                                                                for s in cfg.seeds])),
                      "syllable_auc_median": float(np.median([per_seed[str(s)][name]["syllable"]["auc"]
                                                              for s in cfg.seeds]))}
               for name, _, _ in variants}
    result = {"schema_version": REPORT_SCHEMA, "name": cfg.name, "config": cfg.to_dict(), "per_seed": per_seed,
              "summary": summary}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "stress_metrics.json").write_text(json.dumps(result, indent=1, sort_keys=True))
        _write_table(out / "stress_table.csv", ("variant", "word_auc_median", "word_precision_median",
                                                "syllable_auc_median", "word_aucs"),
                     [[n, f"{s['word_auc_median']:.4f}", f"{s['word_precision_median']:.4f}",
                       f"{s['syllable_auc_median']:.4f}", " ".join(f"{a:.4f}" for a in s["word_auc"])]
                      for n, s in summary.items()])
    return result


__all__ = ["ExperimentConfig", "StressExperimentConfig", "MetricsReport", "ExperimentResult", "SeedRun",
           "ConfigError", "StageError", "run_experiment", "run_stress_experiment", "compare_methods", "ablate",
           "ablation_config", "make_report", "summarize", "plot_pr_curves", "load_toml", "DETECTORS", "TEST_SETS",
           "ABLATIONS", "STRESS_VARIANTS"]
