"""Run configuration, comparison runs and the text reports they emit."""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import corpus, flowgraph, lexer, neuralnet, training
from .errors import ChecksumMismatch, EmptyCorpus, NoMethodsFound, ProgEmbedError

log = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
RECONSTRUCTION_COUNT = 5


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs. Keys of a config file map onto these fields."""

    train: training.TrainConfig = field(default_factory=training.TrainConfig)
    count: int = 500
    test_fraction: float = 0.1
    max_depth: int = 2
    max_statements: int = 4
    source: str = ""
    extension: str = ".java"
    manifest: str = ""
    vocab: str = ""
    regimes: tuple = flowgraph.REGIMES
    out: str = "out"

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        kwargs = {"train": training.TrainConfig.from_mapping(values)}
        for f in fields(cls):
            if f.name == "train" or f.name not in values:
                continue
            value = values[f.name]
            if f.name == "regimes":
                value = tuple(r.strip() for r in str(value).split(",") if r.strip())
                unknown = set(value) - set(flowgraph.REGIMES)
                if unknown or not value:
                    raise ValueError(f"regimes must be a non-empty subset of {flowgraph.REGIMES}")
            elif f.type == "int":
                value = int(value)
            elif f.type == "float":
                value = float(value)
            kwargs[f.name] = value
        return cls(**kwargs)

    def to_text(self) -> str:
        """Canonical ``key=value`` form; hashed into report provenance.

        The output directory is left out so that a run reproduces byte for
        byte wherever it is written.
        """
        items = dict(self.train.as_dict())
        for f in fields(self):
            if f.name not in ("train", "out"):
                value = getattr(self, f.name)
                items[f.name] = ",".join(value) if f.name == "regimes" else value
        return "".join(f"{k}={items[k]}\n" for k in sorted(items))

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def shape(self) -> corpus.GeneratorShape:
        return corpus.GeneratorShape(max_depth=self.max_depth, max_statements=self.max_statements)


def read_config_file(path) -> dict:
    values = {}
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{number}: expected key=value")
        values[key.strip()] = value.strip()
    return values


def load_vocabulary(cfg: RunConfig) -> lexer.Vocabulary:
    return lexer.Vocabulary.load(cfg.vocab) if cfg.vocab else lexer.default_vocabulary()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance_line(cfg: RunConfig, vocab: lexer.Vocabulary, **extra) -> str:
    items = {
        "format_version": REPORT_FORMAT_VERSION,
        "seed": cfg.train.seed,
        "config_sha256": cfg.checksum,
        "vocab_sha256": vocab.checksum,
    }
    items.update(extra)
    return "# " + " ".join(f"{k}={v}" for k, v in items.items())


# --------------------------------------------------------------------------
# corpus commands


def synthesize(cfg: RunConfig) -> corpus.CorpusManifest:
    methods = corpus.generate_synthetic(cfg.train.seed, cfg.count, cfg.shape())
    return corpus.split_corpus(methods, cfg.train.seed, cfg.test_fraction)


def ingest(cfg: RunConfig, vocab: lexer.Vocabulary):
    """Extract, lex and split the methods of ``cfg.source``.

    Returns ``(manifest, skipped)``; ``skipped`` pairs each rejected file or
    method with the reason.
    """
    methods, skipped_files = corpus.read_sources(cfg.source, cfg.extension)
    kept, skipped_methods = corpus.filter_methods(methods, vocab)
    if not kept:
        raise NoMethodsFound(f"no usable methods under {cfg.source}")
    manifest = corpus.split_corpus(kept, cfg.train.seed, cfg.test_fraction)
    return manifest, skipped_files + skipped_methods


def write_corpus(manifest, cfg: RunConfig, vocab) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.tsv"
    corpus.write_manifest(manifest, path, vocab)
    vocab.save(out / "vocab.txt")
    return path


def resolve_manifest(cfg: RunConfig) -> corpus.CorpusManifest:
    """The manifest named in ``cfg``, or a synthetic one built from it."""
    if cfg.manifest:
        path = Path(cfg.manifest)
        if not path.is_file():
            raise FileNotFoundError(f"manifest {path} does not exist")
        return corpus.read_manifest(path)
    return synthesize(cfg)


# --------------------------------------------------------------------------
# training and comparison


@dataclass
class RegimeRun:
    regime: str
    params: neuralnet.GcaeParameters
    result: training.TrainResult
    test: training.MetricsRecord | None
    reconstructions: list


def run_regime(manifest, cfg: RunConfig, regime: str, vocab) -> RegimeRun:
    tcfg = replace(cfg.train, regime=regime)
    train_samples = training.prepare_samples(manifest.train, vocab, regime)
    test_samples = training.prepare_samples(manifest.test, vocab, regime)
    result = training.fit_samples(train_samples, vocab.size, tcfg)
    # a manifest without a test split still trains; only compare insists on one
    test = training.evaluate_samples(result.params, test_samples, tcfg) if test_samples else None
    recon = [
        (s.name, list(s.lexemes), training.reconstruct(result.params, s, vocab, tcfg))
        for s in test_samples[:RECONSTRUCTION_COUNT]
    ]
    return RegimeRun(regime, result.params, result, test, recon)


def model_meta(cfg: RunConfig, regime: str, vocab) -> dict:
    return {
        "regime": regime,
        "seed": cfg.train.seed,
        "final_activation": cfg.train.final_activation,
        "vocab_sha256": vocab.checksum,
        "config_sha256": cfg.checksum,
    }


def write_regime_outputs(run: RegimeRun, cfg: RunConfig, vocab, out: Path) -> dict:
    """Model file, metrics log and per-epoch curve for one regime."""
    paths = {
        "model": out / f"model_{run.regime}.txt",
        "metrics": out / f"metrics_{run.regime}.csv",
        "curve": out / f"curve_{run.regime}.csv",
    }
    neuralnet.save_model(paths["model"], run.params, model_meta(cfg, run.regime, vocab))
    rows = [provenance_line(cfg, vocab), training.METRICS_HEADER]
    rows += training.metrics_rows(run.result, run.regime, run.test)
    paths["metrics"].write_text("\n".join(rows) + "\n", encoding="utf-8")
    curve = [provenance_line(cfg, vocab), "epoch,mean_loss,loss_sigma,mean_accuracy,accuracy_sigma"]
    for rec in run.result.epochs:
        curve.append(f"{rec.epoch},{rec.mean_loss!r},{rec.std_loss!r},{rec.mean_accuracy!r},{rec.std_accuracy!r}")
    paths["curve"].write_text("\n".join(curve) + "\n", encoding="utf-8")
    return paths


def metrics_table(runs, cfg, vocab) -> str:
    lines = [provenance_line(cfg, vocab), "regime\tmean_loss\tloss_sigma\tmean_accuracy\taccuracy_sigma"]
    for run in runs:
        t = run.test
        lines.append(f"{run.regime}\t{t.mean_loss!r}\t{t.std_loss!r}\t{t.mean_accuracy!r}\t{t.std_accuracy!r}")
    return "\n".join(lines) + "\n"


def reconstruction_table(runs, cfg, vocab) -> str:
    lines = [provenance_line(cfg, vocab), "method\tname\trow\ttokens"]
    if runs:
        for k, (name, original, _) in enumerate(runs[0].reconstructions):
            lines.append(f"{k}\t{name}\toriginal\t{' '.join(original)}")
            for run in runs:
                lines.append(f"{k}\t{name}\t{run.regime}\t{' '.join(run.reconstructions[k][2])}")
    return "\n".join(lines) + "\n"


def vocabulary_frequencies(manifest, vocab) -> Counter:
    counts = Counter({lex: 0 for lex in vocab.lexemes})
    for entry in manifest.entries:
        seq, _ = corpus.prepare_method(entry, vocab)
        counts.update(seq.lexemes)
    return counts


def frequency_table(counts: Counter, cfg, vocab) -> str:
    total = sum(counts.values()) or 1
    order = sorted(vocab.lexemes, key=lambda lex: (-counts[lex], vocab.index_of[lex]))
    lines = [provenance_line(cfg, vocab), "lexeme\tcount\tfrequency"]
    lines += [f"{lex}\t{counts[lex]}\t{counts[lex] / total!r}" for lex in order]
    return "\n".join(lines) + "\n"


@dataclass
class ComparisonReport:
    runs: list[RegimeRun]
    failures: dict
    paths: dict

    def by_regime(self):
        return {run.regime: run for run in self.runs}


def compare(cfg: RunConfig, manifest=None, vocab=None) -> ComparisonReport:
    """Train one model per regime on the same split and write all reports.

    Every regime starts from the same seed, so the initial weights and the
    shuffling order are shared; only the propagation matrix differs.
    """
    vocab = vocab or load_vocabulary(cfg)
    manifest = manifest if manifest is not None else resolve_manifest(cfg)
    if not manifest.test:
        raise EmptyCorpus("comparison needs a non-empty test split")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    runs, failures, paths = [], {}, {}
    for regime in cfg.regimes:
        try:
            run = run_regime(manifest, cfg, regime, vocab)
        except ProgEmbedError as exc:
            log.error("regime %s failed: %s", regime, exc)
            failures[regime] = str(exc)
            continue
        runs.append(run)
        paths[regime] = write_regime_outputs(run, cfg, vocab, out)
    paths["metrics_table"] = out / "metrics_table.tsv"
    paths["metrics_table"].write_text(metrics_table(runs, cfg, vocab), encoding="utf-8")
    paths["reconstructions"] = out / "reconstructions.tsv"
    paths["reconstructions"].write_text(reconstruction_table(runs, cfg, vocab), encoding="utf-8")
    paths["vocab_frequencies"] = out / "vocab_frequencies.tsv"
    paths["vocab_frequencies"].write_text(
        frequency_table(vocabulary_frequencies(manifest, vocab), cfg, vocab), encoding="utf-8"
    )
    if failures:
        lines = [f"{regime}\t{reason}" for regime, reason in sorted(failures.items())]
        paths["failures"] = out / "failures.tsv"
        paths["failures"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ComparisonReport(runs, failures, paths)


def train_one(cfg: RunConfig, manifest=None, vocab=None) -> dict:
    vocab = vocab or load_vocabulary(cfg)
    manifest = manifest if manifest is not None else resolve_manifest(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    run = run_regime(manifest, cfg, cfg.train.regime, vocab)
    return write_regime_outputs(run, cfg, vocab, out)


# --------------------------------------------------------------------------
# inspection and reconstruction


def parse_method(text: str) -> corpus.MethodText:
    """The first method declared in ``text``."""
    methods = corpus.extract_methods(text)
    if not methods:
        raise NoMethodsFound("the text declares no method with a body")
    return methods[0]


def inspect_cfg(text: str, regime: str = "sequence", vocab=None) -> tuple[flowgraph.FlowGraph, list[str]]:
    vocab = vocab or lexer.default_vocabulary()
    seq, _ = corpus.prepare_method(parse_method(text), vocab)
    return flowgraph.regime_graph(seq, regime), list(seq.lexemes)


def format_inspection(graph: flowgraph.FlowGraph, lexemes) -> str:
    lines = [graph.to_text().rstrip("\n")]
    lines.append("# tokens: " + " ".join(f"{k}:{lex}" for k, lex in enumerate(lexemes)))
    rules = " ".join(f"{tok}={graph.rules.get(tok, 0)}" for tok in lexer.CONTROL_TOKENS)
    lines.append(f"# rules: {rules}")
    lines.append(f"# edges={len(graph.edges)}")
    return "\n".join(lines) + "\n"


def reconstruct_text(model_path, text: str, vocab=None) -> list[str]:
    vocab = vocab or lexer.default_vocabulary()
    params, meta = neuralnet.load_model(model_path)
    if meta.get("vocab_sha256") != vocab.checksum or params.V != vocab.size:
        raise ChecksumMismatch("model was trained with a different vocabulary")
    method = parse_method(text)
    tcfg = training.TrainConfig(regime=meta["regime"], final_activation=meta.get("final_activation", "relu"))
    sample = training.prepare_samples([method], vocab, tcfg.regime)[0]
    return training.reconstruct(params, sample, vocab, tcfg)
