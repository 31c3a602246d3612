"""Loss, Adam, and the per-regime training and evaluation loops."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import corpus, flowgraph, lexer, neuralnet
from .errors import DimensionMismatch, EmptyCorpus, NonFiniteLoss

log = logging.getLogger(__name__)

LOG_EVERY = 100


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 32
    latent: int = 4
    depth: int = 0
    learning_rate: float = 1e-3
    l2_lambda: float = 1e-5
    epochs: int = 5
    seed: int = 1
    regime: str = "sequence"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    final_activation: str = "relu"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.epsilon <= 0 or self.l2_lambda < 0:
            raise ValueError("rates must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.regime not in flowgraph.REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.final_activation not in neuralnet.FINAL_ACTIVATIONS:
            raise ValueError(f"unknown final activation {self.final_activation!r}")
        if min(self.hidden, self.latent) < 1 or self.depth < 0:
            raise ValueError("layer sizes must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainConfig":
        """Build from string values (config files, CLI); unknown keys are ignored."""
        kwargs = {}
        for f in fields(cls):
            if f.name in values and values[f.name] is not None:
                kwargs[f.name] = _coerce(f.type, values[f.name])
        return cls(**kwargs)

    def as_dict(self):
        return asdict(self)


def _coerce(type_name, value):
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    return str(value)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: neuralnet.GcaeParameters) -> "AdamState":
        return cls([np.zeros_like(W) for W in params.weights], [np.zeros_like(W) for W in params.weights])


def adam_step(params: neuralnet.GcaeParameters, grads, state: AdamState, cfg: TrainConfig):
    """Bias-corrected Adam update, applied to ``params`` and ``state`` in place."""
    if len(grads) != len(params.weights):
        raise DimensionMismatch("one gradient per weight matrix is required")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for W, g, m, v in zip(params.weights, grads, state.m, state.v):
        if g.shape != W.shape:
            raise DimensionMismatch(f"gradient {g.shape} does not match weight {W.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        W -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
    return params, state


def cross_entropy(R, targets) -> float:
    """Mean over positions of ``-log softmax(R_k)[targets[k]]``, in nats."""
    R = np.asarray(R, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if R.ndim != 2 or targets.shape != (R.shape[0],):
        raise DimensionMismatch(f"{targets.size} targets for logits of shape {R.shape}")
    shifted = R - R.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_norm - shifted[np.arange(R.shape[0]), targets]))


def token_accuracy(R, targets) -> float:
    """Share of positions whose argmax matches; ties go to the lowest index."""
    R = np.asarray(R)
    targets = np.asarray(targets, dtype=np.int64)
    if R.ndim != 2 or targets.shape != (R.shape[0],):
        raise DimensionMismatch(f"{targets.size} targets for logits of shape {R.shape}")
    return float(np.mean(np.argmax(R, axis=1) == targets))


@dataclass
class MetricsRecord:
    """Per-method losses and accuracies plus their aggregates.

    Standard deviations use the population formula (divide by N).
    """

    losses: list[float]
    accuracies: list[float]
    epoch: int = 0
    wall_clock: float = 0.0

    @property
    def mean_loss(self):
        return float(np.mean(self.losses))

    @property
    def std_loss(self):
        return float(np.std(self.losses))

    @property
    def mean_accuracy(self):
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self):
        return float(np.std(self.accuracies))


@dataclass
class Sample:
    name: str
    indices: np.ndarray
    X: np.ndarray
    Ahat: np.ndarray
    lexemes: tuple = ()


def prepare_samples(methods, vocab: lexer.Vocabulary, regime: str) -> list[Sample]:
    samples = []
    for m in methods:
        seq, _ = corpus.prepare_method(m, vocab)
        graph = flowgraph.regime_graph(seq, regime)
        samples.append(Sample(
            m.name,
            np.asarray(seq.indices, dtype=np.int64),
            lexer.one_hot(seq, vocab.size),
            flowgraph.normalize(graph),
            seq.lexemes,
        ))
    return samples


@dataclass
class TrainResult:
    params: neuralnet.GcaeParameters
    epochs: list[MetricsRecord]
    # (epoch, step, running mean loss, running mean accuracy)
    curve: list[tuple] = field(default_factory=list)


def epoch_order(seed: int, epoch: int, count: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64([seed, epoch])).permutation(count)


def fit_samples(samples, V, cfg: TrainConfig, params=None) -> TrainResult:
    """Batch-size-one training: one Adam step per method per epoch."""
    if not samples:
        raise EmptyCorpus("training split is empty")
    if params is None:
        params = neuralnet.init_parameters(V, cfg.hidden, cfg.latent, cfg.depth, cfg.seed)
    state = AdamState.zeros_like(params)
    records, curve = [], []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        losses, accs = [], []
        for k in epoch_order(cfg.seed, epoch, len(samples)):
            s = samples[k]
            trace = neuralnet.gcae_forward(s.X, s.Ahat, params, cfg.final_activation)
            loss = cross_entropy(trace.R, s.indices)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, s.name)
            losses.append(loss)
            accs.append(token_accuracy(trace.R, s.indices))
            grads = neuralnet.gcae_backward(trace, s.X, s.Ahat, params, s.indices, cfg.l2_lambda)
            adam_step(params, grads, state, cfg)
            step += 1
            if step % LOG_EVERY == 0:
                curve.append((epoch, step, float(np.mean(losses)), float(np.mean(accs))))
        records.append(MetricsRecord(losses, accs, epoch, time.perf_counter() - started))
        curve.append((epoch, step, records[-1].mean_loss, records[-1].mean_accuracy))
        log.info("%s epoch %d: loss %.5f acc %.4f", cfg.regime, epoch, records[-1].mean_loss, records[-1].mean_accuracy)
    return TrainResult(params, records, curve)


def fit(manifest: corpus.CorpusManifest, cfg: TrainConfig, vocab: lexer.Vocabulary | None = None) -> TrainResult:
    vocab = vocab or lexer.default_vocabulary()
    samples = prepare_samples(manifest.train, vocab, cfg.regime)
    return fit_samples(samples, vocab.size, cfg)


def evaluate_samples(params, samples, cfg: TrainConfig) -> MetricsRecord:
    if not samples:
        raise EmptyCorpus("evaluation split is empty")
    started = time.perf_counter()
    losses, accs = [], []
    for s in samples:
        R = neuralnet.gcae_forward(s.X, s.Ahat, params, cfg.final_activation).R
        losses.append(cross_entropy(R, s.indices))
        accs.append(token_accuracy(R, s.indices))
    return MetricsRecord(losses, accs, cfg.epochs, time.perf_counter() - started)


def evaluate(params, manifest: corpus.CorpusManifest, cfg: TrainConfig, vocab=None, split="test") -> MetricsRecord:
    vocab = vocab or lexer.default_vocabulary()
    return evaluate_samples(params, prepare_samples(manifest.subset(split), vocab, cfg.regime), cfg)


def reconstruct(params, sample: Sample, vocab: lexer.Vocabulary, cfg: TrainConfig) -> list[str]:
    R = neuralnet.gcae_forward(sample.X, sample.Ahat, params, cfg.final_activation).R
    return [vocab.lexemes[k] for k in np.argmax(R, axis=1)]


METRICS_HEADER = "epoch,step,split,regime,loss,accuracy"


def metrics_rows(result: TrainResult, regime: str, test: MetricsRecord | None = None) -> list[str]:
    rows = [f"{e},{s},train,{regime},{loss!r},{acc!r}" for e, s, loss, acc in result.curve]
    if test is not None:
        step = result.curve[-1][1] if result.curve else 0
        rows.append(f"{test.epoch},{step},test,{regime},{test.mean_loss!r},{test.mean_accuracy!r}")
    return rows
