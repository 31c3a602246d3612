"""Graph-convolutional autoencoder with hand-derived gradients.

Every layer computes ``Ahat @ (H @ W)`` with no bias. The encoder maps one-hot
tokens ``n x V`` through ``h`` hidden units to a sigmoid latent ``n x l``; the
decoder mirrors it back to ``n x V`` reconstruction logits. All arithmetic is
float64.

Weights are stored in a fixed order, which is also the order in which they are
drawn from the RNG and written to model files::

    encoder_init, encoder_hidden[0..depth), encoder_final,
    decoder_init, decoder_hidden[0..depth), decoder_final
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ProgEmbedError

MODEL_FORMAT_VERSION = 1
FINAL_ACTIVATIONS = ("relu", "identity")


def matmul(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def relu(M):
    return np.maximum(M, 0.0)


def sigmoid(M):
    M = np.asarray(M, dtype=np.float64)
    e = np.exp(-np.abs(M))
    return np.where(M >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def gc_forward(X, Ahat, W) -> np.ndarray:
    """One graph convolution, ``Ahat @ (X @ W)``; activation is up to the caller."""
    Ahat = np.asarray(Ahat)
    if Ahat.ndim != 2 or Ahat.shape[0] != Ahat.shape[1] or Ahat.shape[1] != np.shape(X)[0]:
        raise DimensionMismatch(f"propagation matrix {Ahat.shape} does not fit input {np.shape(X)}")
    return matmul(Ahat, matmul(X, W))


@dataclass
class GcaeParameters:
    V: int
    h: int
    l: int
    depth: int
    weights: list[np.ndarray]

    def __post_init__(self):
        expected = layer_shapes(self.V, self.h, self.l, self.depth)
        if len(self.weights) != len(expected):
            raise DimensionMismatch(f"expected {len(expected)} weight matrices, got {len(self.weights)}")
        for name, shape, W in zip(layer_names(self.depth), expected, self.weights):
            if W.shape != shape:
                raise DimensionMismatch(f"{name} has shape {W.shape}, expected {shape}")

    @property
    def names(self):
        return layer_names(self.depth)

    @property
    def encoder_init(self):
        return self.weights[0]

    @property
    def encoder_hidden(self):
        return self.weights[1:1 + self.depth]

    @property
    def encoder_final(self):
        return self.weights[1 + self.depth]

    @property
    def decoder_init(self):
        return self.weights[2 + self.depth]

    @property
    def decoder_hidden(self):
        return self.weights[3 + self.depth:3 + 2 * self.depth]

    @property
    def decoder_final(self):
        return self.weights[-1]

    def copy(self) -> "GcaeParameters":
        return GcaeParameters(self.V, self.h, self.l, self.depth, [W.copy() for W in self.weights])

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for W in self.weights:
            digest.update(np.ascontiguousarray(W, dtype="<f8").tobytes())
        return digest.hexdigest()


def layer_names(depth):
    return (
        ["encoder_init"]
        + [f"encoder_hidden_{k}" for k in range(depth)]
        + ["encoder_final", "decoder_init"]
        + [f"decoder_hidden_{k}" for k in range(depth)]
        + ["decoder_final"]
    )


def layer_shapes(V, h, l, depth):
    return [(V, h)] + [(h, h)] * depth + [(h, l), (l, h)] + [(h, h)] * depth + [(h, V)]


def init_parameters(V, h=32, l=4, depth=0, rng_seed=0) -> GcaeParameters:
    """Uniform ``(-s, s)`` weights with ``s = 1/sqrt(out_features)``.

    Draws come from numpy's PCG64 generator seeded with ``rng_seed``, one
    matrix at a time in layer order, row-major within a matrix.
    """
    if min(V, h, l) < 1 or depth < 0:
        raise ValueError("dimensions must be positive and depth non-negative")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    weights = []
    for rows, cols in layer_shapes(V, h, l, depth):
        s = 1.0 / np.sqrt(cols)
        weights.append(rng.uniform(-s, s, size=(rows, cols)))
    return GcaeParameters(V, h, l, depth, weights)


def activations(depth, final_activation="relu"):
    if final_activation not in FINAL_ACTIVATIONS:
        raise ValueError(f"final_activation must be one of {FINAL_ACTIVATIONS}")
    return ["relu"] * depth + ["relu", "sigmoid", "relu"] + ["relu"] * depth + [final_activation]


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    kinds: list[str] = field(repr=False)
    latent_index: int = 0

    @property
    def Z(self) -> np.ndarray:
        return self.post[self.latent_index]

    @property
    def R(self) -> np.ndarray:
        return self.post[-1]


_APPLY = {"relu": relu, "sigmoid": sigmoid, "identity": lambda M: M}


def gcae_forward(X, Ahat, params: GcaeParameters, final_activation="relu") -> ForwardTrace:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.V:
        raise DimensionMismatch(f"input {X.shape} does not have {params.V} columns")
    kinds = activations(params.depth, final_activation)
    inputs, pre, post = [], [], []
    H = X
    for W, kind in zip(params.weights, kinds):
        P = gc_forward(H, Ahat, W)
        inputs.append(H)
        pre.append(P)
        H = _APPLY[kind](P)
        post.append(H)
    return ForwardTrace(inputs, pre, post, kinds, latent_index=params.depth + 1)


def softmax(R):
    shifted = R - R.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def l2_penalty(params: GcaeParameters, l2_lambda: float) -> float:
    """``l2_lambda * sum ||W||^2``; its gradient is ``2 * l2_lambda * W``."""
    return l2_lambda * float(sum(np.sum(W * W) for W in params.weights))


def gcae_backward(trace: ForwardTrace, X, Ahat, params: GcaeParameters, target_indices, l2_lambda=0.0):
    """Gradients of mean cross-entropy plus the L2 penalty, one per weight.

    ``X`` is accepted for interface symmetry; the trace already holds it as the
    first layer input.
    """
    R = trace.R
    targets = np.asarray(target_indices, dtype=np.int64)
    n = R.shape[0]
    if targets.shape != (n,):
        raise DimensionMismatch(f"{targets.size} targets for {n} positions")
    if trace.inputs[0].shape != np.shape(X):
        raise DimensionMismatch("trace was produced from a different input")
    Ahat = np.asarray(Ahat, dtype=np.float64)

    grad_out = softmax(R)
    grad_out[np.arange(n), targets] -= 1.0
    grad_out /= n

    grads = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        kind = trace.kinds[k]
        if kind == "relu":
            dP = grad_out * (trace.pre[k] > 0.0)
        elif kind == "sigmoid":
            S = trace.post[k]
            dP = grad_out * S * (1.0 - S)
        else:
            dP = grad_out
        back = Ahat.T @ dP
        grads[k] = trace.inputs[k].T @ back + 2.0 * l2_lambda * params.weights[k]
        if k:
            grad_out = back @ params.weights[k].T
    return grads


# --------------------------------------------------------------------------
# model files


def save_model(path, params: GcaeParameters, meta: dict) -> None:
    """Text model file: ``key=value`` header, then each matrix in layer order.

    Values are written with ``repr`` so they round-trip exactly.
    """
    lines = [f"format_version={MODEL_FORMAT_VERSION}"]
    header = dict(meta)
    header.update(V=params.V, h=params.h, l=params.l, depth=params.depth)
    for key in sorted(header):
        lines.append(f"{key}={header[key]}")
    for name, W in zip(params.names, params.weights):
        lines.append(f"matrix {name} {W.shape[0]} {W.shape[1]}")
        for row in W:
            lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(params, meta)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    k = 0
    while k < len(lines) and not lines[k].startswith("matrix "):
        key, _, value = lines[k].partition("=")
        meta[key] = value
        k += 1
    if meta.get("format_version") != str(MODEL_FORMAT_VERSION):
        raise ProgEmbedError(f"unsupported model format {meta.get('format_version')!r}")
    weights = []
    while k < len(lines):
        _, _name, rows, cols = lines[k].split()
        rows, cols = int(rows), int(cols)
        block = [[float(x) for x in line.split()] for line in lines[k + 1:k + 1 + rows]]
        weights.append(np.array(block, dtype=np.float64).reshape(rows, cols))
        k += 1 + rows
    dims = {key: int(meta.pop(key)) for key in ("V", "h", "l", "depth")}
    return GcaeParameters(weights=weights, **dims), meta
