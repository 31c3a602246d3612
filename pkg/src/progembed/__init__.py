"""Program embeddings with graph-convolutional autoencoders.

Methods are lexed into anonymized token sequences, paired with one of three
adjacency regimes (control flow, linear chain, none) and reconstructed by a
small graph-convolutional autoencoder.
"""

from .corpus import CorpusManifest, MethodText, extract_methods, generate_synthetic, split_corpus
from .flowgraph import FlowGraph, build_flow_edges, linear_edges, naive_edges, normalize
from .lexer import Vocabulary, anonymize, default_vocabulary, numericalize, one_hot, tokenize
from .neuralnet import GcaeParameters, gcae_backward, gcae_forward, init_parameters
from .training import TrainConfig, evaluate, fit

__version__ = "0.1.0"
