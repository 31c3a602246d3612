"""Token-level control-flow graphs and the normalized propagation matrix.

Nodes are token positions. Three adjacency regimes are supported:

``sequence``
    The linear chain edited by the control-token rules below.
``linear``
    Edges ``k -> k+1`` only.
``naive``
    No edges at all; after self-loop augmentation the propagation matrix is
    the identity.

Rules applied by :func:`build_flow_edges` (``b``/``c`` are a block's braces):

* ``if`` / ``else``: skip edge from the block's ``{`` to its ``}``. ``else if``
  is handled by the ``if``.
* ``while`` / ``for``: with condition ``)`` at ``p`` and keyword at ``w``,
  skip edge ``p -> c+1`` (when ``c+1`` exists) and back edge ``c -> w``.
* ``do``: back edge from the trailing condition's ``)`` to the ``do``.
* recursive call ``method (...)``: edge from the call's ``)`` to token 0.
* ``return``: the statement's ``;`` jumps to the last token instead of its
  linear successor.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedStructure

REGIMES = ("sequence", "linear", "naive")

_OPEN = {"(": ")", "{": "}", "[": "]"}
_CLOSE = {v: k for k, v in _OPEN.items()}


@dataclass(frozen=True)
class FlowGraph:
    n: int
    edges: frozenset
    regime: str
    rules: Counter = field(default_factory=Counter, compare=False)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.n < 1:
            raise ValueError("a flow graph needs at least one node")
        object.__setattr__(self, "edges", frozenset(self.edges))
        for i, j in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside [0, {self.n})")

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for i, j in self.edges:
            A[i, j] = 1.0
        return A

    def successors(self) -> dict[int, list[int]]:
        succ = {k: [] for k in range(self.n)}
        for i, j in sorted(self.edges):
            succ[i].append(j)
        return succ

    def to_text(self) -> str:
        lines = [f"n={self.n} regime={self.regime}"]
        lines.extend(f"{i} {j}" for i, j in sorted(self.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FlowGraph":
        lines = [line for line in text.splitlines() if line.strip()]
        header = dict(part.split("=", 1) for part in lines[0].split())
        edges = [tuple(int(x) for x in line.split()) for line in lines[1:]]
        return cls(int(header["n"]), frozenset(edges), header["regime"])


def linear_edges(n: int) -> FlowGraph:
    return FlowGraph(n, frozenset((k, k + 1) for k in range(n - 1)), "linear")


def naive_edges(n: int) -> FlowGraph:
    return FlowGraph(n, frozenset(), "naive")


def match_delimiters(lexemes) -> dict[int, int]:
    """Map every bracket position to its partner (both directions).

    Unmatched brackets are left out; callers report them when they need them.
    """
    partner = {}
    stack = []
    for k, lex in enumerate(lexemes):
        if lex in _OPEN:
            stack.append(k)
        elif lex in _CLOSE:
            if stack and lexemes[stack[-1]] == _CLOSE[lex]:
                o = stack.pop()
                partner[o] = k
                partner[k] = o
            else:
                stack.clear()
    return partner


class _Walker:
    def __init__(self, lexemes):
        self.lex = list(lexemes)
        self.n = len(self.lex)
        self.partner = match_delimiters(self.lex)

    def expect(self, pos, text):
        if pos >= self.n or self.lex[pos] != text:
            raise MalformedStructure(pos, f"expected {text!r}")
        return pos

    def close_of(self, pos, text):
        self.expect(pos, text)
        if pos not in self.partner:
            raise MalformedStructure(pos, f"unmatched {text!r}")
        return self.partner[pos]

    def statement_end(self, pos):
        """Position of the ``;`` ending the statement that starts at ``pos``."""
        depth = 0
        for k in range(pos, self.n):
            lex = self.lex[k]
            if lex in _OPEN:
                depth += 1
            elif lex in _CLOSE:
                depth -= 1
                if depth < 0:
                    break
            elif lex == ";" and depth == 0:
                return k
        raise MalformedStructure(pos, "statement has no terminating ';'")


def build_flow_edges(seq) -> FlowGraph:
    """Control-flow edges of an anonymized method (``sequence`` regime).

    ``seq`` is a TokenSequence or a plain list of lexemes.
    """
    lexemes = list(getattr(seq, "lexemes", seq))
    w = _Walker(lexemes)
    n = w.n
    linear = {(k, k + 1) for k in range(n - 1)}
    extra = set()
    dropped = set()
    rules = Counter()
    do_whiles = set()

    for k, lex in enumerate(lexemes):
        if lex == "if":
            p = w.close_of(k + 1, "(")
            b = p + 1
            c = w.close_of(b, "{")
            extra.add((b, c))
            rules["if"] += 1
        elif lex == "else":
            if k + 1 < n and lexemes[k + 1] == "if":
                continue
            b = k + 1
            c = w.close_of(b, "{")
            extra.add((b, c))
            rules["else"] += 1
        elif lex == "do":
            b = k + 1
            c = w.close_of(b, "{")
            t = w.expect(c + 1, "while")
            q = w.close_of(t + 1, "(")
            extra.add((q, k))
            do_whiles.add(t)
            rules["do"] += 1
        elif lex in ("while", "for"):
            if k in do_whiles:
                continue
            p = w.close_of(k + 1, "(")
            b = p + 1
            c = w.close_of(b, "{")
            if c + 1 < n:
                extra.add((p, c + 1))
            extra.add((c, k))
            rules[lex] += 1
        elif lex == "method" and k > 0 and k + 1 < n and lexemes[k + 1] == "(":
            r = w.close_of(k + 1, "(")
            extra.add((r, 0))
            rules["method"] += 1
        elif lex == "return":
            s = w.statement_end(k + 1)
            rules["return"] += 1
            if s + 1 < n - 1:
                dropped.add((s, s + 1))
                extra.add((s, n - 1))

    edges = (linear - dropped) | extra
    return FlowGraph(n, frozenset(edges), "sequence", rules)


def regime_graph(seq, regime: str) -> FlowGraph:
    n = len(getattr(seq, "lexemes", seq))
    if regime == "sequence":
        return build_flow_edges(seq)
    if regime == "linear":
        return linear_edges(n)
    if regime == "naive":
        return naive_edges(n)
    raise ValueError(f"unknown regime {regime!r}")


def normalize(g) -> np.ndarray:
    """Return ``D^-1/2 (A + I) D^-1/2`` with ``D`` the row sums of ``A + I``.

    The adjacency stays directed, so the result is generally not symmetric.
    ``g`` may also be a dense adjacency matrix.
    """
    A = g.adjacency() if isinstance(g, FlowGraph) else np.asarray(g, dtype=float)
    A_tilde = A + np.eye(A.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(A_tilde.sum(axis=1))
    return d_inv_sqrt[:, None] * A_tilde * d_inv_sqrt[None, :]


def contract(g: FlowGraph) -> tuple[list[list[int]], set]:
    """Collapse straight-line runs into blocks.

    ``u -> v`` is a straight-line link when it is the only edge out of ``u``
    and the only edge into ``v``. Returns the blocks (token positions in
    order) and the block-level edge set.
    """
    succ = {k: set() for k in range(g.n)}
    pred = {k: set() for k in range(g.n)}
    for i, j in g.edges:
        succ[i].add(j)
        pred[j].add(i)

    def link(u, v):
        return u != v and succ[u] == {v} and pred[v] == {u}

    block_of = {}
    blocks = []

    def grow(k):
        run = [k]
        block_of[k] = len(blocks)
        while len(succ[run[-1]]) == 1:
            (v,) = succ[run[-1]]
            if not link(run[-1], v) or v in block_of:
                break
            run.append(v)
            block_of[v] = len(blocks)
        blocks.append(run)

    for k in range(g.n):
        if k not in block_of and not (len(pred[k]) == 1 and link(next(iter(pred[k])), k)):
            grow(k)
    # a cycle made purely of links has no natural start
    for k in range(g.n):
        if k not in block_of:
            grow(k)
    block_edges = {(block_of[i], block_of[j]) for i, j in g.edges if not link(i, j)}
    return blocks, block_edges


def reachable(g: FlowGraph, source: int, avoid=frozenset()) -> set[int]:
    """Nodes reachable from ``source``; ``avoid`` nodes are entered but not left."""
    succ = g.successors()
    seen = {source}
    stack = [source]
    while stack:
        u = stack.pop()
        if u in avoid and u != source:
            continue
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen
