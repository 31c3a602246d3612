"""Tokenization, anonymization and numericalization of method text.

A method goes through three stages before it reaches a model:

1. ``tokenize`` splits raw text into lexemes (comments and whitespace dropped).
2. ``anonymize`` maps identifiers and literals onto placeholder tokens so that
   every lexeme belongs to a small closed vocabulary.
3. ``numericalize`` and ``one_hot`` turn the lexemes into vocabulary indices
   and the ``n x V`` input matrix.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptySequence,
    IllegalCharacter,
    IndexOutOfRange,
    UnknownLexeme,
    UnterminatedLiteral,
)

# Tokens that reshape control flow. ``method`` stands for the method's own name.
CONTROL_TOKENS = ("if", "else", "do", "while", "for", "return", "method")
PLACEHOLDERS = ("id", "other_method")
KEPT_NAMES = ("i", "j", "n")
DIGITS = tuple(str(d) for d in range(10))
LITERAL_CLASSES = ("int_lit", "float_lit", "str_lit", "char_lit", "bool_lit", "null_lit")

KEYWORDS = (
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char",
    "class", "continue", "default", "double", "extends", "final", "finally",
    "float", "implements", "instanceof", "int", "interface", "long", "new",
    "private", "protected", "public", "short", "static", "super", "switch",
    "synchronized", "this", "throw", "throws", "try", "var", "void",
)

TYPE_NAMES = (
    "String", "Object", "Integer", "Long", "Double", "Boolean", "Character",
    "Math", "System", "List", "ArrayList", "Map", "HashMap", "Set", "HashSet",
    "Arrays", "Collections", "Iterator", "StringBuilder", "Exception",
)

MULTI_CHAR_OPERATORS = (
    "==", "<=", ">=", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "->",
)
SINGLE_CHAR_PUNCTUATION = "(){}[];,.=<>+-*/%!&|^~?:"
# Lexed so that annotations produce a clean UnknownLexeme rather than a crash.
UNMAPPED_PUNCTUATION = "@"

DEFAULT_LEXEMES = (
    CONTROL_TOKENS
    + PLACEHOLDERS
    + KEPT_NAMES
    + DIGITS
    + LITERAL_CLASSES
    + KEYWORDS
    + TYPE_NAMES
    + MULTI_CHAR_OPERATORS
    + tuple(SINGLE_CHAR_PUNCTUATION)
)

_RESERVED = frozenset(CONTROL_TOKENS + PLACEHOLDERS + LITERAL_CLASSES + KEYWORDS + TYPE_NAMES)
_BOOL = frozenset(("true", "false"))

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F_]+[lL]?
  | 0[bB][01_]+[lL]?
  | (?:\d[\d_]*)?\.\d[\d_]*(?:[eE][+-]?\d+)?[fFdD]?
  | \d[\d_]*\.(?![\w.])(?:[eE][+-]?\d+)?[fFdD]?
  | \d[\d_]*\.?(?:[eE][+-]?\d+)[fFdD]?
  | \d[\d_]*[fFdD]
  | \d[\d_]*[lL]?
    """,
    re.VERBOSE,
)
_INT = re.compile(r"(?:0[xX][0-9a-fA-F_]+|0[bB][01_]+|\d[\d_]*)[lL]?\Z")


@dataclass(frozen=True)
class Vocabulary:
    """Closed bijection between lexemes and indices ``0..V-1``."""

    lexemes: tuple[str, ...]
    index_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lexemes = tuple(self.lexemes)
        if not lexemes:
            raise ValueError("vocabulary must contain at least one lexeme")
        index = {lex: k for k, lex in enumerate(lexemes)}
        if len(index) != len(lexemes):
            raise ValueError("vocabulary lexemes must be unique")
        object.__setattr__(self, "lexemes", lexemes)
        object.__setattr__(self, "index_of", index)

    @property
    def size(self) -> int:
        return len(self.lexemes)

    def __len__(self):
        return len(self.lexemes)

    def __contains__(self, lexeme):
        return lexeme in self.index_of

    def to_text(self) -> str:
        return "".join(lex + "\n" for lex in self.lexemes)

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        return cls(tuple(line for line in text.split("\n") if line))


def default_vocabulary() -> Vocabulary:
    return Vocabulary(DEFAULT_LEXEMES)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenSequence:
    indices: tuple[int, ...]
    lexemes: tuple[str, ...]
    spans: tuple[tuple[int, int], ...] | None = None

    def __len__(self):
        return len(self.indices)


def scan(body: str) -> list[Token]:
    """Split ``body`` into tokens carrying their character spans."""
    tokens = []
    pos = 0
    length = len(body)
    while pos < length:
        ch = body[pos]
        if ch.isspace():
            pos += 1
            continue
        if body.startswith("//", pos):
            nl = body.find("\n", pos)
            pos = length if nl < 0 else nl + 1
            continue
        if body.startswith("/*", pos):
            close = body.find("*/", pos + 2)
            if close < 0:
                raise UnterminatedLiteral(pos, "unterminated block comment")
            pos = close + 2
            continue
        if ch == '"' or ch == "'":
            end = _scan_quoted(body, pos)
            tokens.append(Token(body[pos:end], pos, end))
            pos = end
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < length and body[pos + 1].isdigit()):
            m = _NUMBER.match(body, pos)
            end = m.end()
            # 12abc is not a number followed by a name
            if end < length and (body[end].isalnum() or body[end] == "_"):
                raise IllegalCharacter(end, "malformed numeric literal")
            tokens.append(Token(body[pos:end], pos, end))
            pos = end
            continue
        if ch.isalpha() or ch == "_" or ch == "$":
            end = pos + 1
            while end < length and (body[end].isalnum() or body[end] in "_$"):
                end += 1
            tokens.append(Token(body[pos:end], pos, end))
            pos = end
            continue
        two = body[pos:pos + 2]
        if two in MULTI_CHAR_OPERATORS:
            tokens.append(Token(two, pos, pos + 2))
            pos += 2
            continue
        if ch in SINGLE_CHAR_PUNCTUATION or ch in UNMAPPED_PUNCTUATION:
            tokens.append(Token(ch, pos, pos + 1))
            pos += 1
            continue
        raise IllegalCharacter(pos, f"unexpected character {ch!r}")
    return tokens


def _scan_quoted(body, start):
    quote = body[start]
    pos = start + 1
    while pos < len(body):
        ch = body[pos]
        if ch == "\\":
            pos += 2
            continue
        if ch == quote:
            return pos + 1
        if ch == "\n":
            break
        pos += 1
    raise UnterminatedLiteral(start, "unterminated literal")


def tokenize(body: str) -> list[str]:
    """Return the raw lexemes of ``body``."""
    return [tok.text for tok in scan(body)]


def is_identifier(lexeme: str) -> bool:
    return bool(lexeme) and (lexeme[0].isalpha() or lexeme[0] in "_$")


def literal_class(lexeme: str) -> str | None:
    """Placeholder for a raw literal, a digit for one-digit ints, else None."""
    first = lexeme[0]
    if first == '"':
        return "str_lit"
    if first == "'":
        return "char_lit"
    if lexeme in _BOOL:
        return "bool_lit"
    if lexeme == "null":
        return "null_lit"
    if first.isdigit() or (first == "." and len(lexeme) > 1):
        if _INT.match(lexeme):
            return lexeme if len(lexeme) == 1 else "int_lit"
        return "float_lit"
    return None


def anonymize(lexemes, method_name: str, known_methods=frozenset()) -> list[str]:
    """Replace names and literals with vocabulary placeholders.

    Placeholders, keywords and the kept type names pass through unchanged, so
    the mapping is idempotent. A raw identifier that happens to be spelled like
    a placeholder (``id``, ``method``) is therefore kept as is.
    """
    out = []
    lexemes = list(lexemes)
    for k, lex in enumerate(lexemes):
        literal = literal_class(lex)
        if literal is not None:
            out.append(literal)
        elif not is_identifier(lex) or lex in _RESERVED:
            out.append(lex)
        elif lex == method_name:
            out.append("method")
        elif (k + 1 < len(lexemes) and lexemes[k + 1] == "(") or lex in known_methods:
            out.append("other_method")
        elif lex in KEPT_NAMES:
            out.append(lex)
        else:
            out.append("id")
    return out


def identifier_groups(lexemes, anonymized) -> list[int]:
    """Group label for every ``id`` token; equal labels mean the same raw name.

    Recorded alongside the corpus; no model consumes it.
    """
    groups: dict[str, int] = {}
    labels = []
    for raw, anon in zip(lexemes, anonymized):
        if anon == "id":
            labels.append(groups.setdefault(raw, len(groups)))
    return labels


def numericalize(lexemes, vocab: Vocabulary, spans=None) -> TokenSequence:
    lexemes = tuple(lexemes)
    if not lexemes:
        raise EmptySequence("a method has at least one token")
    indices = []
    for k, lex in enumerate(lexemes):
        try:
            indices.append(vocab.index_of[lex])
        except KeyError:
            raise UnknownLexeme(lex, k) from None
    if spans is not None:
        spans = tuple(tuple(s) for s in spans)
        if len(spans) != len(lexemes):
            raise ValueError("spans must be parallel to lexemes")
    return TokenSequence(tuple(indices), lexemes, spans)


def one_hot(seq, V: int) -> np.ndarray:
    """``n x V`` float64 matrix with a single 1 per row.

    ``seq`` may be a TokenSequence or a plain sequence of indices.
    """
    indices = np.asarray(getattr(seq, "indices", seq), dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= V):
        raise IndexOutOfRange(f"index outside [0, {V})")
    X = np.zeros((indices.size, V))
    X[np.arange(indices.size), indices] = 1.0
    return X


def method_tokens(body: str, name: str, known_methods=frozenset()):
    """Anonymized lexemes of a method, starting at its name.

    Modifiers, annotations and the return type in front of the name are
    dropped, so a method always begins ``method ( ...``.

    Returns ``(anonymized, raw_tokens)`` where ``raw_tokens`` are the matching
    :class:`Token` objects.
    """
    tokens = scan(body)
    start = 0
    for k, tok in enumerate(tokens):
        if tok.text == name and k + 1 < len(tokens) and tokens[k + 1].text == "(":
            start = k
            break
    tokens = tokens[start:]
    raw = [tok.text for tok in tokens]
    return anonymize(raw, name, known_methods), tokens


def encode_method(body: str, name: str, vocab: Vocabulary, known_methods=frozenset()):
    """Full lexer pipeline: body text to a TokenSequence with spans."""
    anonymized, tokens = method_tokens(body, name, known_methods)
    return numericalize(anonymized, vocab, [(t.start, t.end) for t in tokens])
