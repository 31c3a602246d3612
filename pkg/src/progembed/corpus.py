"""Method-level corpora: extraction from source files, synthetic generation,
train/test splitting and the manifest file format."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import lexer
from .errors import (
    BracelessBody,
    EmptyCorpus,
    InvalidShape,
    ProgEmbedError,
    UnbalancedDelimiters,
)

log = logging.getLogger(__name__)

_OPEN = {"(": ")", "{": "}", "[": "]"}
_CLOSE = {v: k for k, v in _OPEN.items()}
_TYPE_DECL = ("class", "interface", "enum", "record")
# "method" is a placeholder token, not a Java keyword, so it stays a legal name
_NOT_NAMES = frozenset(lexer.KEYWORDS + lexer.CONTROL_TOKENS) - {"method"}
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class MethodText:
    name: str
    body: str
    origin: str

    def __post_init__(self):
        if not self.body:
            raise ValueError("method body is empty")
        if not self.name.isidentifier():
            raise ValueError(f"{self.name!r} is not an identifier")


@dataclass
class CorpusManifest:
    entries: list[MethodText]
    split: list[str]
    seed: int
    test_fraction: float = 0.1
    # raw identifiers behind each ``id`` token; kept for reference only
    id_groups: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.entries) != len(self.split):
            raise ValueError("entries and split tags must be parallel")
        if any(tag not in ("train", "test") for tag in self.split):
            raise ValueError("split tags must be 'train' or 'test'")

    def subset(self, tag: str) -> list[MethodText]:
        return [e for e, t in zip(self.entries, self.split) if t == tag]

    @property
    def train(self):
        return self.subset("train")

    @property
    def test(self):
        return self.subset("test")


def check_balanced(tokens) -> dict[int, int]:
    """Match brackets over scanned tokens; map opening index to closing index."""
    stack = []
    match = {}
    for k, tok in enumerate(tokens):
        if tok.text in _OPEN:
            stack.append(k)
        elif tok.text in _CLOSE:
            if not stack or tokens[stack[-1]].text != _CLOSE[tok.text]:
                raise UnbalancedDelimiters(tok.start, f"unexpected {tok.text!r}")
            match[stack.pop()] = k
    if stack:
        raise UnbalancedDelimiters(tokens[stack[-1]].start, f"unclosed {tokens[stack[-1]].text!r}")
    return match


def _skip_annotation(tokens, k, match):
    """Index just past an annotation starting with ``@`` at ``k``."""
    k += 2
    while k + 1 < len(tokens) and tokens[k].text == "." and lexer.is_identifier(tokens[k + 1].text):
        k += 2
    if k < len(tokens) and tokens[k].text == "(":
        k = match[k] + 1
    return k


def _member_name(tokens, header, match):
    """Name of the method declared by ``header`` (token indices), or None."""
    k = header[0]
    end = header[-1] + 1
    while k < end:
        text = tokens[k].text
        if text == "@":
            k = _skip_annotation(tokens, k, match)
            continue
        if text == "=":
            return None
        if text == "(":
            prev = tokens[k - 1].text if k > header[0] else ""
            if lexer.is_identifier(prev) and prev not in _NOT_NAMES:
                return prev
            return None
        k += 1
    return None


def extract_methods(source: str, origin: str = "<string>") -> list[MethodText]:
    """Every concrete, non-constructor method declared in ``source``.

    Only members of top-level type bodies (or top-level declarations outside
    any type) are considered; nested types and anonymous classes are skipped.
    """
    tokens = lexer.scan(source)
    match = check_balanced(tokens)
    methods = []

    def walk(lo, hi, class_name):
        k = lo
        header = []
        while k < hi:
            text = tokens[k].text
            if text == "@" and not header:
                header.append(k)
                k = _skip_annotation(tokens, k, match)
                header.append(k - 1)
                continue
            if text == ";":
                header = []
                k += 1
                continue
            if text == "{":
                close = match[k]
                words = [tokens[i].text for i in range(header[0], k)] if header else []
                type_kw = next((w for w in words if w in _TYPE_DECL), None)
                name = _member_name(tokens, header, match) if header else None
                if type_kw is not None:
                    # nested types are skipped
                    if class_name is None:
                        idx = words.index(type_kw)
                        inner = words[idx + 1] if idx + 1 < len(words) else ""
                        walk(k + 1, close, inner)
                elif name is not None and name != class_name:
                    start = tokens[header[0]].start
                    body = source[start:tokens[close].end]
                    methods.append(MethodText(name, body, origin))
                k = close + 1
                # a brace-initialized field continues until its ';'
                if "=" not in words:
                    header = []
                continue
            if text in ("(", "["):
                header.append(k)
                k = match[k] + 1
                header.append(k - 1)
                continue
            header.append(k)
            k += 1

    walk(0, len(tokens), None)
    return methods


def check_braces(lexemes) -> None:
    """Reject control statements whose bodies are not braced blocks."""
    partner = {}
    stack = []
    for k, lex in enumerate(lexemes):
        if lex == "(":
            stack.append(k)
        elif lex == ")" and stack:
            partner[stack.pop()] = k
    do_tail = set()
    for k, lex in enumerate(lexemes):
        nxt = None
        if lex in ("if", "while", "for") and k not in do_tail:
            if k + 1 >= len(lexemes) or k + 1 not in partner:
                raise BracelessBody(k, f"{lex} without a condition")
            nxt = partner[k + 1] + 1
        elif lex == "else":
            if k + 1 < len(lexemes) and lexemes[k + 1] == "if":
                continue
            nxt = k + 1
        elif lex == "do":
            nxt = k + 1
            depth = 0
            for j in range(k + 1, len(lexemes)):
                if lexemes[j] == "{":
                    depth += 1
                elif lexemes[j] == "}":
                    depth -= 1
                    if depth == 0:
                        if j + 1 < len(lexemes) and lexemes[j + 1] == "while":
                            do_tail.add(j + 1)
                        break
        if nxt is not None and (nxt >= len(lexemes) or lexemes[nxt] != "{"):
            raise BracelessBody(k, f"{lex} body is not a braced block")


def prepare_method(method: MethodText, vocab: lexer.Vocabulary):
    """Lexer pipeline plus the brace check; returns (TokenSequence, id groups)."""
    anonymized, tokens = lexer.method_tokens(method.body, method.name)
    check_braces(anonymized)
    seq = lexer.numericalize(anonymized, vocab, [(t.start, t.end) for t in tokens])
    groups = lexer.identifier_groups([t.text for t in tokens], anonymized)
    return seq, groups


def filter_methods(methods, vocab):
    """Keep the methods that survive the lexer pipeline; log the others."""
    kept, skipped = [], []
    for m in methods:
        try:
            prepare_method(m, vocab)
        except ProgEmbedError as exc:
            log.warning("skipping %s:%s: %s", m.origin, m.name, exc)
            skipped.append((m, exc))
        else:
            kept.append(m)
    return kept, skipped


# --------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class GeneratorShape:
    max_depth: int = 2
    max_statements: int = 4
    max_params: int = 3
    # probability that a statement slot holds a control construct
    control_rate: float = 0.35

    def validate(self):
        if self.max_depth < 0:
            raise InvalidShape("max_depth must be >= 0")
        if self.max_statements < 1:
            raise InvalidShape("max_statements must be >= 1")
        if self.max_params < 0:
            raise InvalidShape("max_params must be >= 0")
        if not 0.0 <= self.control_rate <= 1.0:
            raise InvalidShape("control_rate must lie in [0, 1]")


_VAR_NAMES = ("a", "b", "c", "x", "y", "count", "total", "sum", "value", "result", "tmp", "k", "i", "j", "n")
_METHOD_NAMES = ("compute", "update", "process", "check", "helper", "visit", "apply", "size", "get", "put", "add")
_FIELDS = ("data", "items", "buffer", "cache", "limit")
_NUM_TYPES = ("int", "long", "double")


class _MethodWriter:
    def __init__(self, rng: random.Random, shape: GeneratorShape, name: str):
        self.rng = rng
        self.shape = shape
        self.name = name
        self.lines = []
        self.return_type = rng.choice(("int", "int", "void", "boolean", "double", "String", "long"))
        self.params = []

    def literal(self):
        r = self.rng.random()
        if r < 0.55:
            return str(self.rng.randrange(10))
        if r < 0.8:
            return str(self.rng.randrange(10, 1000))
        if r < 0.9:
            return f"{self.rng.randrange(100)}.{self.rng.randrange(10)}"
        return self.rng.choice(("\"text\"", "'c'", "null", "true", "false"))

    def atom(self):
        r = self.rng.random()
        if r < 0.5:
            return self.rng.choice(_VAR_NAMES)
        if r < 0.75:
            return self.literal()
        if r < 0.85:
            return f"this.{self.rng.choice(_FIELDS)}"
        if r < 0.93:
            return f"{self.rng.choice(_VAR_NAMES)}[{self.rng.choice(('i', 'j', '0', 'k'))}]"
        return self.call()

    def expr(self, depth=0):
        if depth > 1 or self.rng.random() < 0.5:
            return self.atom()
        op = self.rng.choice(("+", "-", "*", "/", "%", "+", "-"))
        return f"{self.atom()} {op} {self.expr(depth + 1)}"

    def cond(self):
        op = self.rng.choice(("<", "<=", ">", ">=", "==", "!="))
        c = f"{self.rng.choice(_VAR_NAMES)} {op} {self.expr(1)}"
        if self.rng.random() < 0.2:
            c += f" {self.rng.choice(('&&', '||'))} !{self.rng.choice(_VAR_NAMES)}.isEmpty()"
        return c

    def call(self):
        args = ", ".join(self.expr(1) for _ in range(self.rng.randrange(3)))
        r = self.rng.random()
        if r < 0.15:
            return f"Math.max({self.expr(1)}, {self.expr(1)})"
        if r < 0.3:
            return f"{self.rng.choice(_VAR_NAMES)}.{self.rng.choice(_METHOD_NAMES)}({args})"
        return f"{self.rng.choice(_METHOD_NAMES)}({args})"

    def recursive_call(self):
        args = ", ".join(f"{p} - 1" if k == 0 else p for k, p in enumerate(self.params))
        return f"{self.name}({args})"

    def simple(self, indent):
        pad = "    " * indent
        r = self.rng.random()
        var = self.rng.choice(_VAR_NAMES)
        if r < 0.25:
            self.lines.append(f"{pad}{self.rng.choice(_NUM_TYPES)} {var} = {self.expr()};")
        elif r < 0.45:
            op = self.rng.choice(("=", "+=", "-=", "*=", "/="))
            self.lines.append(f"{pad}{var} {op} {self.expr()};")
        elif r < 0.55:
            self.lines.append(f"{pad}{var}{self.rng.choice(('++', '--'))};")
        elif r < 0.7:
            self.lines.append(f"{pad}{self.call()};")
        elif r < 0.78:
            self.lines.append(f"{pad}System.out.println({self.expr()});")
        elif r < 0.86:
            self.lines.append(f"{pad}String {var} = \"label\" + {self.expr(1)};")
        elif r < 0.93:
            self.lines.append(f"{pad}this.{self.rng.choice(_FIELDS)}[{self.rng.choice(('i', 'j', '0'))}] = {self.expr()};")
        elif self.params:
            self.lines.append(f"{pad}{var} = {self.recursive_call()};")
        else:
            self.lines.append(f"{pad}{var} = {self.call()};")

    def return_stmt(self, indent):
        pad = "    " * indent
        if self.return_type == "void":
            self.lines.append(f"{pad}return;")
            return
        if self.params and self.return_type in ("int", "long", "double") and self.rng.random() < 0.4:
            self.lines.append(f"{pad}return {self.recursive_call()} {self.rng.choice(('+', '*'))} {self.expr(1)};")
            return
        value = {"boolean": "true", "String": "\"done\""}.get(self.return_type, None)
        if value is None or self.rng.random() < 0.5:
            value = self.expr()
        self.lines.append(f"{pad}return {value};")

    def block(self, indent, depth):
        count = self.rng.randint(1, self.shape.max_statements)
        for _ in range(count):
            if depth < self.shape.max_depth and self.rng.random() < self.shape.control_rate:
                self.control(indent, depth)
            else:
                self.simple(indent)

    def control(self, indent, depth):
        pad = "    " * indent
        kind = self.rng.choice(("if", "if", "ifelse", "elseif", "while", "for", "do", "return"))
        if kind == "return":
            self.lines.append(f"{pad}if ({self.cond()}) {{")
            self.return_stmt(indent + 1)
            self.lines.append(f"{pad}}}")
        elif kind in ("if", "ifelse", "elseif"):
            self.lines.append(f"{pad}if ({self.cond()}) {{")
            self.block(indent + 1, depth + 1)
            if kind == "elseif":
                self.lines.append(f"{pad}}} else if ({self.cond()}) {{")
                self.block(indent + 1, depth + 1)
            if kind != "if":
                self.lines.append(f"{pad}}} else {{")
                self.block(indent + 1, depth + 1)
            self.lines.append(f"{pad}}}")
        elif kind == "while":
            self.lines.append(f"{pad}while ({self.cond()}) {{")
            self.block(indent + 1, depth + 1)
            self.lines.append(f"{pad}}}")
        elif kind == "for":
            v = self.rng.choice(("i", "j", "k"))
            bound = self.rng.choice(("n", "count", "10", "items.length"))
            self.lines.append(f"{pad}for (int {v} = 0; {v} < {bound}; {v}++) {{")
            self.block(indent + 1, depth + 1)
            self.lines.append(f"{pad}}}")
        else:
            self.lines.append(f"{pad}do {{")
            self.block(indent + 1, depth + 1)
            self.lines.append(f"{pad}}} while ({self.cond()});")

    def write(self):
        ptypes = ("int", "int", "long", "double", "String")
        names = self.rng.sample(("n", "x", "value", "count", "limit", "i"), self.rng.randint(0, self.shape.max_params))
        decls = []
        for p in names:
            decls.append(f"{self.rng.choice(ptypes) if decls else 'int'} {p}")
            self.params.append(p)
        modifiers = self.rng.choice(("public ", "private ", "", "public static ", "protected "))
        self.lines.append(f"{modifiers}{self.return_type} {self.name}({', '.join(decls)}) {{")
        self.block(1, 0)
        if self.return_type != "void":
            self.return_stmt(1)
        self.lines.append("}")
        return "\n".join(self.lines)


def generate_synthetic(seed: int, count: int, shape: GeneratorShape | None = None) -> list[MethodText]:
    """``count`` random Java-like methods; a pure function of its arguments."""
    shape = shape or GeneratorShape()
    shape.validate()
    if count < 0:
        raise InvalidShape("count must be >= 0")
    methods = []
    for index in range(count):
        rng = random.Random(f"{seed}:{index}")
        name = f"{rng.choice(_METHOD_NAMES)}{rng.choice(('', 'All', 'Next', 'Value', 'Item'))}{index}"
        body = _MethodWriter(rng, shape, name).write()
        methods.append(MethodText(name, body, f"synthetic:{seed}:{index}"))
    return methods


def split_corpus(entries, seed: int, test_fraction: float = 0.1) -> CorpusManifest:
    """Seeded shuffle, then ``floor(test_fraction * N)`` entries go to test."""
    entries = list(entries)
    if not entries:
        raise EmptyCorpus("cannot split an empty corpus")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    order = list(range(len(entries)))
    random.Random(seed).shuffle(order)
    n_test = int(test_fraction * len(entries))
    ordered = [entries[k] for k in order]
    split = ["test"] * n_test + ["train"] * (len(entries) - n_test)
    return CorpusManifest(ordered, split, seed, test_fraction)


# --------------------------------------------------------------------------
# manifest file


def write_manifest(manifest: CorpusManifest, path, vocab: lexer.Vocabulary) -> None:
    """Tab-separated records: split, origin, name, tokens, id groups, body."""
    lines = [
        f"# manifest_version={MANIFEST_VERSION} seed={manifest.seed} "
        f"test_fraction={manifest.test_fraction!r} vocab_sha256={vocab.checksum}",
        "# split\torigin\tname\ttokens\tid_groups\tbody",
    ]
    for entry, tag in zip(manifest.entries, manifest.split):
        seq, groups = prepare_method(entry, vocab)
        lines.append("\t".join((
            tag,
            entry.origin,
            entry.name,
            " ".join(seq.lexemes),
            ",".join(map(str, groups)),
            json.dumps(entry.body),
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> CorpusManifest:
    text = Path(path).read_text(encoding="utf-8")
    header = {}
    entries, split, groups = [], [], []
    for line in text.splitlines():
        if line.startswith("#"):
            if "=" in line:
                header.update(part.split("=", 1) for part in line[1:].split())
            continue
        if not line.strip():
            continue
        tag, origin, name, _tokens, id_groups, body = line.split("\t")
        entries.append(MethodText(name, json.loads(body), origin))
        split.append(tag)
        groups.append([int(g) for g in id_groups.split(",") if g])
    return CorpusManifest(
        entries, split, int(header.get("seed", 0)), float(header.get("test_fraction", 0.1)), groups
    )


def read_sources(root, extension: str = ".java"):
    """Extract methods from every matching file below ``root``.

    Returns ``(methods, skipped)`` where ``skipped`` lists ``(path, reason)``
    for files that could not be read or parsed.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"source directory {root} does not exist")
    methods, skipped = [], []
    for path in sorted(p for p in root.rglob(f"*{extension}") if p.is_file()):
        try:
            source = path.read_text(encoding="utf-8")
            methods.extend(extract_methods(source, str(path)))
        except (OSError, UnicodeDecodeError, ProgEmbedError) as exc:
            log.warning("skipping file %s: %s", path, exc)
            skipped.append((path, exc))
    return methods, skipped
