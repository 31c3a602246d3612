from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from progembed import corpus, lexer
from progembed.errors import BracelessBody, EmptyCorpus, InvalidShape, UnbalancedDelimiters

FIXTURES = Path(__file__).parent / "fixtures" / "java"

CLASS_SOURCE = """
public abstract class Shape {
    private int sides;

    public Shape(int sides) {
        this.sides = sides;
    }

    public abstract double area();

    public int getSides() {
        return sides;
    }
}
"""


class TestExtractMethods:
    def test_skips_abstract_and_constructor(self):
        methods = corpus.extract_methods(CLASS_SOURCE)
        assert [m.name for m in methods] == ["getSides"]

    def test_body_spans_signature_to_closing_brace(self):
        src = "class A { int f(int n){ return n; } }"
        (m,) = corpus.extract_methods(src)
        assert m.name == "f"
        assert m.body == "int f(int n){ return n; }"

    def test_unmatched_brace(self):
        with pytest.raises(UnbalancedDelimiters) as info:
            corpus.extract_methods("class A { void f() { ")
        assert info.value.position == 19

    def test_no_methods_is_empty(self):
        assert corpus.extract_methods("class A { int x = 1; }") == []

    def test_source_order_and_annotations(self):
        src = """
        class B {
            @Override public String toString() { return "b"; }
            static { init(); }
            int[] table = {1, 2, 3};
            Runnable r = new Runnable() { public void run() { } };
            class Inner { void hidden() { } }
            <T> T pick(T a, T b) { return a; }
        }
        """
        methods = corpus.extract_methods(src)
        assert [m.name for m in methods] == ["toString", "pick"]
        assert methods[0].body.startswith("@Override")

    def test_bodies_are_balanced(self):
        source = (FIXTURES / "util" / "MathUtils.java").read_text()
        for m in corpus.extract_methods(source):
            corpus.check_balanced(lexer.scan(m.body))
            assert m.body.rstrip().endswith("}")

    def test_count_bounded_by_parenthesised_declarations(self):
        source = (FIXTURES / "model" / "Account.java").read_text()
        methods = corpus.extract_methods(source)
        assert 0 < len(methods) <= source.count("(")


class TestBraces:
    def test_braceless_if_rejected(self):
        with pytest.raises(BracelessBody):
            corpus.check_braces(lexer.tokenize("method ( ) { if ( id ) id ; }"))

    def test_braceless_else_rejected(self):
        with pytest.raises(BracelessBody):
            corpus.check_braces(lexer.tokenize("method ( ) { if ( id ) { } else id ; }"))

    def test_do_while_tail_is_not_a_loop_head(self):
        corpus.check_braces(lexer.tokenize("method ( ) { do { id ; } while ( id ) ; }"))

    def test_else_if_accepted(self):
        corpus.check_braces(lexer.tokenize("method ( ) { if ( id ) { } else if ( id ) { } }"))


class TestSynthetic:
    def test_zero_count(self):
        assert corpus.generate_synthetic(1, 0) == []

    def test_deterministic(self):
        a = corpus.generate_synthetic(1, 100)
        b = corpus.generate_synthetic(1, 100)
        assert "".join(m.body for m in a).encode() == "".join(m.body for m in b).encode()
        assert a == b

    def test_seed_changes_output(self):
        assert corpus.generate_synthetic(1, 5) != corpus.generate_synthetic(2, 5)

    def test_covers_control_tokens(self, vocab):
        seen = set()
        for m in corpus.generate_synthetic(1, 500):
            seq, _ = corpus.prepare_method(m, vocab)
            seen.update(seq.lexemes[1:])
        # recursion shows up as ``method`` after the declaration
        assert {"if", "else", "do", "while", "for", "return", "method"} <= seen

    @pytest.mark.parametrize("shape", [
        corpus.GeneratorShape(max_depth=-1),
        corpus.GeneratorShape(max_statements=0),
        corpus.GeneratorShape(control_rate=1.5),
    ])
    def test_invalid_shape(self, shape):
        with pytest.raises(InvalidShape):
            corpus.generate_synthetic(1, 3, shape)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(1, 5))
    def test_every_method_lexes(self, seed, depth, statements):
        shape = corpus.GeneratorShape(max_depth=depth, max_statements=statements)
        for m in corpus.generate_synthetic(seed, 5, shape):
            lexer.tokenize(m.body)
            assert corpus.extract_methods(m.body) == [corpus.MethodText(m.name, m.body, "<string>")]


class TestSplit:
    def _entries(self, count):
        return [corpus.MethodText(f"m{k}", f"void m{k}() {{ }}", "t") for k in range(count)]

    def test_fraction(self):
        manifest = corpus.split_corpus(self._entries(10), 3, 0.2)
        assert manifest.split.count("test") == 2
        assert manifest.split.count("train") == 8

    def test_deterministic(self):
        a = corpus.split_corpus(self._entries(10), 3, 0.2)
        b = corpus.split_corpus(self._entries(10), 3, 0.2)
        assert a == b

    def test_floor(self):
        manifest = corpus.split_corpus(self._entries(1), 3, 0.2)
        assert manifest.split == ["train"]

    def test_disjoint(self):
        manifest = corpus.split_corpus(self._entries(20), 5, 0.25)
        assert not {m.name for m in manifest.train} & {m.name for m in manifest.test}
        assert len(manifest.train) + len(manifest.test) == 20

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            corpus.split_corpus([], 1, 0.1)


class TestManifestFile:
    def test_round_trip(self, tmp_path, vocab):
        manifest = corpus.split_corpus(corpus.generate_synthetic(4, 12), 4, 0.25)
        path = tmp_path / "manifest.tsv"
        corpus.write_manifest(manifest, path, vocab)
        loaded = corpus.read_manifest(path)
        assert loaded.entries == manifest.entries
        assert loaded.split == manifest.split
        assert loaded.seed == 4 and loaded.test_fraction == 0.25

    def test_records_carry_tokens(self, tmp_path, vocab, factorial):
        manifest = corpus.CorpusManifest([factorial], ["train"], 0)
        path = tmp_path / "m.tsv"
        corpus.write_manifest(manifest, path, vocab)
        record = [line for line in path.read_text().splitlines() if not line.startswith("#")][0]
        tag, origin, name, tokens, groups, _ = record.split("\t")
        assert (tag, origin, name) == ("train", "fixture:factorial", "factorial")
        assert tokens.startswith("method ( int n ) { int id = 1 ;")
        assert groups == "0,0,0"


def test_read_sources_skips_undecodable_files(tmp_path):
    (tmp_path / "Good.java").write_text("class Good { int f() { return 1; } }")
    (tmp_path / "Bad.java").write_bytes(b"class Bad { \xff\xfe }")
    methods, skipped = corpus.read_sources(tmp_path)
    assert [m.name for m in methods] == ["f"]
    assert len(skipped) == 1 and skipped[0][0].name == "Bad.java"
