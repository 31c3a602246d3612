from pathlib import Path

import pytest

from conftest import FACTORIAL
from progembed import corpus, lexer, report
from progembed.cli import main

FIXTURES = Path(__file__).parent / "fixtures" / "java"

IF_METHOD = "void f(int x) { if (x > 0) { x = 1; } }"
WHILE_METHOD = "void f(int x) { while (x > 0) { x--; } }"


def records(path):
    return [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestSynth:
    def test_split_sizes(self, tmp_path, capsys):
        code, out, _ = run(capsys, "synth", "--out", tmp_path)
        assert code == 0 and out.strip() == str(tmp_path / "manifest.tsv")
        tags = [r.split("\t")[0] for r in records(tmp_path / "manifest.tsv")]
        assert (tags.count("train"), tags.count("test")) == (450, 50)
        assert lexer.Vocabulary.load(tmp_path / "vocab.txt") == lexer.default_vocabulary()

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(capsys, "synth", "--count", 40, "--seed", 3, "--out", tmp_path / name)[0] == 0
        assert (tmp_path / "a" / "manifest.tsv").read_bytes() == (tmp_path / "b" / "manifest.tsv").read_bytes()

    def test_zero_count(self, tmp_path, capsys):
        code, _, err = run(capsys, "synth", "--count", 0, "--out", tmp_path)
        assert code == 2 and "empty" in err

    def test_config_file_and_override(self, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("# small corpus\ncount = 10\ntest_fraction=0.5\n")
        run(capsys, "synth", "--config", conf, "--set", "count=20", "--out", tmp_path)
        tags = [r.split("\t")[0] for r in records(tmp_path / "manifest.tsv")]
        assert tags.count("test") == 10 and len(tags) == 20


class TestIngest:
    def test_fixture_tree(self, tmp_path, capsys):
        code, _, err = run(capsys, "ingest", FIXTURES, "--out", tmp_path)
        assert code == 0
        assert len(records(tmp_path / "manifest.tsv")) == 29
        # applyInterest carries an in-body annotation
        assert "Account.java" in err and "'@'" in err

    def test_empty_directory(self, tmp_path, capsys):
        (tmp_path / "src").mkdir()
        code, _, err = run(capsys, "ingest", tmp_path / "src", "--out", tmp_path / "o")
        assert code == 2 and "no usable methods" in err

    def test_one_class_two_methods(self, tmp_path, capsys):
        src = tmp_path / "src"
        src.mkdir()
        (src / "A.java").write_text("class A { int f() { return 1; } void g(int x) { x++; } }")
        (src / "Bad.java").write_bytes(b"class Bad { \xff }")
        code, _, err = run(capsys, "ingest", src, "--out", tmp_path / "o")
        assert code == 0 and "Bad.java" in err
        names = [r.split("\t")[2] for r in records(tmp_path / "o" / "manifest.tsv")]
        assert sorted(names) == ["f", "g"]


class TestInspect:
    def _inspect(self, tmp_path, capsys, text, *extra):
        path = tmp_path / "m.java"
        path.write_text(text)
        code, out, _ = run(capsys, "inspect-cfg", path, *extra)
        assert code == 0
        return out.splitlines()

    def test_straight_line(self, tmp_path, capsys):
        lines = self._inspect(tmp_path, capsys, "void f() { int x = 1; }")
        n = int(lines[0].split()[0][2:])
        edges = {tuple(map(int, line.split())) for line in lines[1:] if not line.startswith("#")}
        assert edges == {(k, k + 1) for k in range(n - 1)}
        assert "# edges=%d" % (n - 1) in lines

    def test_if(self, tmp_path, capsys):
        lines = self._inspect(tmp_path, capsys, IF_METHOD)
        # method ( int id ) { if ( id > 0 ) { id = 1 ; } }: '{' at 12 skips to '}' at 17
        assert "12 17" in lines
        assert any(line.startswith("# rules: if=1 else=0") for line in lines)

    def test_while_back_edge(self, tmp_path, capsys):
        lines = self._inspect(tmp_path, capsys, WHILE_METHOD)
        edges = {tuple(map(int, line.split())) for line in lines[1:] if not line.startswith("#")}
        back = [(i, j) for i, j in edges if j < i]
        assert back == [(16, 6)]

    def test_naive_regime(self, tmp_path, capsys):
        lines = self._inspect(tmp_path, capsys, WHILE_METHOD, "--regime", "naive")
        assert lines[0].endswith("regime=naive") and "# edges=0" in lines


@pytest.fixture(scope="module")
def small_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--count", "30", "--out", str(out)]) == 0
    return out / "manifest.tsv"


class TestTrain:
    def test_artifacts_and_rerun(self, tmp_path, capsys, small_manifest):
        for name in ("a", "b"):
            code, out, _ = run(capsys, "train", "--manifest", small_manifest, "--set", "epochs=2",
                               "--regime", "linear", "--out", tmp_path / name)
            assert code == 0 and len(out.split()) == 3
        for artifact in ("model_linear.txt", "metrics_linear.csv", "curve_linear.csv"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()
        metrics = (tmp_path / "a" / "metrics_linear.csv").read_text().splitlines()
        assert metrics[0].startswith("# format_version=1 seed=1 ")
        assert metrics[1] == "epoch,step,split,regime,loss,accuracy"
        assert metrics[-1].startswith("2,54,test,linear,")

    def test_missing_manifest(self, tmp_path, capsys):
        code, _, err = run(capsys, "train", "--manifest", tmp_path / "nope.tsv", "--out", tmp_path)
        assert code == 2 and "does not exist" in err


class TestReconstruct:
    @pytest.fixture(scope="class")
    @classmethod
    def memorized(cls, tmp_path_factory):
        out = tmp_path_factory.mktemp("memo")
        manifest = corpus.CorpusManifest([report.parse_method(FACTORIAL)], ["train"], 0)
        corpus.write_manifest(manifest, out / "manifest.tsv", lexer.default_vocabulary())
        argv = ["train", "--manifest", str(out / "manifest.tsv"), "--regime", "naive", "--out", str(out),
                "--set", "epochs=2000", "--set", "final_activation=identity"]
        assert main(argv) == 0
        (out / "factorial.java").write_text(FACTORIAL)
        return out

    def test_reproduces_memorized_method(self, memorized, capsys):
        code, out, _ = run(capsys, "reconstruct", memorized / "model_naive.txt", memorized / "factorial.java")
        expected = corpus.prepare_method(report.parse_method(FACTORIAL), lexer.default_vocabulary())[0]
        assert code == 0 and out.split() == list(expected.lexemes)

    def test_length_matches_input(self, memorized, tmp_path, capsys):
        other = tmp_path / "g.java"
        other.write_text("int g(int a) { return a + 2; }")
        _, out, _ = run(capsys, "reconstruct", memorized / "model_naive.txt", other)
        assert len(out.split()) == len(lexer.tokenize("method ( int id ) { return id + 2 ; }"))

    def test_vocabulary_mismatch(self, memorized, tmp_path, capsys):
        vocab_path = tmp_path / "vocab.txt"
        lexer.Vocabulary(lexer.default_vocabulary().lexemes[:-1]).save(vocab_path)
        code, _, err = run(capsys, "reconstruct", memorized / "model_naive.txt",
                           memorized / "factorial.java", "--vocab", vocab_path)
        assert code == 2 and "different vocabulary" in err


class TestCompare:
    def test_report_layout(self, tmp_path, capsys, small_manifest):
        code, out, _ = run(capsys, "compare", "--manifest", small_manifest, "--set", "epochs=1", "--out", tmp_path)
        assert code == 0
        table = records(tmp_path / "metrics_table.tsv")
        assert table[0] == "regime\tmean_loss\tloss_sigma\tmean_accuracy\taccuracy_sigma"
        assert [row.split("\t")[0] for row in table[1:]] == ["sequence", "linear", "naive"]
        assert out == (tmp_path / "metrics_table.tsv").read_text()
        recon = records(tmp_path / "reconstructions.tsv")
        assert len(recon) == 1 + 3 * 4
        assert [row.split("\t")[2] for row in recon[1:5]] == ["original", "sequence", "linear", "naive"]
        freqs = records(tmp_path / "vocab_frequencies.tsv")
        assert len(freqs) == 1 + lexer.default_vocabulary().size
        for regime in ("sequence", "linear", "naive"):
            assert (tmp_path / f"model_{regime}.txt").is_file()
        assert not (tmp_path / "failures.tsv").exists()

    def test_regime_subset(self, tmp_path, capsys, small_manifest):
        code, _, _ = run(capsys, "compare", "--manifest", small_manifest, "--set", "epochs=1",
                         "--regimes", "naive", "--out", tmp_path)
        assert code == 0
        assert [row.split("\t")[0] for row in records(tmp_path / "metrics_table.tsv")[1:]] == ["naive"]

    def test_needs_test_split(self, tmp_path, capsys):
        code, _, err = run(capsys, "compare", "--set", "count=5", "--set", "epochs=1", "--out", tmp_path)
        assert code == 2 and "test split" in err
