import json

import numpy as np
import pytest

from segvec.cli import main
from segvec.evaluation import (
    Benchmark,
    evaluate,
    load_embeddings,
    load_instance_table,
    variance_study,
)
from segvec.speech import load_model


def write_tokens(path, token_lists):
    path.write_text("\n".join(" ".join(toks) for toks in token_lists) + "\n")


@pytest.fixture
def small_corpus(tmp_path):
    """Synthesized features + alignments for a handful of utterances."""
    tokens = tmp_path / "tokens.txt"
    write_tokens(tokens, [["red", "blue", "green"], ["blue", "red"],
                          ["green", "red", "blue", "red"]])
    features = tmp_path / "features.txt"
    alignments = tmp_path / "alignments.txt"
    code = main(["synth", "--tokens", str(tokens), "--features-out", str(features),
                 "--alignments-out", str(alignments), "--feature-dim", "3",
                 "--min-len", "2", "--max-len", "4", "--sigma", "0.1", "--seed", "5"])
    assert code == 0
    return features, alignments


class TestSynth:
    def test_deterministic_outputs(self, tmp_path):
        tokens = tmp_path / "tokens.txt"
        write_tokens(tokens, [["a", "b"], ["b", "c"]])
        outs = []
        for tag in ("one", "two"):
            f = tmp_path / f"f_{tag}.txt"
            a = tmp_path / f"a_{tag}.txt"
            assert main(["synth", "--tokens", str(tokens), "--features-out", str(f),
                         "--alignments-out", str(a), "--seed", "7"]) == 0
            outs.append((f.read_bytes(), a.read_bytes()))
        assert outs[0] == outs[1]

    def test_alignment_count_matches_tokens(self, tmp_path):
        rng = np.random.default_rng(0)
        token_lists = [[f"t{rng.integers(10)}" for _ in range(10)] for _ in range(10)]
        tokens = tmp_path / "tokens.txt"
        write_tokens(tokens, token_lists)
        a = tmp_path / "a.txt"
        assert main(["synth", "--tokens", str(tokens), "--features-out",
                     str(tmp_path / "f.txt"), "--alignments-out", str(a)]) == 0
        lines = [l for l in a.read_text().splitlines() if l.strip()]
        assert len(lines) == 100

    def test_sigma_zero_repeats_prototypes(self, tmp_path):
        tokens = tmp_path / "tokens.txt"
        write_tokens(tokens, [["dog", "dog", "dog"]])
        f = tmp_path / "f.txt"
        a = tmp_path / "a.txt"
        assert main(["synth", "--tokens", str(tokens), "--features-out", str(f),
                     "--alignments-out", str(a), "--sigma", "0", "--min-len", "3",
                     "--max-len", "3", "--feature-dim", "2"]) == 0
        from segvec.corpus import load_alignments, load_features

        utt = load_features(f)[0]
        alis = load_alignments(a)
        first = utt.features[alis[0].start_frame:alis[0].end_frame]
        for ali in alis[1:]:
            assert np.array_equal(utt.features[ali.start_frame:ali.end_frame], first)

    def test_missing_tokens_file(self, tmp_path):
        assert main(["synth", "--tokens", str(tmp_path / "nope.txt"),
                     "--features-out", str(tmp_path / "f.txt"),
                     "--alignments-out", str(tmp_path / "a.txt")]) == 1


class TestTrainS2v:
    def test_writes_all_outputs(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        out = tmp_path / "run"
        code = main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(out), "--dim", "4",
                     "--epochs", "2", "--seed", "1"])
        assert code == 0
        for name in ("checkpoint.txt", "instances.txt", "embeddings.txt", "loss.txt"):
            assert (out / name).is_file()
        loss_lines = (out / "loss.txt").read_text().splitlines()
        assert loss_lines[0] == "epoch\tmean_frame_loss"
        assert len(loss_lines) == 3
        embs = load_embeddings(out / "embeddings.txt")
        assert set(embs.words()) == {"red", "blue", "green"}
        assert embs.dim == 4

    def test_odd_dim_is_usage_error(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        assert main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(tmp_path / "x"),
                     "--dim", "51", "--epochs", "1"]) == 1

    def test_deterministic_embedding_files(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        blobs = []
        for tag in ("one", "two"):
            out = tmp_path / tag
            assert main(["train-s2v", "--features", str(features), "--alignments",
                         str(alignments), "--out-dir", str(out), "--dim", "4",
                         "--epochs", "2", "--seed", "3"]) == 0
            blobs.append((out / "embeddings.txt").read_bytes())
        assert blobs[0] == blobs[1]

    def test_omitted_flags_fall_back_to_defaults(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        out = tmp_path / "run"
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"epochs": 1}))
        assert main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(out), "--config",
                     str(config)]) == 0
        model = load_model(out / "checkpoint.txt")
        assert model.config.mode == "skipgram"
        assert model.config.embed_dim == 50
        assert model.config.window == 3
        assert model.config.learning_rate == 1e-3
        assert model.config.epochs == 1  # from the config file

    def test_flags_override_config_file(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        out = tmp_path / "run"
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"epochs": 1, "dim": 8}))
        assert main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(out), "--config", str(config),
                     "--dim", "4"]) == 0
        assert load_model(out / "checkpoint.txt").config.embed_dim == 4

    def test_malformed_feature_file_is_data_error(self, tmp_path):
        bad = tmp_path / "f.txt"
        bad.write_text("u1 2 2\n0 0\n")
        alis = tmp_path / "a.txt"
        alis.write_text("u1 x 0 1\n")
        assert main(["train-s2v", "--features", str(bad), "--alignments", str(alis),
                     "--out-dir", str(tmp_path / "o"), "--epochs", "1"]) == 2

    def test_help_documents_defaults(self, capsys):
        assert main(["train-s2v", "--help"]) == 0
        text = capsys.readouterr().out
        assert "default: 3" in text          # window
        assert "default: 1e-3" in text       # learning rate
        assert "default: 500" in text        # epochs
        assert "10, 50, 100, 200" in text    # typical embedding sizes


class TestTrainW2v:
    def test_writes_embeddings(self, small_corpus, tmp_path):
        _, alignments = small_corpus
        out = tmp_path / "w2v.txt"
        assert main(["train-w2v", "--alignments", str(alignments), "--out", str(out),
                     "--dim", "4", "--epochs", "2", "--seed", "1"]) == 0
        embs = load_embeddings(out)
        assert set(embs.words()) == {"red", "blue", "green"}

    def test_mode_selectable(self, small_corpus, tmp_path):
        _, alignments = small_corpus
        for mode in ("skipgram", "cbow"):
            out = tmp_path / f"{mode}.txt"
            assert main(["train-w2v", "--alignments", str(alignments), "--out",
                         str(out), "--mode", mode, "--dim", "4", "--epochs", "1"]) == 0

    def test_missing_alignment_file(self, tmp_path):
        assert main(["train-w2v", "--alignments", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "o.txt")]) == 1

    def test_deterministic(self, small_corpus, tmp_path):
        _, alignments = small_corpus
        blobs = []
        for tag in ("one", "two"):
            out = tmp_path / f"{tag}.txt"
            assert main(["train-w2v", "--alignments", str(alignments), "--out",
                         str(out), "--dim", "4", "--epochs", "2", "--seed", "9"]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestEval:
    def _embeddings_file(self, tmp_path, name="e.txt", seed=0):
        rng = np.random.default_rng(seed)
        words = ["cat", "dog", "ape", "owl"]
        path = tmp_path / name
        lines = [f"{len(words)} 3"]
        vecs = {}
        for w in words:
            v = rng.standard_normal(3)
            vecs[w] = v
            lines.append(w + " " + " ".join(repr(float(x)) for x in v))
        path.write_text("\n".join(lines) + "\n")
        return path, vecs

    def test_empty_benchmark_dir_warns_and_succeeds(self, tmp_path, capsys):
        path, _ = self._embeddings_file(tmp_path)
        bench_dir = tmp_path / "bench"
        bench_dir.mkdir()
        assert main(["eval", "--embeddings", str(path), "--benchmarks",
                     str(bench_dir)]) == 0
        assert "no benchmark files" in capsys.readouterr().err

    def test_fully_covered_benchmark_has_zero_skips(self, tmp_path, capsys):
        path, _ = self._embeddings_file(tmp_path)
        bench_dir = tmp_path / "bench"
        bench_dir.mkdir()
        (bench_dir / "tiny.txt").write_text("cat dog 5.0\ncat ape 3.0\ndog owl 1.0\n")
        assert main(["eval", "--embeddings", str(path), "--benchmarks",
                     str(bench_dir), "--tsv"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "benchmark\tmodel\trho\tused\tskipped"
        fields = out[1].split("\t")
        assert fields[0] == "tiny" and fields[3] == "3" and fields[4] == "0"

    def test_rho_matches_module_oracle(self, tmp_path, capsys):
        path, vecs = self._embeddings_file(tmp_path)
        bench_dir = tmp_path / "bench"
        bench_dir.mkdir()
        pairs = [("cat", "dog", 5.0), ("cat", "ape", 3.0), ("dog", "owl", 1.0),
                 ("ape", "owl", 2.0)]
        (bench_dir / "planted.txt").write_text(
            "\n".join(f"{a} {b} {s}" for a, b, s in pairs) + "\n")
        assert main(["eval", "--embeddings", str(path), "--benchmarks",
                     str(bench_dir), "--tsv"]) == 0
        reported = float(capsys.readouterr().out.splitlines()[1].split("\t")[2])
        expected = evaluate(load_embeddings(path), Benchmark("planted", pairs)).rho
        assert reported == pytest.approx(expected, abs=5e-5)

    def test_multi_model_grid(self, tmp_path, capsys):
        p1, _ = self._embeddings_file(tmp_path, "m1.txt", seed=1)
        p2, _ = self._embeddings_file(tmp_path, "m2.txt", seed=2)
        bench_dir = tmp_path / "bench"
        bench_dir.mkdir()
        (bench_dir / "b1.txt").write_text("cat dog 5.0\ncat ape 3.0\ndog owl 1.0\n")
        (bench_dir / "b2.txt").write_text("cat owl 4.0\ndog ape 2.0\ncat dog 1.0\n")
        assert main(["eval", "--embeddings", f"first={p1}", "--embeddings",
                     f"second={p2}", "--benchmarks", str(bench_dir)]) == 0
        lines = capsys.readouterr().out.splitlines()
        header = lines[0].split()
        assert header == ["benchmark", "first", "second"]
        assert [l.split()[0] for l in lines[1:]] == ["b1", "b2"]

    def test_uncovered_benchmark_reports_na(self, tmp_path, capsys):
        path, _ = self._embeddings_file(tmp_path)
        bench_dir = tmp_path / "bench"
        bench_dir.mkdir()
        (bench_dir / "other.txt").write_text("xx yy 1.0\nzz qq 2.0\n")
        assert main(["eval", "--embeddings", str(path), "--benchmarks",
                     str(bench_dir)]) == 0
        assert "n/a" in capsys.readouterr().out


class TestVariance:
    def test_matches_library_report(self, small_corpus, tmp_path, capsys):
        features, alignments = small_corpus
        out = tmp_path / "run"
        assert main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(out), "--dim", "4",
                     "--epochs", "1", "--seed", "2"]) == 0
        assert main(["variance", "--instances", str(out / "instances.txt")]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split() == ["instances", "words", "mean_variation"]
        table = load_instance_table(out / "instances.txt")
        report = variance_study(table)
        for bucket, line in zip(report.buckets, lines[1:]):
            fields = line.split()
            assert fields[0] == bucket.label
            assert int(fields[1]) == bucket.word_count

    def test_no_word_reaches_floor(self, tmp_path, capsys):
        path = tmp_path / "inst.txt"
        path.write_text("2 2\ncat 1.0 2.0\ncat 2.0 1.0\n")
        assert main(["variance", "--instances", str(path)]) == 0
        lines = capsys.readouterr().out.splitlines()[1:]
        assert all(l.split()[1] == "0" for l in lines)
        assert all(l.split()[2] == "-" for l in lines)

    def test_identical_instances_give_zero(self, tmp_path, capsys):
        path = tmp_path / "inst.txt"
        rows = "\n".join("cat 1.5 -2.0" for _ in range(6))
        path.write_text(f"6 2\n{rows}\n")
        assert main(["variance", "--instances", str(path)]) == 0
        first_bucket = capsys.readouterr().out.splitlines()[1].split()
        assert first_bucket[1] == "1"
        assert float(first_bucket[2]) == pytest.approx(0.0, abs=1e-9)


class TestNeighbors:
    def test_ranked_output(self, tmp_path, capsys):
        path = tmp_path / "e.txt"
        path.write_text("3 2\na 1.0 0.0\nb 1.0 0.0\nc 0.0 1.0\n")
        assert main(["neighbors", "--embeddings", str(path), "--word", "a",
                     "--top", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].split() == ["1", "b", "1.0000"]
        assert lines[2].split() == ["2", "c", "0.0000"]

    def test_unknown_word_is_data_error(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("1 2\na 1.0 0.0\n")
        assert main(["neighbors", "--embeddings", str(path), "--word", "zzz"]) == 2


class TestExport:
    def test_recomputes_training_outputs(self, small_corpus, tmp_path):
        features, alignments = small_corpus
        out = tmp_path / "run"
        assert main(["train-s2v", "--features", str(features), "--alignments",
                     str(alignments), "--out-dir", str(out), "--dim", "4",
                     "--epochs", "2", "--seed", "4"]) == 0
        exported = tmp_path / "exported"
        assert main(["export", "--checkpoint", str(out / "checkpoint.txt"),
                     "--features", str(features), "--alignments", str(alignments),
                     "--out-dir", str(exported)]) == 0
        for name in ("instances.txt", "embeddings.txt"):
            assert (exported / name).read_bytes() == (out / name).read_bytes()


class TestExitCodes:
    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().out

    def test_unknown_flag_is_usage_error(self):
        assert main(["synth", "--bogus"]) == 1

    def test_bad_config_json(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text("{not json")
        assert main(["synth", "--config", str(config)]) == 1

    def test_top_level_help(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        for sub in ("synth", "train-s2v", "train-w2v", "eval", "variance",
                    "neighbors", "export"):
            assert sub in out

    def test_subcommand_helps_exit_zero(self):
        for sub in ("synth", "train-s2v", "train-w2v", "eval", "variance",
                    "neighbors", "export"):
            assert main([sub, "--help"]) == 0
