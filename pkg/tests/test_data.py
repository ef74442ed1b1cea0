import json

import numpy as np
import pytest
from scipy import stats

from hymatch.data import (
    CorpusItem,
    EmbeddingStore,
    TripleDataset,
    load_corpus,
    make_triples,
    pseudo_embed,
    read_embeddings,
    read_triples,
    resample_negatives,
    tokenize,
    write_embeddings,
    write_triples,
)
from hymatch.errors import FormatError


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def corpus_rows(k):
    return [
        {"id": f"item{i}", "description": f"desc {i}", "code": f"def f{i}(): pass", "lang": "python"}
        for i in range(k)
    ]


class TestLoadCorpus:
    def test_happy_path_in_order(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, corpus_rows(3))
        items = load_corpus(path)
        assert [it.id for it in items] == ["item0", "item1", "item2"]
        assert items[1].code == "def f1(): pass"

    def test_missing_key_names_line(self, tmp_path):
        rows = corpus_rows(3)
        del rows[1]["code"]
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, rows)
        with pytest.raises(FormatError, match=r":2:.*'code'"):
            load_corpus(path)

    def test_duplicate_id_named(self, tmp_path):
        rows = corpus_rows(2)
        rows[1]["id"] = "item0"
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, rows)
        with pytest.raises(FormatError, match="item0"):
            load_corpus(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "a", "description": "d", "code": "c", "lang": "py"}\n{oops\n')
        with pytest.raises(FormatError, match=":2:"):
            load_corpus(path)

    def test_empty_code_rejected(self, tmp_path):
        rows = corpus_rows(1)
        rows[0]["code"] = ""
        path = tmp_path / "corpus.jsonl"
        write_corpus(path, rows)
        with pytest.raises(FormatError, match=":1:"):
            load_corpus(path)


class TestEmbeddingStoreIO:
    def test_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        store = EmbeddingStore(n=4)
        store.add("a", rng.standard_normal((3, 4)).astype(np.float32))
        store.add("b", rng.standard_normal((1, 4)).astype(np.float32))
        path = tmp_path / "store.bin"
        write_embeddings(store, path)
        loaded = read_embeddings(path)
        assert loaded.n == 4 and list(loaded.entries) == ["a", "b"]
        for key in store.entries:
            assert np.array_equal(loaded[key], store[key])
            assert loaded[key].dtype == np.float32

    def test_write_read_write_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        store = EmbeddingStore(n=3)
        for i in range(5):
            store.add(f"id{i}", rng.standard_normal((i + 1, 3)).astype(np.float32))
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        write_embeddings(store, p1)
        write_embeddings(read_embeddings(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_store_roundtrips(self, tmp_path):
        path = tmp_path / "empty.bin"
        write_embeddings(EmbeddingStore(n=7), path)
        loaded = read_embeddings(path)
        assert loaded.n == 7 and len(loaded) == 0

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"WRONG!" + b"\x00" * 12)
        with pytest.raises(FormatError, match="magic"):
            read_embeddings(path)

    def test_truncated(self, tmp_path):
        store = EmbeddingStore(n=4)
        store.add("a", np.ones((2, 4), dtype=np.float32))
        path = tmp_path / "store.bin"
        write_embeddings(store, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(FormatError):
            read_embeddings(path)

    def test_row_dim_validated(self):
        store = EmbeddingStore(n=4)
        with pytest.raises(ValueError):
            store.add("a", np.ones((2, 3), dtype=np.float32))
        with pytest.raises(ValueError):
            store.add("b", np.ones((0, 4), dtype=np.float32))


class TestMakeTriples:
    def test_two_item_corpus_forced_negative(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(2)]
        datasets = make_triples(corpus, (1.0, 0.0, 0.0), seed=0)
        triples = datasets["train"].triples
        assert len(triples) == 2
        for qid, pos, neg in triples:
            assert pos == qid and neg != pos

    def test_deterministic(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(20)]
        a = make_triples(corpus, (0.8, 0.1, 0.1), seed=5)
        b = make_triples(corpus, (0.8, 0.1, 0.1), seed=5)
        for split in ("train", "valid", "test"):
            assert a[split].triples == b[split].triples

    def test_splits_disjoint_and_cover(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(50)]
        datasets = make_triples(corpus, (0.6, 0.2, 0.2), seed=1)
        ids = [set(ds.member_ids) for ds in datasets.values()]
        assert len(ids[0]) == 30 and len(ids[1]) == 10 and len(ids[2]) == 10
        assert ids[0] | ids[1] | ids[2] == {f"i{k}" for k in range(50)}
        assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])

    def test_negatives_within_split(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(40)]
        datasets = make_triples(corpus, (0.5, 0.25, 0.25), seed=2)
        for ds in datasets.values():
            members = set(ds.member_ids)
            for _, pos, neg in ds.triples:
                assert neg in members and neg != pos

    def test_single_item_split_rejected(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(3)]
        with pytest.raises(ValueError, match="single item"):
            make_triples(corpus, (2 / 3, 1 / 3, 0.0), seed=0)

    def test_tiny_corpus_rejected(self):
        with pytest.raises(ValueError):
            make_triples([CorpusItem("a", "d", "c", "py")], (1.0, 0.0, 0.0), seed=0)


class TestResampleNegatives:
    def test_pool_and_determinism(self):
        corpus = [CorpusItem(f"i{k}", "d", "c", "py") for k in range(10)]
        ds = make_triples(corpus, (1.0, 0.0, 0.0), seed=3)["train"]
        r1 = resample_negatives(ds, seed=11)
        r2 = resample_negatives(ds, seed=11)
        assert r1.triples == r2.triples
        assert [t[:2] for t in r1.triples] == [t[:2] for t in ds.triples]

    def test_uniform_negative_distribution(self):
        # one query, 100 fresh draws, chi-square vs the uniform oracle over 10 bins
        corpus = [CorpusItem(f"i{k:04d}", "d", "c", "py") for k in range(1000)]
        ds = make_triples(corpus, (1.0, 0.0, 0.0), seed=4)
        qid = ds["train"].triples[0][0]
        pool = sorted(set(ds["train"].member_ids) - {qid})
        index = {cid: i for i, cid in enumerate(pool)}
        draws = []
        for rep in range(100):
            res = resample_negatives(ds["train"], seed=1000 + rep)
            neg = next(t[2] for t in res.triples if t[0] == qid)
            draws.append(index[neg])
        bins = np.linspace(0, len(pool), 11)
        observed, _ = np.histogram(draws, bins=bins)
        expected = np.diff(bins) / len(pool) * 100
        _, p = stats.chisquare(observed, expected)
        assert p > 0.01


class TestPseudoEmbed:
    def test_repeated_token_identical_rows(self):
        mat = pseudo_embed("loop loop", 16, seed=0)
        assert np.array_equal(mat[0], mat[1])

    def test_three_tokens_norm(self):
        mat = pseudo_embed("add two numbers", 32, seed=0)
        assert mat.shape == (3, 32)
        for row in mat:
            assert abs(np.linalg.norm(row) - 0.1) < 1e-9

    def test_seed_keys_the_table(self):
        a = pseudo_embed("same text", 8, seed=0)
        b = pseudo_embed("same text", 8, seed=1)
        assert not np.array_equal(a, b)

    def test_pure_function(self):
        a = pseudo_embed("def foo(x): return x + 1", 24, seed=9)
        b = pseudo_embed("def foo(x): return x + 1", 24, seed=9)
        assert np.array_equal(a, b)

    def test_corpus_wide_token_sharing(self):
        a = pseudo_embed("alpha beta", 16, seed=2)
        b = pseudo_embed("gamma beta", 16, seed=2)
        assert np.array_equal(a[1], b[1])

    def test_tokenization(self):
        assert tokenize("Add(Two, numbers)!") == ["add", "two", "numbers"]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pseudo_embed("!!!", 8, seed=0)


class TestTriplesIO:
    def test_roundtrip(self, tmp_path):
        ds = TripleDataset(triples=[("a", "a", "b"), ("b", "b", "a")], split="test")
        path = tmp_path / "triples.jsonl"
        write_triples(ds, path)
        loaded = read_triples(path, split="test")
        assert loaded.triples == ds.triples and loaded.split == "test"

    def test_bad_record(self, tmp_path):
        path = tmp_path / "triples.jsonl"
        path.write_text('{"qid": "a", "pos_id": "a"}\n')
        with pytest.raises(FormatError, match=":1:"):
            read_triples(path)

    def test_pos_eq_neg_rejected(self):
        with pytest.raises(ValueError):
            TripleDataset(triples=[("a", "a", "a")], split="train")
