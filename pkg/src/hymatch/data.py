"""Corpus ingestion, embedding-store I/O, and triple construction.

File formats (all little-endian where binary):

* Corpus: UTF-8 JSON lines, one object per line with keys
  {id, description, code, lang}.
* Embedding store: magic ``HYCQE1`` (6 bytes), u32 n, u64 item count,
  then per item u32 id-byte-length, id bytes, u32 M, and M*n float32
  row-major.  Round-trips are bit-exact.
* Triples: JSON lines {qid, pos_id, neg_id}.

Stores keep float32 on disk; compute promotes to float64 (see model).
``pseudo_embed`` is a deterministic stand-in for a frozen encoder so the
pipeline is testable without one: each token maps to a keyed-hash-seeded
random vector of norm 0.1, identical for identical tokens corpus-wide.
"""

from __future__ import annotations

import hashlib
import json
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

STORE_MAGIC = b"HYCQE1"
TOKEN_NORM = 0.1
_TOKEN_RE = re.compile(r"[^0-9a-zA-Z_]+")

SPLITS = ("train", "valid", "test")


@dataclass
class CorpusItem:
    id: str
    description: str
    code: str
    lang: str


@dataclass
class EmbeddingStore:
    """Map id -> (M, n) float32 token-embedding matrix."""

    n: int
    entries: dict = field(default_factory=dict)

    def add(self, item_id: str, matrix: np.ndarray) -> None:
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] != self.n:
            raise ValueError(
                f"entry {item_id!r}: expected (M>=1, {self.n}) matrix, got {matrix.shape}"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError(f"entry {item_id!r}: non-finite values")
        self.entries[item_id] = matrix

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, item_id: str) -> np.ndarray:
        return self.entries[item_id]

    def __contains__(self, item_id: str) -> bool:
        return item_id in self.entries


@dataclass
class TripleDataset:
    """<description, positive code, negative code> id records for one split."""

    triples: list  # of (qid, pos_id, neg_id)
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        for qid, pos, neg in self.triples:
            if pos == neg:
                raise ValueError(f"triple for {qid!r} has pos_id == neg_id")

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def member_ids(self) -> list:
        """Ids forming this split (one triple per member, qid == pos_id)."""
        return [pos for _, pos, _ in self.triples]


def load_corpus(path) -> list:
    """Parse a JSONL corpus; rejects malformed lines and duplicate ids."""
    items = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            for key in ("id", "description", "code", "lang"):
                if key not in obj:
                    raise FormatError(f"{path}:{lineno}: missing key {key!r}")
            if not obj["description"] or not obj["code"]:
                raise FormatError(f"{path}:{lineno}: empty description or code")
            item_id = str(obj["id"])
            if item_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate id {item_id!r}")
            seen.add(item_id)
            items.append(
                CorpusItem(item_id, obj["description"], obj["code"], str(obj["lang"]))
            )
    return items


def write_embeddings(store: EmbeddingStore, path) -> None:
    """Serialize a store in the HYCQE1 binary layout."""
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<IQ", store.n, len(store.entries)))
        for item_id, matrix in store.entries.items():
            id_bytes = item_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_embeddings(path) -> EmbeddingStore:
    """Read and validate a HYCQE1 store; errors on bad magic or truncation."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:6] != STORE_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:6]!r}, expected {STORE_MAGIC!r}")
    off = 6
    try:
        n, count = struct.unpack_from("<IQ", blob, off)
        off += 12
        store = EmbeddingStore(n=n)
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            if off + id_len > len(blob):
                raise FormatError(f"{path}: truncated id field")
            item_id = blob[off : off + id_len].decode("utf-8")
            off += id_len
            (rows,) = struct.unpack_from("<I", blob, off)
            off += 4
            nbytes = 4 * rows * n
            if off + nbytes > len(blob):
                raise FormatError(f"{path}: truncated matrix for {item_id!r}")
            matrix = (
                np.frombuffer(blob, dtype="<f4", count=rows * n, offset=off)
                .reshape(rows, n)
                .copy()
            )
            off += nbytes
            if item_id in store:
                raise FormatError(f"{path}: duplicate id {item_id!r}")
            store.add(item_id, matrix)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated store") from exc
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes")
    return store


def tokenize(text: str) -> list:
    """Lowercased whitespace/punctuation tokenization."""
    return [tok for tok in _TOKEN_RE.split(text.lower()) if tok]


def pseudo_embed(text: str, n: int, seed: int) -> np.ndarray:
    """Deterministic token-embedding matrix standing in for a frozen encoder.

    Every token's vector is drawn from an rng seeded by a keyed hash of the
    token string, then scaled to norm 0.1, so identical tokens share one
    vector across the whole corpus and different seeds give fresh tables.
    """
    tokens = tokenize(text)
    if not tokens:
        raise ValueError(f"text tokenizes to nothing: {text!r}")
    key = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    rows = np.empty((len(tokens), n), dtype=np.float32)
    for i, tok in enumerate(tokens):
        digest = hashlib.blake2b(tok.encode("utf-8"), key=key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vec = rng.standard_normal(n)
        rows[i] = (TOKEN_NORM / np.linalg.norm(vec)) * vec
    return rows


def embed_corpus(items, n: int, seed: int):
    """Pseudo-embed all descriptions and codes into two stores."""
    desc = EmbeddingStore(n=n)
    code = EmbeddingStore(n=n)
    for item in items:
        desc.add(item.id, pseudo_embed(item.description, n, seed))
        code.add(item.id, pseudo_embed(item.code, n, seed))
    return desc, code


def _sample_negative(rng: np.random.Generator, pool, pos_id: str) -> str:
    # rejection-resample until the draw differs from the positive
    while True:
        neg = pool[int(rng.integers(len(pool)))]
        if neg != pos_id:
            return neg


def make_triples(corpus, split_ratios, seed: int) -> dict:
    """Seeded split into train/valid/test plus within-split negative sampling.

    Returns {split_name: TripleDataset}.  A split that receives exactly one
    item cannot yield a negative and is an error; an empty split is fine.
    """
    if len(corpus) < 2:
        raise ValueError("corpus needs at least 2 items to sample negatives")
    ratios = tuple(float(r) for r in split_ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split_ratios must be 3 nonnegative values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    ids = [item.id for item in corpus]
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = int(round(ratios[0] * len(ids)))
    n_valid = int(round(ratios[1] * len(ids)))
    n_valid = min(n_valid, len(ids) - n_train)
    pools = {
        "train": shuffled[:n_train],
        "valid": shuffled[n_train : n_train + n_valid],
        "test": shuffled[n_train + n_valid :],
    }
    out = {}
    for split in SPLITS:
        pool = pools[split]
        if len(pool) == 1:
            raise ValueError(f"{split} split has a single item; cannot sample a negative")
        triples = [(pid, pid, _sample_negative(rng, pool, pid)) for pid in pool]
        out[split] = TripleDataset(triples=triples, split=split)
    return out


def resample_negatives(dataset: TripleDataset, seed: int) -> TripleDataset:
    """Fresh uniform negatives for every triple, drawn within the same split."""
    pool = dataset.member_ids
    if len(pool) < 2:
        raise ValueError("cannot resample negatives for a split with < 2 items")
    rng = np.random.default_rng(seed)
    triples = [
        (qid, pos, _sample_negative(rng, pool, pos)) for qid, pos, _ in dataset.triples
    ]
    return TripleDataset(triples=triples, split=dataset.split)


def write_triples(dataset: TripleDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, pos, neg in dataset.triples:
            fh.write(json.dumps({"qid": qid, "pos_id": pos, "neg_id": neg}) + "\n")


def read_triples(path, split: str = "train") -> TripleDataset:
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triples.append((str(obj["qid"]), str(obj["pos_id"]), str(obj["neg_id"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad triple record") from exc
    return TripleDataset(triples=triples, split=split)
