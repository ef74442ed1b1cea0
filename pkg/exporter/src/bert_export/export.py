"""Frozen-encoder token-embedding export.

Reads a JSONL corpus ({id, description, code, lang} per line), runs every
description and code snippet through a frozen pretrained encoder, and
writes per-token vectors as two HYCQE1 stores (descriptions, codes).

HYCQE1 layout (little-endian): magic ``HYCQE1``, u32 n, u64 item count,
then per item u32 id-byte-length, id bytes, u32 M, M*n float32 row-major.
This is the interchange format of the downstream matcher; nothing else
couples the two components.

Two embedding readings are supported: the contextual final hidden layer
(default) and ``layer 0``, the context-free word-embedding lookup, which
matches a strictly static reading of a frozen encoder.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

STORE_MAGIC = b"HYCQE1"


class ExportError(Exception):
    """Corpus, model, or dimension problems that must abort the export."""


@dataclass
class ExportJob:
    corpus: str
    out_desc: str
    out_code: str
    model_id: str
    max_q: int = 64
    max_a: int = 256
    device: str = "cpu"
    layer: str = "last"  # "last" or "0"
    expected_n: int | None = None

    def __post_init__(self):
        if self.max_q < 1 or self.max_a < 1:
            raise ExportError("max token counts must be >= 1")
        if self.layer not in ("last", "0"):
            raise ExportError(f"unsupported layer {self.layer!r} (use 'last' or '0')")


def read_corpus(path: str) -> list:
    items = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            for key in ("id", "description", "code", "lang"):
                if key not in obj:
                    raise ExportError(f"{path}:{lineno}: missing key {key!r}")
            if obj["id"] in seen:
                raise ExportError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            items.append(obj)
    return items


def write_store(entries: dict, n: int, path: str) -> None:
    """Serialize {id: (M, n) float32} in the HYCQE1 layout."""
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<IQ", n, len(entries)))
        for item_id, matrix in entries.items():
            id_bytes = item_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


class FrozenEncoder:
    """A pretrained encoder locked in inference mode."""

    def __init__(self, model_id: str, device: str):
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise ExportError(f"cannot load pretrained model {model_id!r}: {exc}") from exc
        self.model.to(device)
        self.model.eval()
        self.model.requires_grad_(False)
        self.device = device
        self.hidden_size = int(self.model.config.hidden_size)

    def embed(self, text: str, max_tokens: int, layer: str) -> np.ndarray:
        """Per-token vectors (M, hidden_size) for the truncated text."""
        enc = self.tokenizer(
            text,
            add_special_tokens=False,
            truncation=True,
            max_length=max_tokens,
            return_tensors="pt",
        )
        if enc["input_ids"].shape[1] == 0:
            raise ExportError(f"text tokenizes to zero tokens: {text!r}")
        enc = {k: v.to(self.device) for k, v in enc.items()}
        with torch.no_grad():
            if layer == "0":
                vectors = self.model.get_input_embeddings()(enc["input_ids"])[0]
            else:
                vectors = self.model(**enc).last_hidden_state[0]
        return vectors.cpu().numpy().astype(np.float32)


def export_embeddings(job: ExportJob) -> dict:
    """Run the frozen encoder over the corpus and write both stores."""
    items = read_corpus(job.corpus)
    encoder = FrozenEncoder(job.model_id, job.device)
    n = encoder.hidden_size
    if job.expected_n is not None and job.expected_n != n:
        raise ExportError(
            f"dimension mismatch: model hidden size {n}, expected n={job.expected_n}"
        )
    desc_entries = {}
    code_entries = {}
    for obj in items:
        item_id = str(obj["id"])
        try:
            desc_entries[item_id] = encoder.embed(obj["description"], job.max_q, job.layer)
            code_entries[item_id] = encoder.embed(obj["code"], job.max_a, job.layer)
        except ExportError as exc:
            raise ExportError(f"item {item_id!r}: {exc}") from exc
    write_store(desc_entries, n, job.out_desc)
    write_store(code_entries, n, job.out_code)
    return {"items": len(items), "n": n}
