import json
import os

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

CORPUS = [
    {
        "id": "sum2",
        "description": "add two numbers",
        "code": "def add ( a , b ) : return a + b",
        "lang": "python",
    },
    {
        "id": "sortl",
        "description": "sort list items",
        "code": "def sort ( items ) : return sort items",
        "lang": "python",
    },
    {
        "id": "revl",
        "description": "reverse a list",
        "code": "def reverse ( items ) : return items reverse",
        "lang": "python",
    },
]

WORDS = [
    "add", "two", "numbers", "def", "(", "a", ",", "b", ")", ":",
    "return", "+", "sort", "list", "items", "reverse",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """A local random-weight encoder with hidden size 1024 (full-scale width)."""
    root = tmp_path_factory.mktemp("encoder")
    vocab = {tok: i for i, tok in enumerate(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS)}
    tokenizer = BertTokenizer(vocab=vocab, do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=1024,
        num_hidden_layers=2,
        num_attention_heads=8,
        intermediate_size=512,
        max_position_embeddings=512,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model_dir = root / "tiny-bert-1024"
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return str(model_dir)


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for row in CORPUS:
            fh.write(json.dumps(row) + "\n")
    return str(path)
