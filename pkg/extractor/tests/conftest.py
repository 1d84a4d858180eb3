"""A tiny local encoder so tests run fully offline."""

from __future__ import annotations

import json

import pytest

WORDS = [
    "we", "moved", "here", "last", "spring", "and", "like", "the", "lake",
    "is", "water", "clean", "enough", "to", "swim", "beach", "crew", "rakes",
    "it", "weekly", "should", "come", "by", "some", "weekend", "then", "so",
    "people", "dumping", "trash", "cans", ".", ",", "?",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    target = tmp_path_factory.mktemp("tiny-encoder")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    vocab_file = target / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(target)

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        type_vocab_size=2,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.save_pretrained(target)
    return target


@pytest.fixture()
def tasks_file(tmp_path):
    """Ten unit pairs in the tasks-file wire format."""
    texts = [
        ("we moved here last spring", "and we like the lake ."),
        ("is the water clean enough to swim ?", "it is ."),
        ("the beach crew rakes it weekly", "so people should come by ."),
        ("we should come by some weekend", "then we swim ."),
        ("people dumping trash", "the cans like the beach ."),
        ("we moved here last spring", "and we like the lake ."),  # duplicate of task 0
        ("the lake is clean", "we swim weekly ."),
        ("come by then", "the water is clean enough ."),
        ("last weekend we moved", "and the crew rakes the beach ."),
        ("the cans", "people should come ."),
    ]
    path = tmp_path / "tasks.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for i, (first, second) in enumerate(texts):
            record = {
                "task_id": f"task-{i:02d}",
                "dialogue_id": "demo",
                "pair_type": "within_turn",
                "pi1": {"unit_ids": [f"u{i}a"], "text": first, "style": "italic", "units": []},
                "pi2": {"unit_ids": [f"u{i}b"], "text": second, "style": "bold", "units": []},
                "context_before": [],
                "context_after": [],
            }
            fh.write(json.dumps(record) + "\n")
    return path
