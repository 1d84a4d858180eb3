"""Batched pair encoding with order-preserving, deterministic output."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

log = logging.getLogger("pairembed")


class ModelLoadFailure(Exception):
    """The encoder or its tokenizer could not be loaded."""


@dataclass(frozen=True)
class ExtractorConfig:
    """Encoder selection and pooling behaviour.

    ``pooling`` is either "aggregate-token" (the encoder's sequence-level
    token, the paired-segment pretraining convention) or "mean-pool"
    (mask-weighted mean over token states). When a pair exceeds
    ``max_length`` the first unit is truncated preferentially, keeping the
    second unit (the one being classified against the first) intact.
    """

    model: str
    pooling: str = "aggregate-token"
    max_length: int = 128
    batch_size: int = 16
    single_thread: bool = True

    def __post_init__(self) -> None:
        if self.pooling not in ("aggregate-token", "mean-pool"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.max_length < 8:
            raise ValueError("max_length must be at least 8")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def read_pairs(tasks_path: str | Path) -> list[tuple[str, str, str]]:
    """(task_id, first text, second text) from the line-delimited tasks file."""
    pairs = []
    with open(tasks_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            try:
                pairs.append(
                    (str(record["task_id"]), str(record["pi1"]["text"]), str(record["pi2"]["text"]))
                )
            except KeyError as exc:
                raise ValueError(f"{tasks_path}:{lineno}: missing field {exc}") from exc
    return pairs


def _load_encoder(config: ExtractorConfig):
    try:
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(config.model)
        model = AutoModel.from_pretrained(config.model)
    except Exception as exc:
        raise ModelLoadFailure(f"cannot load encoder {config.model!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _encode_batches(
    pairs: list[tuple[str, str, str]], tokenizer, model, config: ExtractorConfig
) -> Iterator[tuple[str, list[float]]]:
    import torch

    if config.single_thread:
        torch.set_num_threads(1)

    # tokenize pair by pair so an over-long second unit can fall back to
    # joint truncation without disturbing the rest of the batch
    encoded = []
    for task_id, first, second in pairs:
        second_len = len(tokenizer(second, add_special_tokens=False)["input_ids"])
        if second_len + 3 >= config.max_length:
            log.warning(
                "task %s: second unit alone exceeds max_length=%d; truncating both units",
                task_id, config.max_length,
            )
            features = tokenizer(
                first, second, truncation="longest_first", max_length=config.max_length
            )
        else:
            total = len(
                tokenizer(first, second, add_special_tokens=True)["input_ids"]
            )
            if total > config.max_length:
                log.warning(
                    "task %s: pair of %d tokens exceeds max_length=%d; first unit truncated",
                    task_id, total, config.max_length,
                )
            features = tokenizer(
                first, second, truncation="only_first", max_length=config.max_length
            )
        encoded.append(features)

    with torch.no_grad():
        for start in range(0, len(pairs), config.batch_size):
            chunk = encoded[start : start + config.batch_size]
            batch = tokenizer.pad(chunk, return_tensors="pt")
            output = model(**batch)
            hidden = output.last_hidden_state
            if config.pooling == "aggregate-token":
                vectors = hidden[:, 0, :]
            else:
                mask = batch["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                vectors = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
            for offset, vector in enumerate(vectors):
                task_id = pairs[start + offset][0]
                yield task_id, [float(v) for v in vector]


def embed_pairs(tasks_path: str | Path, out_path: str | Path, config: ExtractorConfig) -> int:
    """Encode every task's pair and write the embedding file atomically.

    Output order matches input order regardless of batching. The header
    records the dimension plus the encoder and pooling used, so files are
    self-describing.
    """
    pairs = read_pairs(tasks_path)
    tokenizer, model = _load_encoder(config)
    out_path = Path(out_path)
    dim = int(model.config.hidden_size)
    count = 0
    fd, tmp = tempfile.mkstemp(prefix=out_path.name + ".", dir=out_path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            header = {"dim": dim, "model": config.model, "pooling": config.pooling}
            fh.write(json.dumps(header) + "\n")
            for task_id, vector in _encode_batches(pairs, tokenizer, model, config):
                fh.write(json.dumps({"task_id": task_id, "vector": vector}) + "\n")
                count += 1
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return count
