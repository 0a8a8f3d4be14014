"""Cased word-piece tokenization with greedy longest-prefix matching.

Sentences are NFC-normalized, stripped of punctuation (characters that
are neither word characters nor whitespace are removed in place, so
hyphenated words fuse: ``Multi-aged`` becomes ``Multiaged``), split on
whitespace, and each word is decomposed into the longest vocabulary
prefixes, continuations carrying the ``##`` marker.  Words with no
viable decomposition become the unknown token.

Vocabulary files use the standard word-piece layout: one token per
line, the line number (0-based) is the id.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import EmptySentence

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
UNK_TOKEN = "[UNK]"
CONTINUATION_PREFIX = "##"

MAX_INPUT_TOKENS = 512
MAX_WORD_CHARS = 100  # longer words go straight to UNK

_STRIP_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


class Vocabulary:
    """Token-to-id table with the special tokens required for encoding."""

    def __init__(self, tokens: Iterable[str], max_input_tokens: int = MAX_INPUT_TOKENS):
        self.token_to_id: dict[str, int] = {}
        self.id_to_token: list[str] = []
        for i, token in enumerate(tokens):
            if token in self.token_to_id:
                raise ValueError(f"duplicate vocabulary token: {token!r}")
            self.token_to_id[token] = i
            self.id_to_token.append(token)
        for special in (CLS_TOKEN, SEP_TOKEN, UNK_TOKEN):
            if special not in self.token_to_id:
                raise ValueError(f"vocabulary missing special token {special}")
        self.max_input_tokens = max_input_tokens

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id[token]

    def tokens_of(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    @classmethod
    def load(cls, path: str | Path, max_input_tokens: int = MAX_INPUT_TOKENS) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens, max_input_tokens=max_input_tokens)


@dataclass
class TokenizedSentence:
    """A sentence as word-piece tokens and ids, CLS/SEP delimited."""

    tokens: list[str]
    ids: list[int]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.ids)


def _clean_words(sentence: str) -> list[str]:
    text = unicodedata.normalize("NFC", sentence)
    text = _STRIP_PUNCT.sub("", text)
    return text.split()


def _wordpiece(word: str, vocab: Vocabulary) -> list[str]:
    if len(word) > MAX_WORD_CHARS:
        return [UNK_TOKEN]
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION_PREFIX + piece
            if piece in vocab.token_to_id:
                match = piece
                break
            end -= 1
        if match is None:
            return [UNK_TOKEN]
        pieces.append(match)
        start = end
    return pieces


def tokenize(sentence: str, vocab: Vocabulary) -> TokenizedSentence:
    """Encode one sentence; raises EmptySentence when nothing survives
    cleanup.  Sequences longer than the vocabulary's input limit keep
    their first tokens and drop the tail, preserving CLS and SEP.
    """
    words = _clean_words(sentence)
    if not words:
        raise EmptySentence(f"no tokenizable content in {sentence!r}")

    tokens = [CLS_TOKEN]
    for word in words:
        tokens.extend(_wordpiece(word, vocab))
    tokens.append(SEP_TOKEN)

    truncated = False
    if len(tokens) > vocab.max_input_tokens:
        tokens = tokens[: vocab.max_input_tokens - 1] + [SEP_TOKEN]
        truncated = True

    ids = [vocab.token_to_id[t] for t in tokens]
    return TokenizedSentence(tokens=tokens, ids=ids, truncated=truncated)
