"""Overlapping fixed-size token windows for contexts longer than the QA model accepts."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = ["DEFAULT_MARGIN", "DEFAULT_STRIDE", "DEFAULT_WINDOW", "Chunk", "effective_window", "sliding_window"]

DEFAULT_WINDOW = 384
DEFAULT_STRIDE = 128
DEFAULT_MARGIN = 0.7

_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class Chunk:
    context_id: str
    chunk_index: int
    token_span: tuple[int, int]
    char_span: tuple[int, int]
    text: str

    def to_json(self) -> dict:
        return {
            "context_id": self.context_id,
            "chunk_index": self.chunk_index,
            "token_span": list(self.token_span),
            "text": self.text,
        }


def effective_window(window_size: int, margin: float = DEFAULT_MARGIN) -> int:
    """Shrink the window to leave headroom for the backend's subword tokenizer."""
    if not 0 < margin <= 1:
        raise ValueError(f"margin must be in (0, 1], got {margin}")
    return max(1, int(window_size * margin))


def sliding_window(
    context: str,
    window_size: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    context_id: str = "ctx",
) -> list[Chunk]:
    """Cut ``context`` into windows of ``window_size`` tokens advancing by ``stride``.

    The final window is pinned to the end of the context, so with ``T`` tokens
    there are ``ceil((T - window_size) / stride) + 1`` chunks once ``T`` exceeds
    the window.
    """
    if window_size < 1 or stride < 1:
        raise ValueError("window_size and stride must be positive")
    if stride > window_size:
        raise ValueError(f"stride ({stride}) > window_size ({window_size}) would skip tokens")

    spans = [m.span() for m in _TOKEN.finditer(context)]
    total = len(spans)
    if total <= window_size:
        starts = [0]
    else:
        count = math.ceil((total - window_size) / stride) + 1
        starts = [min(i * stride, total - window_size) for i in range(count)]

    chunks = []
    for i, start in enumerate(starts):
        end = min(start + window_size, total)
        if total:
            cs, ce = spans[start][0], spans[end - 1][1]
        else:
            cs = ce = 0
        chunks.append(Chunk(context_id, i, (start, end), (cs, ce), context[cs:ce]))
    return chunks
