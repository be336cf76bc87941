"""Client side of the extractive-QA protocol and the answer-selection rule.

Each chunk is sent as ``{"question", "context"}``; the backend answers
``{"answer", "probability"}``. The final answer is the most probable
non-empty one, earliest chunk on ties.
"""

from __future__ import annotations

import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import requests

from .chunking import Chunk
from .errors import ProtocolError, TransportError
from .tokenization import TokenRegistry, detokenize

__all__ = [
    "PARAGRAPH_MARKER",
    "Answer",
    "HttpQABackend",
    "QABackend",
    "answer_question",
    "select_answer",
    "strip_markers",
]

PARAGRAPH_MARKER = re.compile(r"\[para:([^\]\s]+)\]\s*")


def strip_markers(text: str) -> str:
    return PARAGRAPH_MARKER.sub("", text).strip()


@dataclass(frozen=True)
class Answer:
    text: str
    probability: float
    source_chunk: tuple[str, int]
    source_paragraph: str | None = None

    def to_json(self) -> dict:
        return {
            "answer": self.text,
            "probability": self.probability,
            "source_chunk": {"context_id": self.source_chunk[0], "chunk_index": self.source_chunk[1]},
            "source_paragraph": self.source_paragraph,
        }


class QABackend(Protocol):
    def __call__(self, question: str, context: str) -> tuple[str, float]: ...


class HttpQABackend:
    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 1, backoff: float = 0.25):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def __call__(self, question: str, context: str) -> tuple[str, float]:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    self.endpoint, json={"question": question, "context": context}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = TransportError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"QA backend returned HTTP {resp.status_code}")
            try:
                payload = resp.json()
            except ValueError as exc:
                raise ProtocolError("QA backend returned a non-JSON body") from exc
            return _parse_response(payload)
        raise TransportError(f"QA backend {self.endpoint} unreachable: {last}")


def _parse_response(payload) -> tuple[str, float]:
    if not isinstance(payload, dict):
        raise ProtocolError("response must be a JSON object")
    answer, prob = payload.get("answer"), payload.get("probability")
    if not isinstance(answer, str):
        raise ProtocolError("response 'answer' must be a string")
    if isinstance(prob, bool) or not isinstance(prob, (int, float)):
        raise ProtocolError("response 'probability' must be a number")
    prob = float(prob)
    if not math.isfinite(prob) or not 0.0 <= prob <= 1.0:
        raise ProtocolError(f"response probability {prob} outside [0, 1]")
    return answer, prob


def select_answer(responses: Sequence[tuple[Chunk, str, float]]) -> int:
    """Index of the winning response: non-empty beats empty, then probability, then earliest chunk."""
    if not responses:
        raise ValueError("no responses to select from")

    def key(i):
        chunk, text, prob = responses[i]
        return (not text.strip(), -prob, chunk.chunk_index, chunk.context_id)

    return min(range(len(responses)), key=key)


def answer_question(
    question: str,
    candidates: Sequence[Chunk],
    backend: str | QABackend,
    *,
    max_in_flight: int = 4,
    timeout: float = 30.0,
    registry: TokenRegistry | None = None,
    locate_paragraph: Callable[[Chunk, str], str | None] | None = None,
) -> Answer:
    """Ask ``backend`` about every chunk and keep the single best answer.

    ``backend`` is an endpoint URL or any callable ``(question, context) -> (answer, probability)``.
    Chunks whose request fails in transport are skipped unless all of them fail.
    """
    if not candidates:
        raise ValueError("no candidate chunks")
    call = HttpQABackend(backend, timeout=timeout) if isinstance(backend, str) else backend

    def ask(chunk: Chunk):
        try:
            answer, prob = call(question, chunk.text)
            return _parse_response({"answer": answer, "probability": prob})
        except TransportError as exc:
            return exc
        except ProtocolError as exc:
            raise ProtocolError(f"chunk {chunk.context_id}#{chunk.chunk_index}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        raw = list(pool.map(ask, candidates))

    responses, failures = [], []
    for chunk, result in zip(candidates, raw):
        if isinstance(result, Exception):
            failures.append(f"chunk {chunk.context_id}#{chunk.chunk_index}: {result}")
            continue
        responses.append((chunk, *result))
    if not responses:
        raise TransportError("all QA requests failed: " + "; ".join(failures))

    chunk, text, prob = responses[select_answer(responses)]
    paragraph = locate_paragraph(chunk, text) if locate_paragraph else None
    text = strip_markers(text)
    if registry is not None:
        text = detokenize(text, registry)
    return Answer(text=text, probability=prob, source_chunk=(chunk.context_id, chunk.chunk_index),
                  source_paragraph=paragraph)
