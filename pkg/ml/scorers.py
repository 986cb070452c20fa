"""
Pair Scorers — (question, passage) relevance probabilities
===========================================================

Two implementations of one interface:

    LexicalScorer   builtin fallback: BM25 of question vs passage, min–max
                    normalized within the request batch
    ExternalScorer  child process speaking newline-delimited JSON over
                    stdin/stdout, so a fine-tuned classifier from any runtime
                    can plug in

External protocol (version 1):
    child → {"protocol": "pair-scorer", "version": 1}                 once, on start
    parent → {"pair_id": ..., "question_text": ..., "passage_text": ...}   per request
    child → {"pair_id": ..., "probability": ...}                      per request, same order

A malformed, mismatched or missing response aborts the batch with the pair_id
it belongs to; there are no silent defaults.
"""

import json
import logging
import math
import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from core.bm25_index import Bm25Index, Bm25Params
from core.exceptions import (
    ScorerCrashedError,
    ScorerError,
    ScorerProtocolError,
    ScorerTimeoutError,
)
from core.text_normalizer import TextPipeline

logger = logging.getLogger(__name__)

PROTOCOL_NAME = "pair-scorer"
PROTOCOL_VERSION = 1

_EOF = object()


@dataclass(frozen=True)
class ScoreRequest:
    pair_id: str
    question_text: str
    passage_text: str

    def to_line(self) -> str:
        return json.dumps(
            {"pair_id": self.pair_id, "question_text": self.question_text, "passage_text": self.passage_text},
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class ScoreResponse:
    pair_id: str
    probability: float


@runtime_checkable
class Scorer(Protocol):
    name: str

    def score_batch(self, requests: Sequence[ScoreRequest]) -> List[ScoreResponse]:
        ...

    def close(self) -> None:
        ...


# ================================================================
# Builtin lexical scorer
# ================================================================


class LexicalScorer:
    """Min–max normalized BM25 over the passages of one batch; deterministic."""

    name = "builtin-lexical"

    def __init__(self, pipeline: Optional[TextPipeline] = None, params: Bm25Params = Bm25Params()):
        self.pipeline = pipeline or TextPipeline()
        self.params = params

    def score_batch(self, requests: Sequence[ScoreRequest]) -> List[ScoreResponse]:
        if not requests:
            return []
        mini = Bm25Index.build(
            ((r.pair_id, self.pipeline.process(r.passage_text)) for r in requests),
            self.params,
        )
        raw = np.array(
            [mini.score(self.pipeline.process(r.question_text), r.pair_id) for r in requests],
            dtype=np.float64,
        )
        lo, hi = float(raw.min()), float(raw.max())
        if hi - lo <= 0.0:
            probs = np.full(len(requests), 0.5)
        else:
            probs = (raw - lo) / (hi - lo)
        return [ScoreResponse(r.pair_id, float(p)) for r, p in zip(requests, probs)]

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ================================================================
# External process scorer
# ================================================================


class ExternalScorer:
    """
    Long-lived child process scoring batches serially.

    A daemon thread drains the child's stdout into a queue so writing a large
    batch never blocks on a full pipe, and reads can honour the timeout.
    """

    def __init__(self, command: Sequence[str], timeout: float = 60.0, name: Optional[str] = None):
        if not command:
            raise ScorerError("External scorer command is empty")
        if timeout <= 0:
            raise ScorerError(f"timeout must be > 0, got {timeout}")
        self.command = list(command)
        self.timeout = timeout
        self.name = name or f"external:{self.command[0]}"
        self._lock = threading.Lock()
        self._lines: "queue.Queue" = queue.Queue()
        self._proc: Optional[subprocess.Popen] = None
        self._reader: Optional[threading.Thread] = None

    # ── lifecycle ──────────────────────────────────────────────────

    def start(self) -> None:
        if self._proc is not None:
            return
        try:
            proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerCrashedError(f"Cannot start scorer {self.command!r}: {exc}") from exc

        # one queue per child: lines left over from a dead child never reach the next
        self._proc = proc
        self._lines = queue.Queue()
        self._reader = threading.Thread(
            target=self._drain, args=(proc, self._lines), daemon=True, name="scorer-reader"
        )
        self._reader.start()
        try:
            self._handshake()
        except Exception:
            self.close()
            raise
        logger.info(f"External scorer started: {' '.join(self.command)} (pid {proc.pid})")

    @staticmethod
    def _drain(proc: subprocess.Popen, lines: "queue.Queue") -> None:
        assert proc.stdout is not None
        try:
            for line in proc.stdout:
                lines.put(line)
        except (OSError, ValueError):
            pass
        lines.put(_EOF)

    def _next_line(self, deadline: float, pair_id: Optional[str]) -> str:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise ScorerTimeoutError(
                f"{self.name}: no response within {self.timeout}s", pair_id=pair_id
            )
        try:
            item = self._lines.get(timeout=remaining)
        except queue.Empty:
            raise ScorerTimeoutError(
                f"{self.name}: no response within {self.timeout}s", pair_id=pair_id
            ) from None
        if item is _EOF:
            code = self._proc.poll() if self._proc else None
            raise ScorerCrashedError(
                f"{self.name}: output closed before a response (exit code {code})", pair_id=pair_id
            )
        return item

    def _handshake(self) -> None:
        line = self._next_line(time.monotonic() + self.timeout, None)
        try:
            hello = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerProtocolError(f"{self.name}: handshake is not JSON: {line.strip()!r}") from exc
        if not isinstance(hello, dict) or hello.get("protocol") != PROTOCOL_NAME:
            raise ScorerProtocolError(f"{self.name}: unexpected handshake {line.strip()!r}")
        if hello.get("version") != PROTOCOL_VERSION:
            raise ScorerProtocolError(
                f"{self.name}: protocol version {hello.get('version')} unsupported, expected {PROTOCOL_VERSION}"
            )

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()
        reader, self._reader = self._reader, None
        if reader is not None:
            reader.join(timeout=5)
        if proc.stdout:
            proc.stdout.close()
        logger.debug(f"{self.name}: exited with code {proc.returncode}")

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()

    # ── scoring ────────────────────────────────────────────────────

    def score_batch(self, requests: Sequence[ScoreRequest]) -> List[ScoreResponse]:
        if not requests:
            return []
        with self._lock:
            self.start()
            assert self._proc is not None and self._proc.stdin is not None
            try:
                for req in requests:
                    self._proc.stdin.write(req.to_line() + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self.close()
                raise ScorerCrashedError(
                    f"{self.name}: cannot write requests: {exc}", pair_id=requests[0].pair_id
                ) from exc

            deadline = time.monotonic() + self.timeout
            try:
                return [self._parse(self._next_line(deadline, req.pair_id), req) for req in requests]
            except ScorerError:
                # stream position is lost after a bad batch
                self.close()
                raise

    def _parse(self, line: str, req: ScoreRequest) -> ScoreResponse:
        try:
            payload = json.loads(line)
            pair_id = payload["pair_id"]
            probability = float(payload["probability"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScorerProtocolError(
                f"{self.name}: malformed response for {req.pair_id}: {line.strip()!r}",
                pair_id=req.pair_id,
            ) from exc
        if pair_id != req.pair_id:
            raise ScorerProtocolError(
                f"{self.name}: expected response for {req.pair_id}, got {pair_id!r}",
                pair_id=req.pair_id,
            )
        return ScoreResponse(pair_id, probability)


# ================================================================
# Boundary checks
# ================================================================


def score_pairs(scorer: Scorer, requests: Sequence[ScoreRequest]) -> List[ScoreResponse]:
    """
    Score a batch and enforce the boundary contract.

    Returns one response per request in request order, probabilities clamped
    to [0, 1].

    Raises:
        ScorerError: duplicate request ids
        ScorerProtocolError: missing/extra responses or a non-finite probability
    """
    ids = [r.pair_id for r in requests]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ScorerError(f"Duplicate pair_id in request batch: {dup}", pair_id=dup)

    responses = scorer.score_batch(requests)
    by_id = {}
    for resp in responses:
        if resp.pair_id in by_id:
            raise ScorerProtocolError(f"{scorer.name}: duplicate response for {resp.pair_id}", resp.pair_id)
        by_id[resp.pair_id] = resp

    out: List[ScoreResponse] = []
    for pair_id in ids:
        resp = by_id.pop(pair_id, None)
        if resp is None:
            raise ScorerProtocolError(f"{scorer.name}: no response for {pair_id}", pair_id)
        if not math.isfinite(resp.probability):
            raise ScorerProtocolError(
                f"{scorer.name}: non-finite probability {resp.probability} for {pair_id}", pair_id
            )
        out.append(ScoreResponse(pair_id, min(1.0, max(0.0, resp.probability))))
    if by_id:
        extra = sorted(by_id)[0]
        raise ScorerProtocolError(f"{scorer.name}: response for unknown pair {extra}", extra)
    return out
