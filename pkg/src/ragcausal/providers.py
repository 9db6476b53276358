"""External model contracts: embedding, generation with token
probabilities, and NLI entailment.

Each contract has a JSON-over-HTTP client and a deterministic offline mock.
Mocks are pure functions of their inputs (plus seed/fixture), so repeated
runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import CapabilityError, ProviderError

log = logging.getLogger(__name__)

ABSTENTION_TEXT = "<Answer></Answer>"


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_new_tokens: int = 512
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class GenerationRecord:
    """Generated text plus the probability of each output token."""

    text: str
    tokens: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("token list must be non-empty")
        if "".join(tok for tok, _ in self.tokens) != self.text:
            raise ValueError("token strings must concatenate to the generated text")
        for tok, p in self.tokens:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"token probability out of (0, 1]: {tok!r} -> {p}")


@dataclass(frozen=True)
class NliVerdict:
    entailed: bool
    score: float


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class GenerationProvider(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationRecord: ...


class NliProvider(Protocol):
    def entails(self, premise: str, hypothesis: str) -> NliVerdict: ...


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed texts, enforcing one vector per text with uniform dimension."""
    if not texts:
        raise ValueError("texts must be non-empty")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise ProviderError(
            f"embedder returned {len(vectors)} vectors for {len(texts)} texts"
        )
    dim = vectors[0].shape[0] if vectors[0].ndim == 1 else -1
    for vec in vectors:
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise ProviderError("embedder returned vectors of drifting dimension")
        if not np.all(np.isfinite(vec)):
            raise ProviderError("embedder returned non-finite values")
    return vectors


def generate(provider: GenerationProvider, request: GenerationRequest) -> GenerationRecord:
    """Run one generation; the record's invariants are checked on construction."""
    return provider.generate(request)


def nli_entails(provider: NliProvider, premise: str, hypothesis: str) -> NliVerdict:
    if not premise or not hypothesis:
        raise ValueError("premise and hypothesis must be non-empty")
    return provider.entails(premise, hypothesis)


# ---------------------------------------------------------------------------
# Deterministic offline mocks
# ---------------------------------------------------------------------------


class HashEmbedder:
    """Seeded hash of the text expanded to d pseudo-random reals in [-1, 1].

    Deterministic across processes (sha256-based, no Python hash
    randomization) and collision-unlikely.
    """

    def __init__(self, dimension: int = 64, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        return rng.uniform(-1.0, 1.0, self.dimension)


@dataclass(frozen=True)
class GenerationRule:
    """Substring pattern mapped to a canned response; first match wins."""

    pattern: str
    text: str
    token_probs: tuple[tuple[str, float], ...]


class ScriptedGenerator:
    """Fixture-driven generation mock.

    Matches the prompt against the rules in order; unmatched prompts fall
    back to the abstention response with all probabilities 1.0. Keeps a call
    counter so pipelines can reconcile generation counts.
    """

    def __init__(self, rules: Sequence[GenerationRule] = (), seed: int = 0):
        self.rules = tuple(rules)
        self.seed = seed
        self.calls = 0

    @classmethod
    def from_fixture(cls, path: str | Path, seed: int = 0) -> "ScriptedGenerator":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = [
            GenerationRule(
                pattern=entry["pattern"],
                text=entry["text"],
                token_probs=tuple(
                    (tp["token"], float(tp["p"])) for tp in entry["token_probs"]
                ),
            )
            for entry in raw
        ]
        return cls(rules, seed=seed)

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        self.calls += 1
        for rule in self.rules:
            if rule.pattern in request.prompt:
                return GenerationRecord(text=rule.text, tokens=rule.token_probs)
        return GenerationRecord(
            text=ABSTENTION_TEXT, tokens=((ABSTENTION_TEXT, 1.0),)
        )


class TokenOverlapNli:
    """NLI stand-in: hypothesis-token coverage by the premise.

    score = |tokens(premise) ∩ tokens(hypothesis)| / |tokens(hypothesis)|,
    entailed when score >= threshold.
    """

    def __init__(self, threshold: float = 0.5):
        self.threshold = threshold

    def entails(self, premise: str, hypothesis: str) -> NliVerdict:
        premise_tokens = set(premise.lower().split())
        hypothesis_tokens = set(hypothesis.lower().split())
        if not hypothesis_tokens:
            return NliVerdict(entailed=False, score=0.0)
        score = len(premise_tokens & hypothesis_tokens) / len(hypothesis_tokens)
        return NliVerdict(entailed=score >= self.threshold, score=score)


# ---------------------------------------------------------------------------
# JSON-over-HTTP clients
# ---------------------------------------------------------------------------

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_S = 0.25
CALL_TIMEOUT_S = 60.0


def _post_json(
    url: str,
    payload: dict,
    *,
    api_key: str | None,
    post: Callable | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> dict:
    """POST with bounded retries and exponential backoff.

    ``post`` defaults to requests.post; injectable for tests. The payload is
    never mutated, so retries are idempotent.
    """
    if post is None:
        import requests

        post = requests.post
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    last_error: Exception | None = None
    for attempt in range(RETRY_ATTEMPTS):
        try:
            response = post(url, json=payload, headers=headers, timeout=CALL_TIMEOUT_S)
            status = getattr(response, "status_code", 200)
            if 400 <= status < 500:
                # Client errors are not retryable.
                raise ProviderError(f"{url} rejected the request: status {status}")
            if status >= 500:
                last_error = ProviderError(f"{url} returned status {status}")
            else:
                return response.json()
        except ProviderError:
            raise
        except Exception as exc:  # transport errors
            last_error = exc
        if attempt < RETRY_ATTEMPTS - 1:
            sleep(RETRY_BACKOFF_S * (2**attempt))
    raise ProviderError(f"{url} failed after {RETRY_ATTEMPTS} attempts: {last_error}")


@dataclass
class HttpEmbeddingClient:
    url: str
    api_key: str | None = None
    post: Callable | None = field(default=None, repr=False)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        body = _post_json(self.url, {"texts": list(texts)}, api_key=self.api_key, post=self.post)
        return [np.asarray(vec, dtype=float) for vec in body["vectors"]]


@dataclass
class HttpGenerationClient:
    url: str
    api_key: str | None = None
    post: Callable | None = field(default=None, repr=False)

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        payload = {
            "prompt": request.prompt,
            "max_new_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "seed": request.seed,
            "logprobs": True,
        }
        body = _post_json(self.url, payload, api_key=self.api_key, post=self.post)
        tokens = body.get("tokens")
        if not tokens:
            raise CapabilityError(
                f"{self.url} did not return token log-probabilities; "
                "the pipeline requires them"
            )
        token_probs = tuple(
            (tok["token"], math.exp(min(float(tok["logprob"]), 0.0))) for tok in tokens
        )
        return GenerationRecord(text=body["text"], tokens=token_probs)


@dataclass
class HttpNliClient:
    url: str
    api_key: str | None = None
    threshold: float = 0.5
    post: Callable | None = field(default=None, repr=False)

    def entails(self, premise: str, hypothesis: str) -> NliVerdict:
        body = _post_json(
            self.url,
            {"premise": premise, "hypothesis": hypothesis},
            api_key=self.api_key,
            post=self.post,
        )
        score = float(body["score"])
        return NliVerdict(entailed=score >= self.threshold, score=score)
