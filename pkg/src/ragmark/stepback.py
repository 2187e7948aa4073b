"""Step-back query expansion through a chat-LLM client abstraction.

A step-back prompt asks the LLM for a more abstract paraphrase of the query;
for MCQs a second prompt extracts the concepts underlying each answer choice.
The expanded pieces are conjoined with the original question into one term
multiset that drives evidence retrieval.

Clients: an HTTP chat client, a recorded-replay client for offline runs, and
a write-through JSONL reply cache usable around either.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import EmptyReply, LlmUnavailable
from .text import Term, extract_terms

STEPBACK_QUESTION_TEMPLATE = """You are an expert at world knowledge. Your task is to step back and paraphrase a question to a more generic step-back question, which is easier to answer. Here are a few examples:

Original Question: Which position did Knox Cunningham hold from May 1955 to Apr 1956?
Stepback Question: Which positions have Knox Cunningham held in his career?

Original Question: who has scored most runs in t20 matches as of 2017
Stepback Question: What are the runs of players in t20 matches as of 2017

Original Question: When was the abolishment of the studio that distributed The Game?
Stepback Question: which studio distributed The Game?

Original Question: What city is the person who broadened the doctrine of philosophy of language from?
Stepback Question: who broadened the doctrine of philosophy of language

Original Question: Would a Monoamine Oxidase candy bar cheer up a depressed friend?
Stepback Question: What are the effects of Monoamine Oxidase?

What is the Stepback Question for this?: {original_question_text}
Answer with only the Stepback Question and no extra text."""

STEPBACK_CHOICE_TEMPLATE = """You are an expert at world knowledge. You are given a statement. Your task is to extract the concepts and principles underlying the statement. Answer only with the concepts and principles without any extra text.
If there are multiple concepts and principles, list them separated by commas.
Original Statement: {answer_text}
Answer:"""


@dataclass(frozen=True)
class LlmClientConfig:
    endpoint: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 60.0
    retries: int = 3


class ChatClient(Protocol):
    model_name: str

    def complete(self, prompt: str) -> str: ...


class HttpChatClient:
    """POSTs a single-user-message chat request; returns the first choice's content."""

    def __init__(
        self,
        config: LlmClientConfig,
        api_key: str | None = None,
        post: Callable[..., requests.Response] | None = None,
    ):
        self.config = config
        self.model_name = config.model_name
        self.api_key = api_key if api_key is not None else os.environ.get("LLM_API_KEY")
        self._post = post or requests.post

    def request_body(self, prompt: str) -> dict:
        return {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self._post(
                    self.config.endpoint,
                    json=self.request_body(prompt),
                    headers=headers,
                    timeout=self.config.timeout,
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.config.retries:
                    time.sleep(min(2.0**attempt * 0.1, 2.0))
        raise LlmUnavailable(
            f"chat endpoint failed after {self.config.retries + 1} attempts: {last_error}"
        )


def _prompt_hash(model: str, prompt: str) -> str:
    return hashlib.sha256(f"{model}\x00{prompt}".encode("utf-8")).hexdigest()


class ReplyCache:
    """Append-only JSONL of {model, prompt_hash, prompt, reply}, keyed in memory."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._replies: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._replies[rec["prompt_hash"]] = rec["reply"]
                except (json.JSONDecodeError, KeyError):
                    continue

    def get(self, model: str, prompt: str) -> str | None:
        with self._lock:
            return self._replies.get(_prompt_hash(model, prompt))

    def put(self, model: str, prompt: str, reply: str) -> None:
        key = _prompt_hash(model, prompt)
        with self._lock:
            if key in self._replies:
                return
            self._replies[key] = reply
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"model": model, "prompt_hash": key, "prompt": prompt, "reply": reply}
                    )
                    + "\n"
                )


class CachingChatClient:
    """Read-through reply cache around any chat client."""

    def __init__(self, inner: ChatClient, cache: ReplyCache):
        self.inner = inner
        self.cache = cache
        self.model_name = inner.model_name

    def complete(self, prompt: str) -> str:
        cached = self.cache.get(self.model_name, prompt)
        if cached is not None:
            return cached
        reply = self.inner.complete(prompt)
        self.cache.put(self.model_name, prompt, reply)
        return reply


class RecordedChatClient:
    """Replays cached replies only; raises when a prompt was never recorded."""

    def __init__(self, cache: ReplyCache, model_name: str = "recorded"):
        self.cache = cache
        self.model_name = model_name

    def complete(self, prompt: str) -> str:
        reply = self.cache.get(self.model_name, prompt)
        if reply is None:
            raise LlmUnavailable(f"no recorded reply for prompt hash {_prompt_hash(self.model_name, prompt)}")
        return reply


class StubChatClient:
    """Deterministic test double: answers via a callable or a fixed string."""

    def __init__(self, reply: str | Callable[[str], str], model_name: str = "stub"):
        self._reply = reply
        self.model_name = model_name
        self.calls: list[str] = []

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        return self._reply(prompt) if callable(self._reply) else self._reply


@dataclass(frozen=True)
class ConjoinedQuery:
    """Original question plus optional step-back expansions, with derived terms."""

    original: str
    stepback: str | None = None
    choice_concepts: str | None = None

    @property
    def terms(self) -> tuple[Term, ...]:
        parts = [self.original]
        if self.stepback:
            parts.append(self.stepback)
        if self.choice_concepts:
            parts.append(self.choice_concepts)
        return extract_terms(" ".join(parts), drop_stopwords=True)


def stepback_question(original: str, client: ChatClient) -> str:
    """Ask the client for the abstract step-back version of `original`."""
    if not original:
        raise ValueError("original question must be non-empty")
    prompt = STEPBACK_QUESTION_TEMPLATE.format(original_question_text=original)
    reply = client.complete(prompt).strip()
    if reply.lower().startswith("stepback question:"):
        reply = reply[len("stepback question:") :].strip()
    if not reply:
        raise EmptyReply("step-back model returned a blank reply")
    return reply


def stepback_choice_concepts(choice_text: str, client: ChatClient) -> str:
    """Extract the concepts underlying an MCQ answer choice; falls back to the choice."""
    if not choice_text:
        raise ValueError("choice text must be non-empty")
    prompt = STEPBACK_CHOICE_TEMPLATE.format(answer_text=choice_text)
    reply = client.complete(prompt).strip()
    if reply.lower().startswith("answer:"):
        reply = reply[len("answer:") :].strip()
    return reply if reply else choice_text


def conjoin(
    original: str,
    stepback: str | None = None,
    choice_concepts: str | None = None,
) -> ConjoinedQuery:
    if not original:
        raise ValueError("original question must be non-empty")
    return ConjoinedQuery(original=original, stepback=stepback, choice_concepts=choice_concepts)


def expand_query(
    question: str,
    client: ChatClient | None,
    choice_text: str | None = None,
) -> ConjoinedQuery:
    """Conjoin `question` with step-back expansions when a client is given.

    A blank step-back reply falls back to the original-only query; a blank
    concept reply falls back to the raw choice text.
    """
    if client is None:
        return conjoin(question)
    try:
        sb = stepback_question(question, client)
    except EmptyReply:
        sb = None
    concepts = stepback_choice_concepts(choice_text, client) if choice_text else None
    return conjoin(question, sb, concepts)
