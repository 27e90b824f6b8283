"""Translation and completion backends, including deterministic mocks.

Live backends speak a small JSON-over-HTTP protocol; mock backends replay
recorded responses keyed by a request digest, or translate word-by-word
from a dictionary.  Credentials are referenced by environment variable
name only and never appear in errors, logs, or serialized configs.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from .markup import (
    MarkupFormat,
    StyledText,
    parse_tagged,
    render_tagged,
    spans_from_indices,
)


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """The endpoint could not be reached."""


class RemoteError(BackendError):
    """The endpoint answered with an error or an unusable payload."""


class AuthError(BackendError):
    """Authentication failed; never retried."""


class EmptyCompletionError(BackendError):
    """The backend returned an empty completion."""


class OovError(BackendError):
    """The dictionary backend has no entry for one or more words."""

    def __init__(self, words: Sequence[str]):
        self.words = tuple(words)
        super().__init__(f"no dictionary entry for: {', '.join(self.words)}")


@dataclass(frozen=True)
class TranslationRequest:
    body: str
    source_lang: str
    target_lang: str
    preserve_markup: bool = False

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError("translation request body is empty")
        if not self.source_lang or not self.target_lang:
            raise ValueError("language codes must be non-empty")
        if self.source_lang == self.target_lang:
            raise ValueError("source and target languages must differ")


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    max_output_tokens: int = 256

    def __post_init__(self) -> None:
        if not self.user_prompt:
            raise ValueError("completion request has an empty user prompt")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class BackendConfig:
    """Declarative backend description as stored in a config file.

    ``auth_env`` names an environment variable holding the credential; the
    credential value itself is resolved at request time and never stored.
    For mock kinds ``endpoint`` is a file path (replay fixtures or a
    dictionary spec), resolved relative to the config file.
    """

    name: str
    kind: str
    endpoint: str
    auth_env: str | None = None
    timeout_ms: int = 10000
    retries: int = 2
    template: str = "default"

    KINDS = ("nmt", "llm", "mock-replay", "mock-dictionary")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def request_digest(request: TranslationRequest | CompletionRequest) -> str:
    """Stable content hash used to key replay fixtures."""
    if isinstance(request, TranslationRequest):
        payload = {
            "op": "translate",
            "body": request.body,
            "source_lang": request.source_lang,
            "target_lang": request.target_lang,
            "preserve_markup": request.preserve_markup,
        }
    else:
        payload = {
            "op": "complete",
            "system_prompt": request.system_prompt,
            "user_prompt": request.user_prompt,
            "max_output_tokens": request.max_output_tokens,
        }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ReplayBackend:
    """Replays recorded responses; unmatched requests are remote errors.

    Lookup is pure and safe under concurrency: the same request digest
    always yields the same response, across instances and process runs.
    """

    def __init__(self, fixtures: Mapping[str, str] | None = None, name: str = "replay"):
        self.name = name
        self._fixtures: dict[str, str] = dict(fixtures or {})

    @classmethod
    def from_file(cls, path: str | Path, name: str = "replay") -> ReplayBackend:
        with open(path, encoding="utf-8") as fh:
            entries = json.load(fh)
        fixtures: dict[str, str] = {}
        for entry in entries:
            digest = entry["request_digest"]
            if digest in fixtures:
                raise ValueError(f"duplicate replay fixture digest {digest}")
            fixtures[digest] = entry["response"]
        return cls(fixtures, name)

    def save(self, path: str | Path) -> None:
        entries = [
            {"request_digest": digest, "response": response}
            for digest, response in sorted(self._fixtures.items())
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(entries, fh, ensure_ascii=False, indent=2)
            fh.write("\n")

    def add(self, request: TranslationRequest | CompletionRequest, response: str) -> None:
        self._fixtures[request_digest(request)] = response

    def _lookup(self, request: TranslationRequest | CompletionRequest) -> str:
        digest = request_digest(request)
        try:
            return self._fixtures[digest]
        except KeyError:
            raise RemoteError(
                f"backend {self.name!r} has no replay fixture for digest {digest[:12]}..."
            )

    def translate(self, request: TranslationRequest) -> str:
        return self._lookup(request)

    def complete(self, request: CompletionRequest) -> str:
        response = self._lookup(request)
        if not response.strip():
            raise EmptyCompletionError(f"backend {self.name!r} replayed an empty completion")
        return response


@dataclass(frozen=True)
class MoveRule:
    """Move the first contiguous run of translated words to a new position.

    ``position`` is a token index in the reordered sentence, or ``"end"``
    to place the group after the last non-punctuation token.
    """

    words: tuple[str, ...]
    position: int | str = "end"

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ValueError("a move rule needs at least one word")
        if isinstance(self.position, str) and self.position != "end":
            raise ValueError(f"bad move position {self.position!r}")


def _is_punct_token(surface: str) -> bool:
    import unicodedata

    return all(unicodedata.category(ch).startswith("P") for ch in surface)


class DictionaryBackend:
    """Word-by-word mock translator with optional reorder rules.

    Punctuation tokens map to themselves.  Style markup on moved words
    travels with them.  Useful for exercising non-contiguous orderings
    without a model.
    """

    def __init__(
        self,
        lexicon: Mapping[str, str],
        moves: Sequence[MoveRule] = (),
        name: str = "dictionary",
    ):
        self.name = name
        self._lexicon = dict(lexicon)
        self._moves = tuple(moves)

    @classmethod
    def from_file(cls, path: str | Path, name: str = "dictionary") -> DictionaryBackend:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        moves = tuple(
            MoveRule(tuple(rule["words"]), rule.get("position", "end"))
            for rule in spec.get("moves", ())
        )
        return cls(spec["lexicon"], moves, name)

    def _translate_word(self, surface: str) -> str:
        if surface in self._lexicon:
            return self._lexicon[surface]
        folded = surface.casefold()
        if folded in self._lexicon:
            return self._lexicon[folded]
        if _is_punct_token(surface):
            return surface
        raise KeyError(surface)

    def translate(self, request: TranslationRequest) -> str:
        doc, _ = parse_tagged(request.body, MarkupFormat.NUMBERED_TAGS)
        missing = []
        translated: list[str] = []
        for tok in doc.tokens:
            try:
                translated.append(self._translate_word(tok.surface))
            except KeyError:
                missing.append(tok.surface)
        if missing:
            raise OovError(sorted(set(missing)))

        styles: list[set[int]] = [set() for _ in doc.tokens]
        for span in doc.spans:
            for idx in span.token_indices:
                styles[idx].add(span.style_id)
        items = list(zip(translated, styles))

        for rule in self._moves:
            items = self._apply_move(items, rule)

        words = [w for w, _ in items]
        indices_by_id: dict[int, set[int]] = {}
        for idx, (_, ids) in enumerate(items):
            for sid in ids:
                indices_by_id.setdefault(sid, set()).add(idx)
        attrs_by_id = doc.attrs_by_id
        spans = spans_from_indices(indices_by_id, attrs_by_id)
        out = StyledText.from_tokens(words, spans)
        if request.preserve_markup:
            return render_tagged(out, MarkupFormat.NUMBERED_TAGS)
        return out.text

    @staticmethod
    def _apply_move(
        items: list[tuple[str, set[int]]], rule: MoveRule
    ) -> list[tuple[str, set[int]]]:
        words = [w for w, _ in items]
        n = len(rule.words)
        start = -1
        for idx in range(len(words) - n + 1):
            if tuple(words[idx : idx + n]) == rule.words:
                start = idx
                break
        if start < 0:
            return items
        group = items[start : start + n]
        rest = items[:start] + items[start + n :]
        if rule.position == "end":
            pos = len(rest)
            while pos > 0 and _is_punct_token(rest[pos - 1][0]):
                pos -= 1
        else:
            pos = max(0, min(int(rule.position), len(rest)))
        return rest[:pos] + group + rest[pos:]


class _HttpBackend:
    """Shared HTTP plumbing: auth, timeout, bounded retries with backoff."""

    def __init__(
        self,
        config: BackendConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base_s: float = 0.5,
        max_in_flight: int = 4,
    ):
        self.config = config
        self.name = config.name
        self._session = session or requests.Session()
        self._sleep = sleep
        self._backoff_base_s = backoff_base_s
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            secret = os.environ.get(self.config.auth_env)
            if secret is None:
                raise AuthError(
                    f"credential environment variable {self.config.auth_env} is not set"
                )
            headers["Authorization"] = f"Bearer {secret}"
        return headers

    def _post(self, payload: dict) -> dict:
        timeout_s = self.config.timeout_ms / 1000.0
        attempts = self.config.retries + 1
        last_error: BackendError | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._backoff_base_s * 2 ** (attempt - 1))
            with self._gate:
                try:
                    response = self._session.post(
                        self.config.endpoint,
                        json=payload,
                        headers=self._headers(),
                        timeout=timeout_s,
                    )
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_error = TransportError(
                        f"backend {self.name!r} unreachable: {type(exc).__name__}"
                    )
                    continue
            if response.status_code in (401, 403):
                raise AuthError(
                    f"backend {self.name!r} rejected credentials (HTTP {response.status_code})"
                )
            if 500 <= response.status_code < 600:
                last_error = RemoteError(
                    f"backend {self.name!r} failed with HTTP {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise RemoteError(
                    f"backend {self.name!r} rejected the request (HTTP {response.status_code})"
                )
            try:
                return response.json()
            except ValueError:
                raise RemoteError(f"backend {self.name!r} returned non-JSON payload")
        assert last_error is not None
        raise last_error


class HttpTranslationBackend(_HttpBackend):
    def translate(self, request: TranslationRequest) -> str:
        payload = {
            "text": request.body,
            "source_lang": request.source_lang,
            "target_lang": request.target_lang,
            "preserve_markup": request.preserve_markup,
            "template": self.config.template,
        }
        data = self._post(payload)
        try:
            return str(data["translation"])
        except KeyError:
            raise RemoteError(f"backend {self.name!r} response lacks 'translation'")


class HttpCompletionBackend(_HttpBackend):
    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "system_prompt": request.system_prompt,
            "user_prompt": request.user_prompt,
            "max_output_tokens": request.max_output_tokens,
            "template": self.config.template,
        }
        data = self._post(payload)
        try:
            text = str(data["completion"])
        except KeyError:
            raise RemoteError(f"backend {self.name!r} response lacks 'completion'")
        if not text.strip():
            raise EmptyCompletionError(f"backend {self.name!r} returned an empty completion")
        return text


def config_from_dict(data: Mapping) -> BackendConfig:
    known = {"name", "kind", "endpoint", "auth_env", "timeout_ms", "retries", "template"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown backend config keys: {sorted(unknown)}")
    try:
        return BackendConfig(
            name=data["name"],
            kind=data["kind"],
            endpoint=data["endpoint"],
            auth_env=data.get("auth_env"),
            timeout_ms=data.get("timeout_ms", 10000),
            retries=data.get("retries", 2),
            template=data.get("template", "default"),
        )
    except KeyError as exc:
        raise ValueError(f"backend config missing key {exc}") from exc


def build_backend(config: BackendConfig, base_dir: Path | None = None):
    base = base_dir or Path.cwd()
    if config.kind == "mock-replay":
        return ReplayBackend.from_file(base / config.endpoint, config.name)
    if config.kind == "mock-dictionary":
        return DictionaryBackend.from_file(base / config.endpoint, config.name)
    if config.kind == "nmt":
        return HttpTranslationBackend(config)
    return HttpCompletionBackend(config)


def load_backends(path: str | Path) -> dict[str, object]:
    """Load named backends from a JSON config file (one object or a list)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    entries = data if isinstance(data, list) else [data]
    backends: dict[str, object] = {}
    for entry in entries:
        config = config_from_dict(entry)
        if config.name in backends:
            raise ValueError(f"duplicate backend name {config.name!r}")
        backends[config.name] = build_backend(config, path.parent)
    return backends


def supports_translate(backend: object) -> bool:
    return callable(getattr(backend, "translate", None))


def supports_complete(backend: object) -> bool:
    return callable(getattr(backend, "complete", None))
