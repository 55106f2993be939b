"""Text-completion providers: HTTP endpoint, canned-reply fixtures, scripted stub."""

from __future__ import annotations

import hashlib
import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .errors import ProviderError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 512


class TextCompletion(Protocol):
    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        ...


def prompt_checksum(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpProvider:
    """POSTs ``{prompt, temperature, max_tokens}`` and reads ``{text}`` back."""

    def __init__(self, url: str, token: str | None = None, timeout: float = 60.0):
        self.url = url
        self.token = token
        self.timeout = timeout

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        params = params or GenerationParams()
        body = json.dumps(
            {"prompt": prompt, "temperature": params.temperature, "max_tokens": params.max_tokens}
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError) as e:
            raise ProviderError(f"request to {self.url} failed: {e}") from e
        except json.JSONDecodeError as e:
            raise ProviderError(f"non-JSON response from {self.url}") from e
        text = payload.get("text") if isinstance(payload, dict) else None
        if not isinstance(text, str):
            raise ProviderError(f"response from {self.url} has no 'text' field")
        return text


class FixtureProvider:
    """Offline provider: replies are files named ``<sha256(prompt)>.txt``.

    A prompt without a canned reply raises ProviderError, which callers with
    fallbacks enabled treat like an unreachable endpoint.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ProviderError(f"fixture directory {self.directory} does not exist")

    def path_for(self, prompt: str) -> Path:
        return self.directory / f"{prompt_checksum(prompt)}.txt"

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        path = self.path_for(prompt)
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError:
            log.debug("no canned reply %s", path.name)
            raise ProviderError(f"no canned reply for prompt {path.stem[:12]}") from None


class ScriptedProvider:
    """Returns replies from a list (in order) or a function of the prompt.

    List entries that are exceptions are raised instead of returned.
    """

    def __init__(self, replies: Sequence[str | Exception] | Callable[[str], str]):
        self._fn = replies if callable(replies) else None
        self._queue = list(replies) if not callable(replies) else []
        self.prompts: list[str] = []

    def complete(self, prompt: str, params: GenerationParams | None = None) -> str:
        self.prompts.append(prompt)
        if self._fn is not None:
            return self._fn(prompt)
        if not self._queue:
            raise ProviderError("scripted provider has no replies left")
        reply = self._queue.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply
