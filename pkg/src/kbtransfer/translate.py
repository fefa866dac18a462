"""Translation backends for back-translation augmentation.

Three backends: identity (testing baseline), a deterministic phrase-table
mock driven by a TSV file, and an HTTP client for an external service.
"""

from __future__ import annotations

import logging
import os
import re
from typing import Protocol, runtime_checkable

import requests

__all__ = [
    "Translator",
    "TranslationError",
    "IdentityTranslator",
    "PhraseTableTranslator",
    "HttpTranslator",
    "back_translate",
    "translator_from_spec",
    "TRANSLATOR_URL_ENV",
]

log = logging.getLogger(__name__)

TRANSLATOR_URL_ENV = "KBTRANSFER_TRANSLATOR_URL"


class TranslationError(RuntimeError):
    pass


@runtime_checkable
class Translator(Protocol):
    pivot_language: str

    def translate(self, text: str) -> str: ...

    def back_translate(self, text: str) -> str: ...


class IdentityTranslator:
    """Round-trips every text unchanged."""

    def __init__(self, pivot_language: str = "id"):
        self.pivot_language = pivot_language

    def translate(self, text: str) -> str:
        return text

    def back_translate(self, text: str) -> str:
        return text


class PhraseTableTranslator:
    """Deterministic mock driven by a phrase table.

    Each table row maps an original phrase to a pivot form and a
    back-translated form, so the round trip is a controlled paraphrase.
    Matching is longest-phrase-first at word boundaries, case-sensitive.
    """

    def __init__(self, table: dict[str, tuple[str, str]], pivot_language: str = "de"):
        self.pivot_language = pivot_language
        self._forward = {src: pv for src, (pv, _) in table.items()}
        self._backward = {pv: back for _, (pv, back) in table.items()}

    @classmethod
    def from_tsv(cls, path, pivot_language: str = "de") -> "PhraseTableTranslator":
        """TSV rows: original<TAB>pivot<TAB>back (back defaults to original)."""
        table: dict[str, tuple[str, str]] = {}
        with open(path, encoding="utf-8") as fd:
            for lineno, line in enumerate(fd, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise TranslationError(f"line {lineno}: expected 2 or 3 columns")
                src, pv = parts[0], parts[1]
                table[src] = (pv, parts[2] if len(parts) == 3 else src)
        return cls(table, pivot_language=pivot_language)

    @staticmethod
    def _apply(mapping: dict[str, str], text: str) -> str:
        if not mapping:
            return text
        pattern = "|".join(
            re.escape(p) for p in sorted(mapping, key=len, reverse=True)
        )
        return re.sub(rf"\b(?:{pattern})\b", lambda m: mapping[m.group(0)], text)

    def translate(self, text: str) -> str:
        return self._apply(self._forward, text)

    def back_translate(self, text: str) -> str:
        return self._apply(self._backward, text)


class HttpTranslator:
    """Client for the external translation service.

    Wire contract: POST <base>/translate and <base>/back_translate with body
    {"texts": [...], "pivot": "<lang>"}; the response {"texts": [...]} is
    1:1 and order-preserving.
    """

    def __init__(self, base_url: str | None = None, pivot_language: str = "de", timeout: float = 30.0):
        base_url = base_url or os.environ.get(TRANSLATOR_URL_ENV)
        if not base_url:
            raise TranslationError(
                f"no translator URL given and {TRANSLATOR_URL_ENV} is not set"
            )
        self.base_url = base_url.rstrip("/")
        self.pivot_language = pivot_language
        self.timeout = timeout
        self._session = requests.Session()

    def _post(self, endpoint: str, texts: list[str]) -> list[str]:
        try:
            resp = self._session.post(
                f"{self.base_url}/{endpoint}",
                json={"texts": texts, "pivot": self.pivot_language},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            out = resp.json()["texts"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise TranslationError(f"{endpoint} request failed: {exc}") from exc
        if len(out) != len(texts):
            raise TranslationError(
                f"{endpoint}: got {len(out)} texts for {len(texts)} inputs"
            )
        return out

    def translate(self, text: str) -> str:
        return self._post("translate", [text])[0]

    def back_translate(self, text: str) -> str:
        return self._post("back_translate", [text])[0]


def back_translate(text: str, translator: Translator) -> str:
    """Round-trip a text through the pivot language."""
    pivot = translator.translate(text)
    log.debug("pivot[%s]: %r -> %r", translator.pivot_language, text, pivot)
    return translator.back_translate(pivot)


def translator_from_spec(spec: str, pivot_language: str = "de") -> Translator:
    """Parse a CLI translator spec: identity | mock:<tsv-path> | http:<url>."""
    if spec == "identity":
        return IdentityTranslator(pivot_language=pivot_language)
    if spec.startswith("mock:"):
        return PhraseTableTranslator.from_tsv(spec[5:], pivot_language=pivot_language)
    if spec.startswith(("http://", "https://")):
        return HttpTranslator(base_url=spec, pivot_language=pivot_language)
    if spec.startswith("http:"):
        # "http:" prefix wrapping a URL or bare endpoint; empty falls back to the env var
        return HttpTranslator(base_url=spec[5:] or None, pivot_language=pivot_language)
    raise TranslationError(f"unknown translator spec {spec!r}")
