"""Server configuration and its flat ``key = value`` file format.

Example::

    # memento.conf
    timemap_page_size = 500
    error_page_type = friendly
    negotiation_pattern = 302
    recommended_relations = false
    excluded_namespaces = *
    base_url = http://localhost:8080

``excluded_namespaces`` takes ``*`` (every namespace except the main one,
the default), an empty value (nothing excluded) or a comma-separated list of
prefixes such as ``Talk, User``.
"""

from __future__ import annotations

import dataclasses
import enum
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

CONFIG_ENV_VAR = "MEMENTO_WIKI_CONFIG"


class ConfigError(ValueError):
    pass


class ErrorPageType(enum.Enum):
    FRIENDLY = "friendly"
    TRADITIONAL = "traditional"


class NegotiationPattern(enum.Enum):
    P302 = "302"  # Pattern 2.1, distinct TimeGate answering 302
    P200 = "200"  # Pattern 1.2, original acts as TimeGate answering 200


@dataclass(frozen=True)
class ServerConfig:
    timemap_page_size: int = 500
    error_page_type: ErrorPageType = ErrorPageType.FRIENDLY
    negotiation_pattern: NegotiationPattern = NegotiationPattern.P302
    recommended_relations: bool = False
    # None: every namespace but the main one is excluded.
    excluded_namespaces: Optional[frozenset[str]] = None
    base_url: Optional[str] = None
    # Pattern 1.1 (original answers 302 itself); off by default, kept only
    # for comparison with the analytical model.
    experimental_pattern11: bool = False

    def __post_init__(self):
        if self.timemap_page_size < 1:
            raise ConfigError("timemap_page_size must be >= 1")
        if self.base_url is not None and self.base_url.endswith("/"):
            raise ConfigError("base_url must not end with '/'")

    def is_excluded(self, title: str) -> bool:
        ns = namespace_of(title)
        if self.excluded_namespaces is None:
            return ns != ""
        return ns in self.excluded_namespaces

    def replace(self, **changes: Any) -> "ServerConfig":
        return dataclasses.replace(self, **changes)


def namespace_of(title: str) -> str:
    """Text before the first colon, or ``""`` for the main namespace."""
    head, sep, _ = title.partition(":")
    return head if sep else ""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _parse_namespaces(text: str) -> Optional[frozenset[str]]:
    text = text.strip()
    if text == "*":
        return None
    return frozenset(p.strip() for p in text.split(",") if p.strip())


def _parse_enum(kind: type[enum.Enum]):
    def parse(text: str):
        try:
            return kind(text.strip().strip("'\""))
        except ValueError:
            allowed = ", ".join(m.value for m in kind)
            raise ConfigError(f"{text!r} is not one of: {allowed}") from None
    return parse


_PARSERS = {
    "timemap_page_size": _parse_int,
    "error_page_type": _parse_enum(ErrorPageType),
    "negotiation_pattern": _parse_enum(NegotiationPattern),
    "recommended_relations": _parse_bool,
    "excluded_namespaces": _parse_namespaces,
    "base_url": lambda text: text.strip() or None,
    "experimental_pattern11": _parse_bool,
}


def config_from_mapping(values: Mapping[str, str],
                        base: ServerConfig | None = None) -> ServerConfig:
    changes = {}
    for key, raw in values.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        changes[key] = _PARSERS[key](raw)
    try:
        return dataclasses.replace(base or ServerConfig(), **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            values[key.strip()] = value.strip()
    return values


def load_config(path: str | Path | None = None,
                overrides: Mapping[str, str] | None = None) -> ServerConfig:
    """File (explicit path, else ``$MEMENTO_WIKI_CONFIG``) then overrides."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    values = read_config_file(path) if path else {}
    values.update(overrides or {})
    return config_from_mapping(values)
