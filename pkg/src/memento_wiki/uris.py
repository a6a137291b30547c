"""URI layout of the service.

====================================  =========================
``{base}/wiki/{title}``               original resource (URI-R)
``{base}/wiki/{title}?rev={id}``      memento (URI-M)
``{base}/timegate/{title}``           TimeGate (URI-G)
``{base}/timemap/{title}``            newest TimeMap page
``{base}/timemap/{pivot}/-1/{title}`` page of mementos before pivot
``{base}/timemap/{pivot}/1/{title}``  page of mementos after pivot
====================================  =========================

Titles are percent-encoded with ``/`` escaped, so a title never splits a
path segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from urllib.parse import quote, urlsplit

from . import timefmt

_TITLE_SAFE = ":@!$&'()*+,;=-._~"

DESCENDING = -1
ASCENDING = 1


def quote_title(title: str) -> str:
    return quote(title, safe=_TITLE_SAFE)


@dataclass(frozen=True)
class UriScheme:
    base_url: str

    def __post_init__(self):
        if self.base_url.endswith("/"):
            raise ValueError("base_url must not end with '/'")

    @property
    def base_path(self) -> str:
        return urlsplit(self.base_url).path

    def original(self, title: str) -> str:
        return f"{self.base_url}/wiki/{quote_title(title)}"

    def memento(self, title: str, rev_id: int) -> str:
        return f"{self.original(title)}?rev={rev_id}"

    def timegate(self, title: str) -> str:
        return f"{self.base_url}/timegate/{quote_title(title)}"

    def timemap(self, title: str) -> str:
        return f"{self.base_url}/timemap/{quote_title(title)}"

    def timemap_pivot(self, title: str, pivot: datetime, direction: int) -> str:
        if direction not in (DESCENDING, ASCENDING):
            raise ValueError(f"direction must be -1 or 1, got {direction}")
        return (f"{self.base_url}/timemap/{timefmt.format_digits14(pivot)}"
                f"/{direction}/{quote_title(title)}")
