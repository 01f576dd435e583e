"""Example-pair records and their JSON Lines encoding."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import IO, Iterable, Iterator, Optional

REVISION = "revision"
ROUND_TRIP = "round_trip"

_FIELDS = ("source", "target", "page_id", "older_rev", "newer_rev", "is_identity", "provenance")


@dataclass(frozen=True)
class ExamplePair:
    source: str
    target: str
    page_id: Optional[int] = None
    older_rev: Optional[int] = None
    newer_rev: Optional[int] = None
    provenance: str = REVISION

    @property
    def is_identity(self) -> bool:
        return self.source == self.target

    def to_dict(self) -> dict:
        d = asdict(self)
        d["is_identity"] = self.is_identity
        return {k: d[k] for k in _FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExamplePair":
        return cls(
            source=d["source"],
            target=d["target"],
            page_id=d.get("page_id"),
            older_rev=d.get("older_rev"),
            newer_rev=d.get("newer_rev"),
            provenance=d.get("provenance", REVISION),
        )


def write_jsonl(pairs: Iterable[ExamplePair], fh: IO[str]) -> int:
    n = 0
    for pair in pairs:
        fh.write(pair.to_json())
        fh.write("\n")
        n += 1
    return n


def read_jsonl(fh: IO[str]) -> Iterator[ExamplePair]:
    for line in fh:
        if line.strip():
            yield ExamplePair.from_dict(json.loads(line))
