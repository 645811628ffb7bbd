"""Source positions, ranges, and diagnostics shared by every layer.

Lines are 0-based; columns count UTF-16 code units (the wire convention),
so astral-plane characters advance a column by two.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


def utf16_width(ch: str) -> int:
    return 2 if ord(ch) > 0xFFFF else 1


@dataclass(frozen=True, order=True)
class SourcePos:
    line: int
    character: int

    def to_wire(self) -> dict:
        return {"line": self.line, "character": self.character}

    @staticmethod
    def from_wire(d: dict) -> "SourcePos":
        return SourcePos(d["line"], d["character"])


@dataclass(frozen=True)
class Range:
    start: SourcePos
    end: SourcePos

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"range end {self.end} precedes start {self.start}")

    def contains(self, pos: SourcePos) -> bool:
        return self.start <= pos < self.end

    def encloses(self, other: "Range") -> bool:
        return self.start <= other.start and other.end <= self.end

    def to_wire(self) -> dict:
        return {"start": self.start.to_wire(), "end": self.end.to_wire()}

    @staticmethod
    def from_wire(d: dict) -> "Range":
        return Range(SourcePos.from_wire(d["start"]), SourcePos.from_wire(d["end"]))


def span(start: Range, end: Range) -> Range:
    return Range(start.start, end.end)


class Severity(enum.IntEnum):
    ERROR = 1
    WARNING = 2
    INFORMATION = 3


@dataclass(frozen=True)
class Diagnostic:
    range: Range
    severity: Severity
    message: str
    source: str  # "parser" | "typechecker"

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def to_wire(self) -> dict:
        return {
            "range": self.range.to_wire(),
            "severity": int(self.severity),
            "message": self.message,
            "source": self.source,
        }
