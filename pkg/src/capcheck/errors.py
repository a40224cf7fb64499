"""Exception hierarchy shared by all capcheck modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence


class CapcheckError(Exception):
    """Base class for every error raised by capcheck."""


@dataclass(frozen=True)
class SourceSpan:
    """1-based position inside an ADL source."""

    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(CapcheckError):
    def __init__(self, span: SourceSpan, message: str, expected: Optional[str] = None) -> None:
        if not message:
            message = "syntax error"
        self.span = span
        self.message = message
        self.expected = expected
        text = f"{span}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class CycleError(CapcheckError):
    def __init__(self, members: Sequence[str]) -> None:
        self.members = tuple(members)
        super().__init__(f"requires cycle through: {', '.join(self.members)}")


class UnknownSkill(CapcheckError):
    def __init__(self, skill_id: str) -> None:
        self.skill_id = skill_id
        super().__init__(f"unknown skill '{skill_id}'")


class UnknownElement(CapcheckError):
    def __init__(self, viewpoint: Optional[str], element: str) -> None:
        self.viewpoint = viewpoint
        self.element = element
        where = f"{viewpoint}:{element}" if viewpoint else element
        super().__init__(f"unknown element '{where}'")


class UnknownRequirement(CapcheckError):
    def __init__(self, requirement_id: str) -> None:
        self.requirement_id = requirement_id
        super().__init__(f"unknown requirement '{requirement_id}'")


class UnknownScenario(CapcheckError):
    def __init__(self, scenario_id: str) -> None:
        self.scenario_id = scenario_id
        super().__init__(f"unknown scenario '{scenario_id}'")


class UnsortedStream(CapcheckError):
    def __init__(self, index: int, timestamp: float, previous: float) -> None:
        self.index = index
        super().__init__(f"record {index}: timestamp {timestamp!r} is earlier than {previous!r}")


class MetricStreamError(CapcheckError):
    """Malformed metric stream or trace CSV."""

    def __init__(self, source: str, line: int, message: str) -> None:
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")


class DomainError(CapcheckError, ValueError):
    """A kinematic quantity outside its physical domain."""


class ConfigError(CapcheckError):
    pass
