"""Architecture description language: lexer, recursive-descent parser and canonical serializer.

A model file is a sequence of blocks::

    viewpoint capability Skills {
      skill Approach requires Perceive thresholds 0.8 0.3;
      skill Perceive metric camera.heartbeat heartbeat nominal [1, 1] unavailable [0, 0] timeout 0.5;
    }
    requirement SG1 safety_goal on Skills.Approach text "Approach pedestrian crossing with adequate speed.";

Parsing is purely syntactic: references are resolved later by ``model.validate``.
"""

from __future__ import annotations

import logging
import math
import re
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

from . import model as m
from .errors import ParseError, SourceSpan

logger = logging.getLogger(__name__)

HEADER = "# capcheck-adl 1"

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>[ \t\r\n]+)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<STRING>"(?:[^"\\]|\\.)*")
  | (?P<NUMBER>-inf(?![A-Za-z0-9_.])|[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_](?:[A-Za-z0-9_.]|-(?!>))*)
  | (?P<ARROW>->)
  | (?P<FAT_ARROW>=>)
  | (?P<PUNCT>[{};:,=.\[\]])
    """,
    re.VERBOSE,
)
_IDENT_RE = re.compile(r"[A-Za-z_](?:[A-Za-z0-9_.]|-(?!>))*\Z")

_VIEWPOINT_KINDS = {k.value: k for k in m.ViewpointKind}
_METRIC_KINDS = {k.value: k for k in m.MetricKind}
_REQUIREMENT_KINDS = {k.value: k for k in m.RequirementKind}
_BLOCK_ORDER = ("correspondence", "requirement", "scenario", "viewpoint")
_TOKEN_KINDS = {"IDENT", "NUMBER", "STRING", "EOF"}


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def lex(text: str, file: str = "<string>") -> Iterator[Token]:
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            char = text[pos]
            message = "unterminated string" if char == '"' else f"unexpected character {char!r}"
            raise ParseError(SourceSpan(file, line, column), message)
        kind = match.lastgroup or ""
        value = match.group()
        if kind not in ("WS", "COMMENT"):
            yield Token(kind, value, line, column)
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = match.end()
    yield Token("EOF", "", line, pos - line_start + 1)


Expected = Union[str, Set[str]]


class TokenStream:
    def __init__(self, text: str, file: str) -> None:
        self.file = file
        self._tokens = lex(text, file)
        self.current = next(self._tokens)

    def consume(self) -> Token:
        token = self.current
        if token.kind != "EOF":
            self.current = next(self._tokens)
        return token

    def _matches(self, expected: Expected) -> bool:
        token = self.current
        if isinstance(expected, str) and expected in _TOKEN_KINDS:
            return token.kind == expected
        if token.kind in ("STRING", "EOF"):
            return False
        if isinstance(expected, str):
            return token.text == expected
        return token.text in expected

    def accept(self, expected: Expected) -> Optional[Token]:
        if self._matches(expected):
            return self.consume()
        return None

    def check(self, expected: Expected) -> bool:
        return self._matches(expected)

    def expect(self, expected: Expected, description: Optional[str] = None) -> Token:
        token = self.accept(expected)
        if token is None:
            if description is None:
                description = expected if isinstance(expected, str) else " or ".join(sorted(expected))
            raise self.error(f"unexpected {self.describe()}", description)
        return token

    def span(self, token: Optional[Token] = None) -> SourceSpan:
        token = token or self.current
        return SourceSpan(self.file, token.line, token.column)

    def error(self, message: str, expected: Optional[str] = None, token: Optional[Token] = None) -> ParseError:
        return ParseError(self.span(token), message, expected)

    def describe(self) -> str:
        token = self.current
        if token.kind == "EOF":
            return "end of input"
        return f"{token.text!r}"


def _unescape(token: Token, stream: TokenStream) -> str:
    body = token.text[1:-1]
    out: List[str] = []
    i = 0
    while i < len(body):
        char = body[i]
        if char == "\\":
            escaped = body[i + 1]
            if escaped not in ('"', "\\"):
                raise stream.error(f"unsupported escape '\\{escaped}' in string", token=token)
            out.append(escaped)
            i += 2
        else:
            out.append(char)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str, file: str) -> None:
        self.stream = TokenStream(text, file)

    def ident(self, what: str = "identifier") -> str:
        return self.stream.expect("IDENT", what).text

    def string(self) -> str:
        return _unescape(self.stream.expect("STRING", "string"), self.stream)

    def real(self) -> float:
        stream = self.stream
        if stream.check("NUMBER"):
            return float(stream.consume().text)
        if stream.current.kind == "IDENT" and stream.current.text == "inf":
            stream.consume()
            return math.inf
        raise stream.error(f"unexpected {stream.describe()}", "number")

    def ident_list(self, what: str) -> List[str]:
        items = [self.ident(what)]
        while self.stream.accept(","):
            items.append(self.ident(what))
        return items

    def dotted(self, what: str) -> Tuple[Optional[str], str]:
        """`a.b` (split at the first dot) or a bare `a`."""
        head, dot, tail = self.ident(what).partition(".")
        if not dot:
            return None, head
        if not tail:
            tail = self.ident(what)
        return head, tail

    # -- blocks --------------------------------------------------------

    def model(self) -> m.ArchitectureModel:
        viewpoints: List[m.Viewpoint] = []
        correspondences: List[m.Correspondence] = []
        requirements: List[m.Requirement] = []
        scenarios: List[m.Scenario] = []
        while self.stream.current.kind != "EOF":
            keyword = self.stream.expect(set(_BLOCK_ORDER), "viewpoint, correspondence, requirement or scenario")
            if keyword.text == "viewpoint":
                viewpoints.append(self.viewpoint())
            elif keyword.text == "correspondence":
                correspondences.append(self.correspondence())
            elif keyword.text == "requirement":
                requirements.append(self.requirement())
            else:
                scenarios.append(self.scenario())
        return m.ArchitectureModel(tuple(viewpoints), tuple(correspondences), tuple(requirements), tuple(scenarios))

    def viewpoint(self) -> m.Viewpoint:
        kind = _VIEWPOINT_KINDS[self.stream.expect(set(_VIEWPOINT_KINDS), "viewpoint kind").text]
        # `viewpoint capability {}` names the viewpoint after its kind
        viewpoint_id = kind.value
        if not self.stream.check("{"):
            token = self.stream.expect("IDENT", "viewpoint id")
            if "." in token.text:
                raise self.stream.error(f"viewpoint id '{token.text}' must not contain '.'", token=token)
            viewpoint_id = token.text
        self.stream.expect("{")
        nodes: List[m.Element] = []
        edges: List[m.Edge] = []
        skills: List[m.Skill] = []
        stakeholders: List[str] = []
        concerns: List[str] = []
        while not self.stream.accept("}"):
            keyword = self.stream.expect(
                {"node", "edge", "skill", "stakeholder", "concern"}, "node, edge, skill, stakeholder, concern or '}'"
            )
            if keyword.text == "node":
                nodes.append(m.Element(self.ident("node id")))
            elif keyword.text == "edge":
                source = self.ident("edge source")
                self.stream.expect("->")
                target = self.ident("edge target")
                label = self.ident("edge label") if self.stream.accept(":") else None
                edges.append(m.Edge(source, target, label))
            elif keyword.text == "skill":
                skills.append(self.skill())
                continue
            elif keyword.text == "stakeholder":
                stakeholders.append(self.string())
            else:
                concerns.append(self.string())
            self.stream.expect(";")
        return m.Viewpoint(
            viewpoint_id, kind, tuple(nodes), tuple(edges), tuple(skills), tuple(stakeholders), tuple(concerns)
        )

    def skill(self) -> m.Skill:
        skill_id = self.ident("skill id")
        description = self.string() if self.stream.accept("description") else None
        requires = self.ident_list("required skill") if self.stream.accept("requires") else []
        thresholds = None
        if self.stream.accept("thresholds"):
            degraded = self.real()
            thresholds = m.Thresholds(degraded, self.real())
        bindings: List[m.MetricBinding] = []
        while self.stream.accept("metric"):
            bindings.append(self.metric())
        self.stream.expect(";", "metric or ';'")
        return m.Skill(skill_id, description, tuple(requires), thresholds, tuple(bindings))

    def interval(self) -> m.Interval:
        self.stream.expect("[")
        low = self.real()
        self.stream.expect(",")
        high = self.real()
        self.stream.expect("]")
        return m.Interval(low, high)

    def metric(self) -> m.MetricBinding:
        source, metric = self.dotted("metric reference")
        if source is None:
            self.stream.expect(".", "'.' between source and metric")
            source, metric = metric, self.ident("metric name")
        kind = _METRIC_KINDS[self.stream.expect(set(_METRIC_KINDS), "heartbeat, counter or scalar").text]
        self.stream.expect("nominal")
        nominal = self.interval()
        self.stream.expect("unavailable")
        unavailable = self.interval()
        timeout = self.real() if self.stream.accept("timeout") else None
        return m.MetricBinding(source, metric, kind, nominal, unavailable, timeout)

    def correspondence(self) -> m.Correspondence:
        corr_id = self.ident("correspondence id")
        source = self.ident("source viewpoint")
        self.stream.expect("->")
        target = self.ident("target viewpoint")
        self.stream.expect("{")
        pairs: List[Tuple[str, str]] = []
        while not self.stream.accept("}"):
            left = self.ident("element id or '}'")
            self.stream.expect("=>")
            pairs.extend((left, right) for right in self.ident_list("element id"))
            self.stream.expect(";", "',' or ';'")
        return m.Correspondence(corr_id, source, target, tuple(pairs))

    def requirement(self) -> m.Requirement:
        req_id = self.ident("requirement id")
        kind = _REQUIREMENT_KINDS[self.stream.expect(set(_REQUIREMENT_KINDS), "requirement kind").text]
        self.stream.expect("on")
        anchors = [self.anchor()]
        while self.stream.accept(","):
            anchors.append(self.anchor())
        self.stream.expect("text", "',' or text")
        text = self.string()
        self.stream.expect(";")
        return m.Requirement(req_id, kind, text, tuple(anchors))

    def anchor(self) -> m.Anchor:
        viewpoint, element = self.dotted("anchor")
        return m.Anchor(element, viewpoint)

    def scenario(self) -> m.Scenario:
        scenario_id = self.ident("scenario id")
        self.stream.expect("{")
        values: Dict[str, float] = {}
        while not self.stream.accept("}"):
            token = self.stream.expect("IDENT", "scenario key or '}'")
            if token.text not in m.SCENARIO_KEYS:
                raise self.stream.error(
                    f"unknown scenario key '{token.text}'", ", ".join(sorted(m.SCENARIO_KEYS)), token=token
                )
            if token.text in values:
                raise self.stream.error(f"scenario key '{token.text}' given twice", token=token)
            self.stream.expect("=")
            values[token.text] = self.real()
            self.stream.expect(";")
        return m.Scenario(scenario_id, tuple(values.items()))


def parse(text: str, file: str = "<string>") -> m.ArchitectureModel:
    """Parse ADL source. Raises ParseError at the first error; never returns a partial model."""
    result = _Parser(text, file).model()
    logger.debug(
        "parsed %s: %d viewpoint(s), %d correspondence(s), %d requirement(s), %d scenario(s)",
        file,
        len(result.viewpoints),
        len(result.correspondences),
        len(result.requirements),
        len(result.scenarios),
    )
    return result


def parse_file(path: Union[str, Path]) -> m.ArchitectureModel:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(SourceSpan(str(path), 1, 1), f"not valid UTF-8 ({e.reason})") from None
    return parse(text, str(path))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _ident(value: str, dotted: bool = True) -> str:
    if not _IDENT_RE.match(value) or (not dotted and "." in value):
        raise ValueError(f"not a valid identifier: {value!r}")
    return value


def _string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _real(value: float) -> str:
    return repr(float(value))


def _interval(interval: m.Interval) -> str:
    return f"[{_real(interval.low)}, {_real(interval.high)}]"


def _skill_lines(skill: m.Skill) -> List[str]:
    head = f"skill {_ident(skill.id)}"
    if skill.description is not None:
        head += f" description {_string(skill.description)}"
    if skill.requires:
        head += " requires " + ", ".join(_ident(r) for r in skill.requires)
    if skill.thresholds is not None:
        head += f" thresholds {_real(skill.thresholds.degraded)} {_real(skill.thresholds.unavailable)}"
    lines = [head]
    for b in skill.metric_bindings:
        line = (
            f"    metric {_ident(b.source, dotted=False)}.{_ident(b.metric)} {b.kind.value}"
            f" nominal {_interval(b.nominal)} unavailable {_interval(b.unavailable)}"
        )
        if b.timeout is not None:
            line += f" timeout {_real(b.timeout)}"
        lines.append(line)
    lines[-1] += ";"
    return lines


def _viewpoint(viewpoint: m.Viewpoint) -> str:
    body: List[str] = []
    body.extend(f"stakeholder {_string(s)};" for s in viewpoint.stakeholders)
    body.extend(f"concern {_string(c)};" for c in viewpoint.concerns)
    body.extend(f"node {_ident(n.id)};" for n in viewpoint.nodes)
    for e in viewpoint.edges:
        label = f" : {_ident(e.label)}" if e.label is not None else ""
        body.append(f"edge {_ident(e.source)} -> {_ident(e.target)}{label};")
    for skill in viewpoint.skills:
        body.extend(_skill_lines(skill))
    head = f"viewpoint {viewpoint.kind.value} {_ident(viewpoint.id, dotted=False)} {{"
    if not body:
        return head + "}"
    return "\n".join([head] + ["  " + line for line in body] + ["}"])


def _correspondence(corr: m.Correspondence) -> str:
    grouped: Dict[str, List[str]] = {}
    for a, b in corr.pairs:
        grouped.setdefault(a, []).append(b)
    head = f"correspondence {_ident(corr.id)} {_ident(corr.from_viewpoint)} -> {_ident(corr.to_viewpoint)} {{"
    if not grouped:
        return head + "}"
    body = [f"  {_ident(a)} => {', '.join(_ident(b) for b in bs)};" for a, bs in grouped.items()]
    return "\n".join([head] + body + ["}"])


def _requirement(req: m.Requirement) -> str:
    anchors = ", ".join(
        f"{_ident(a.viewpoint, dotted=False)}.{_ident(a.element)}" if a.viewpoint else _ident(a.element, dotted=False)
        for a in req.anchors
    )
    return f"requirement {_ident(req.id)} {req.kind.value} on {anchors} text {_string(req.text)};"


def _scenario(scenario: m.Scenario) -> str:
    head = f"scenario {_ident(scenario.id)} {{"
    if not scenario.parameters:
        return head + "}"
    body = [f"  {key} = {_real(value)};" for key, value in scenario.parameters]
    return "\n".join([head] + body + ["}"])


def serialize(model: m.ArchitectureModel) -> str:
    """Canonical text: header line, then blocks sorted by (kind, id)."""
    blocks: List[Tuple[str, str, str]] = []
    blocks.extend(("correspondence", c.id, _correspondence(c)) for c in model.correspondences)
    blocks.extend(("requirement", r.id, _requirement(r)) for r in model.requirements)
    blocks.extend(("scenario", s.id, _scenario(s)) for s in model.scenarios)
    blocks.extend(("viewpoint", v.id, _viewpoint(v)) for v in model.viewpoints)
    blocks.sort(key=lambda b: (_BLOCK_ORDER.index(b[0]), b[1]))
    parts: Sequence[str] = [HEADER] + [b[2] for b in blocks]
    return "\n\n".join(parts) + "\n"
