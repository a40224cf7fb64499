"""In-memory architecture model: viewpoints, skills, requirements, correspondences, scenarios.

Model objects are frozen dataclasses. Collections are stored as tuples in
canonical order (sorted by id), so two models declaring the same entities in a
different order compare equal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx

from .errors import CycleError

logger = logging.getLogger(__name__)


class ViewpointKind(str, Enum):
    FUNCTIONAL = "functional"
    CAPABILITY = "capability"
    SOFTWARE = "software"
    HARDWARE = "hardware"


class MetricKind(str, Enum):
    HEARTBEAT = "heartbeat"
    COUNTER = "counter"
    SCALAR = "scalar"

    @property
    def is_liveness(self) -> bool:
        return self is not MetricKind.SCALAR


class RequirementKind(str, Enum):
    SAFETY_GOAL = "safety_goal"
    HAZARD = "hazard"
    RISK_MINIMAL_STATE = "rms"
    FUNCTIONAL = "functional"

    @property
    def label(self) -> str:
        return "risk_minimal_state" if self is RequirementKind.RISK_MINIMAL_STATE else self.value


# Scenario keys, all SI units.
REQUIRED_SCENARIO_KEYS = ("v_init", "d_crossing", "a_max", "mu", "t_react", "d_detect")
OCCLUSION_SCENARIO_KEYS = ("van_offset_lat", "van_length", "ped_lat")
SCENARIO_DEFAULTS = {"g": 9.81, "margin": 0.0}
SCENARIO_KEYS = frozenset(REQUIRED_SCENARIO_KEYS + OCCLUSION_SCENARIO_KEYS + tuple(SCENARIO_DEFAULTS))


@dataclass(frozen=True)
class Interval:
    """Closed real interval; either bound may be infinite."""

    low: float
    high: float

    @property
    def is_valid(self) -> bool:
        return not (math.isnan(self.low) or math.isnan(self.high)) and self.low <= self.high

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    def distance(self, value: float) -> float:
        return max(self.low - value, 0.0, value - self.high)

    def overlaps(self, other: "Interval") -> bool:
        return self.low <= other.high and other.low <= self.high


@dataclass(frozen=True)
class Thresholds:
    degraded: float
    unavailable: float

    @property
    def is_valid(self) -> bool:
        return 0.0 < self.degraded <= 1.0 and 0.0 <= self.unavailable < 1.0 and self.unavailable < self.degraded


@dataclass(frozen=True)
class MetricBinding:
    source: str
    metric: str
    kind: MetricKind
    nominal: Interval
    unavailable: Interval
    timeout: Optional[float] = None

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.metric)


@dataclass(frozen=True)
class Skill:
    id: str
    description: Optional[str] = None
    requires: Tuple[str, ...] = ()
    thresholds: Optional[Thresholds] = None
    metric_bindings: Tuple[MetricBinding, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "requires", tuple(sorted(self.requires)))
        object.__setattr__(self, "metric_bindings", tuple(self.metric_bindings))

    def effective_thresholds(self, default: Thresholds) -> Thresholds:
        return self.thresholds if self.thresholds is not None else default


@dataclass(frozen=True)
class Element:
    id: str


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    label: Optional[str] = None

    def sort_key(self) -> Tuple[str, str, str]:
        return (self.source, self.target, self.label or "")


@dataclass(frozen=True)
class Viewpoint:
    id: str
    kind: ViewpointKind
    nodes: Tuple[Element, ...] = ()
    edges: Tuple[Edge, ...] = ()
    skills: Tuple[Skill, ...] = ()
    stakeholders: Tuple[str, ...] = ()
    concerns: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=Edge.sort_key)))
        object.__setattr__(self, "skills", tuple(sorted(self.skills, key=lambda s: s.id)))
        object.__setattr__(self, "stakeholders", tuple(sorted(self.stakeholders)))
        object.__setattr__(self, "concerns", tuple(sorted(self.concerns)))

    @property
    def element_ids(self) -> List[str]:
        """Node and skill ids, sorted; duplicates kept."""
        return sorted([n.id for n in self.nodes] + [s.id for s in self.skills])

    def has_element(self, element_id: str) -> bool:
        return any(n.id == element_id for n in self.nodes) or any(s.id == element_id for s in self.skills)


class ElementRef(NamedTuple):
    viewpoint: str
    element: str

    def __str__(self) -> str:
        return f"{self.viewpoint}:{self.element}"


@dataclass(frozen=True)
class Anchor:
    """Requirement anchor as written: `viewpoint.element` or a bare element id."""

    element: str
    viewpoint: Optional[str] = None

    def sort_key(self) -> Tuple[bool, str, str]:
        return (self.viewpoint is not None, self.viewpoint or "", self.element)

    def __str__(self) -> str:
        return f"{self.viewpoint}.{self.element}" if self.viewpoint else self.element


@dataclass(frozen=True)
class Requirement:
    id: str
    kind: RequirementKind
    text: str
    anchors: Tuple[Anchor, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "anchors", tuple(sorted(self.anchors, key=Anchor.sort_key)))


@dataclass(frozen=True)
class Correspondence:
    id: str
    from_viewpoint: str
    to_viewpoint: str
    pairs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(sorted(tuple(p) for p in self.pairs)))


@dataclass(frozen=True)
class Scenario:
    id: str
    parameters: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "parameters", tuple(sorted(self.parameters)))

    def get(self, key: str, default: Optional[float] = None) -> Optional[float]:
        for name, value in self.parameters:
            if name == key:
                return value
        return default

    def as_dict(self) -> Dict[str, float]:
        return dict(self.parameters)


@dataclass(frozen=True)
class ArchitectureModel:
    viewpoints: Tuple[Viewpoint, ...] = ()
    correspondences: Tuple[Correspondence, ...] = ()
    requirements: Tuple[Requirement, ...] = ()
    scenarios: Tuple[Scenario, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "viewpoints", tuple(sorted(self.viewpoints, key=lambda v: v.id)))
        object.__setattr__(self, "correspondences", tuple(sorted(self.correspondences, key=lambda c: c.id)))
        object.__setattr__(self, "requirements", tuple(sorted(self.requirements, key=lambda r: r.id)))
        object.__setattr__(self, "scenarios", tuple(sorted(self.scenarios, key=lambda s: s.id)))

    @property
    def is_empty(self) -> bool:
        return not (self.viewpoints or self.correspondences or self.requirements or self.scenarios)

    def viewpoint(self, viewpoint_id: str) -> Optional[Viewpoint]:
        return next((v for v in self.viewpoints if v.id == viewpoint_id), None)

    def requirement(self, requirement_id: str) -> Optional[Requirement]:
        return next((r for r in self.requirements if r.id == requirement_id), None)

    def scenario(self, scenario_id: str) -> Optional[Scenario]:
        return next((s for s in self.scenarios if s.id == scenario_id), None)

    @property
    def capability_viewpoint(self) -> Optional[Viewpoint]:
        return next((v for v in self.viewpoints if v.kind is ViewpointKind.CAPABILITY), None)

    def skill_graph(self) -> "SkillGraph":
        viewpoint = self.capability_viewpoint
        return SkillGraph(viewpoint.skills if viewpoint else ())

    def has_element(self, ref: ElementRef) -> bool:
        viewpoint = self.viewpoint(ref.viewpoint)
        return viewpoint is not None and viewpoint.has_element(ref.element)

    def element_refs(self) -> List[ElementRef]:
        return sorted({ElementRef(v.id, e) for v in self.viewpoints for e in v.element_ids})

    def resolve(self, anchor: Anchor) -> Optional[ElementRef]:
        """Resolve an anchor; a bare id must name exactly one element across viewpoints."""
        if anchor.viewpoint is not None:
            ref = ElementRef(anchor.viewpoint, anchor.element)
            return ref if self.has_element(ref) else None
        matches = [v.id for v in self.viewpoints if v.has_element(anchor.element)]
        if len(set(matches)) != 1:
            return None
        return ElementRef(matches[0], anchor.element)


class SkillGraph:
    """The capability viewpoint as a DAG of skills; edges point from a skill to the skills it requires."""

    def __init__(self, skills: Iterable[Skill]) -> None:
        self._skills: Dict[str, Skill] = {}
        for skill in skills:
            self._skills.setdefault(skill.id, skill)
        self._graph = nx.DiGraph()
        self._graph.add_nodes_from(sorted(self._skills))
        for parent in sorted(self._skills):
            for child in self._skills[parent].requires:
                if child in self._skills:
                    self._graph.add_edge(parent, child)

    @classmethod
    def from_edges(cls, ids: Iterable[str], edges: Iterable[Tuple[str, str]]) -> "SkillGraph":
        requires: Dict[str, List[str]] = {i: [] for i in ids}
        for parent, child in edges:
            requires.setdefault(parent, []).append(child)
            requires.setdefault(child, [])
        return cls(Skill(id=i, requires=tuple(children)) for i, children in requires.items())

    def __contains__(self, skill_id: object) -> bool:
        return skill_id in self._skills

    def __len__(self) -> int:
        return len(self._skills)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._skills))

    @property
    def graph(self) -> nx.DiGraph:
        return self._graph.copy(as_view=True)

    def skill(self, skill_id: str) -> Skill:
        return self._skills[skill_id]

    @property
    def requires_edges(self) -> List[Tuple[str, str]]:
        return sorted(self._graph.edges())

    def children(self, skill_id: str) -> List[str]:
        return sorted(self._graph.successors(skill_id))

    def parents(self, skill_id: str) -> List[str]:
        return sorted(self._graph.predecessors(skill_id))

    def is_leaf(self, skill_id: str) -> bool:
        return not self._skills[skill_id].requires

    def descendants(self, skill_id: str) -> List[str]:
        return sorted(nx.descendants(self._graph, skill_id))

    def ancestors(self, skill_id: str) -> List[str]:
        return sorted(nx.ancestors(self._graph, skill_id))

    def cycles(self) -> List[Tuple[str, ...]]:
        """Strongly connected groups that form a cycle, each sorted, in sorted order."""
        groups = []
        for component in nx.strongly_connected_components(self._graph):
            if len(component) > 1 or any(self._graph.has_edge(n, n) for n in component):
                groups.append(tuple(sorted(component)))
        return sorted(groups)


def topological_order(graph: SkillGraph) -> List[str]:
    """Evaluation order: every skill after all skills it requires; ties broken by id."""
    try:
        order = list(nx.lexicographical_topological_sort(graph.graph.reverse(copy=False)))
    except nx.NetworkXUnfeasible:
        cycles = graph.cycles()
        raise CycleError(cycles[0] if cycles else ()) from None
    logger.debug("evaluation order: %s", order)
    return order


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

E_CYCLE = "E_CYCLE"
E_DANGLING_EDGE = "E_DANGLING_EDGE"
E_DUP_ID = "E_DUP_ID"
E_BAD_THRESHOLDS = "E_BAD_THRESHOLDS"
E_UNANCHORED_REQ = "E_UNANCHORED_REQ"
E_UNBOUND_LEAF = "E_UNBOUND_LEAF"
E_BAD_INTERVAL = "E_BAD_INTERVAL"
E_BAD_TIMEOUT = "E_BAD_TIMEOUT"
E_DANGLING_PAIR = "E_DANGLING_PAIR"
E_MISPLACED_SKILL = "E_MISPLACED_SKILL"
E_MULTIPLE_CAPABILITY = "E_MULTIPLE_CAPABILITY"
E_BAD_SCENARIO = "E_BAD_SCENARIO"


@dataclass(frozen=True, order=True)
class Violation:
    code: str
    location: str
    message: str = ""

    def __str__(self) -> str:
        return f"{self.code} {self.location}: {self.message}" if self.message else f"{self.code} {self.location}"


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "violations", tuple(sorted(set(self.violations))))

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> List[str]:
        return sorted({v.code for v in self.violations})


def _duplicates(ids: Sequence[str]) -> List[str]:
    seen, dups = set(), set()
    for i in ids:
        (dups if i in seen else seen).add(i)
    return sorted(dups)


def scenario_problems(values: Mapping[str, float]) -> List[str]:
    """Human-readable reasons why a scenario cannot become a kinematic profile."""
    problems = [f"missing key '{k}'" for k in REQUIRED_SCENARIO_KEYS if k not in values]
    present = [k for k in OCCLUSION_SCENARIO_KEYS if k in values]
    if present and len(present) != len(OCCLUSION_SCENARIO_KEYS):
        problems.append("occlusion geometry needs all of " + ", ".join(OCCLUSION_SCENARIO_KEYS))
    for key, value in sorted(values.items()):
        if math.isnan(value):
            problems.append(f"'{key}' is not a number")
    for key in ("v_init", "d_crossing", "d_detect", "t_react", "margin") + OCCLUSION_SCENARIO_KEYS:
        if key in values and values[key] < 0:
            problems.append(f"'{key}' must be >= 0")
    if "a_max" in values and not values["a_max"] > 0:
        problems.append("'a_max' must be > 0")
    if "mu" in values and not 0 < values["mu"] <= 1.5:
        problems.append("'mu' must be in (0, 1.5]")
    if "g" in values and not values["g"] > 0:
        problems.append("'g' must be > 0")
    return problems


def _validate_skill(viewpoint: Viewpoint, skill: Skill, skill_ids: set) -> Iterator[Violation]:
    where = f"{viewpoint.id}/{skill.id}"
    for child in skill.requires:
        if child not in skill_ids:
            yield Violation(E_DANGLING_EDGE, f"{where}->{child}", "required skill is not declared")
    if skill.thresholds is not None and not skill.thresholds.is_valid:
        t = skill.thresholds
        yield Violation(
            E_BAD_THRESHOLDS, where, f"need 0 <= unavailable < degraded <= 1, got ({t.degraded!r}, {t.unavailable!r})"
        )
    if not skill.requires and not skill.metric_bindings:
        yield Violation(E_UNBOUND_LEAF, where, "leaf skill has no metric binding")
    for binding in skill.metric_bindings:
        bwhere = f"{where}/{binding.source}.{binding.metric}"
        if not (binding.nominal.is_valid and binding.unavailable.is_valid):
            yield Violation(E_BAD_INTERVAL, bwhere, "interval bounds reversed")
        elif binding.nominal.overlaps(binding.unavailable):
            yield Violation(E_BAD_INTERVAL, bwhere, "nominal and unavailable intervals overlap")
        if binding.kind.is_liveness:
            if binding.timeout is None or not binding.timeout > 0:
                yield Violation(E_BAD_TIMEOUT, bwhere, f"{binding.kind.value} binding needs a positive timeout")
        elif binding.timeout is not None:
            yield Violation(E_BAD_TIMEOUT, bwhere, "scalar bindings take no timeout")


def _validate_viewpoint(viewpoint: Viewpoint) -> Iterator[Violation]:
    for dup in _duplicates(viewpoint.element_ids):
        yield Violation(E_DUP_ID, f"{viewpoint.id}/{dup}", "element id declared more than once")
    if viewpoint.skills and viewpoint.kind is not ViewpointKind.CAPABILITY:
        for skill in viewpoint.skills:
            yield Violation(E_MISPLACED_SKILL, f"{viewpoint.id}/{skill.id}", "skills belong to a capability viewpoint")
    for edge in viewpoint.edges:
        for end in (edge.source, edge.target):
            if not viewpoint.has_element(end):
                yield Violation(E_DANGLING_EDGE, f"{viewpoint.id}/{edge.source}->{edge.target}", f"no element '{end}'")
    skill_ids = {s.id for s in viewpoint.skills}
    for skill in viewpoint.skills:
        yield from _validate_skill(viewpoint, skill, skill_ids)
    for cycle in SkillGraph(viewpoint.skills).cycles():
        yield Violation(E_CYCLE, f"{viewpoint.id}/{'|'.join(cycle)}", "skills transitively require themselves")


def _validate_correspondence(model: ArchitectureModel, corr: Correspondence) -> Iterator[Violation]:
    ends = {"from": model.viewpoint(corr.from_viewpoint), "to": model.viewpoint(corr.to_viewpoint)}
    for side, viewpoint in ends.items():
        if viewpoint is None:
            name = corr.from_viewpoint if side == "from" else corr.to_viewpoint
            yield Violation(E_DANGLING_PAIR, corr.id, f"no viewpoint '{name}'")
    source, target = ends["from"], ends["to"]
    for a, b in corr.pairs:
        if source is not None and not source.has_element(a):
            yield Violation(E_DANGLING_PAIR, f"{corr.id}/{a}=>{b}", f"no element '{a}' in '{source.id}'")
        if target is not None and not target.has_element(b):
            yield Violation(E_DANGLING_PAIR, f"{corr.id}/{a}=>{b}", f"no element '{b}' in '{target.id}'")


def validate(model: ArchitectureModel) -> ValidationReport:
    """Check every structural invariant; violations are returned, never raised."""
    found: List[Violation] = []

    for kind, ids in (
        ("viewpoint", [v.id for v in model.viewpoints]),
        ("correspondence", [c.id for c in model.correspondences]),
        ("requirement", [r.id for r in model.requirements]),
        ("scenario", [s.id for s in model.scenarios]),
    ):
        found.extend(Violation(E_DUP_ID, f"{kind}:{dup}", f"{kind} declared twice") for dup in _duplicates(ids))

    capability = [v.id for v in model.viewpoints if v.kind is ViewpointKind.CAPABILITY]
    if len(capability) > 1:
        found.append(Violation(E_MULTIPLE_CAPABILITY, ",".join(capability), "only one capability viewpoint allowed"))

    for viewpoint in model.viewpoints:
        found.extend(_validate_viewpoint(viewpoint))
    for corr in model.correspondences:
        found.extend(_validate_correspondence(model, corr))

    for req in model.requirements:
        if not req.anchors:
            found.append(Violation(E_UNANCHORED_REQ, req.id, "requirement has no anchor"))
        for anchor in req.anchors:
            if model.resolve(anchor) is None:
                found.append(Violation(E_UNANCHORED_REQ, f"{req.id}@{anchor}", "anchor names no unique element"))

    for scenario in model.scenarios:
        found.extend(Violation(E_BAD_SCENARIO, scenario.id, p) for p in scenario_problems(scenario.as_dict()))

    report = ValidationReport(tuple(found))
    logger.debug("validation found %d violation(s)", len(report))
    return report
