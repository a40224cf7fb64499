"""Runtime capability monitor.

Metric records (heartbeats, message counters, scalar quality measures) are
mapped to a performance in [0, 1] per skill, propagated up the requires-DAG
with a min operator, and turned into a NOMINAL / DEGRADED / RMS decision for a
root skill.
"""

from __future__ import annotations

import csv
import heapq
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import MetricStreamError, UnknownSkill, UnsortedStream
from .model import ArchitectureModel, MetricBinding, MetricKind, Skill, SkillGraph, Thresholds, topological_order

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = Thresholds(degraded=0.8, unavailable=0.3)

STREAM_HEADER = ["timestamp", "source", "metric", "value"]
DECISION_HEADER = ["timestamp", "root", "state", "aggregated", "cause"]


class SkillStatus(str, Enum):
    NOMINAL = "NOMINAL"
    DEGRADED = "DEGRADED"
    UNAVAILABLE = "UNAVAILABLE"


class DecisionState(str, Enum):
    NOMINAL = "NOMINAL"
    DEGRADED = "DEGRADED"
    RMS = "RMS"


@dataclass(frozen=True)
class MetricRecord:
    timestamp: float
    source: str
    metric: str
    value: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and non-negative, got {self.timestamp!r}")
        if not self.source or not self.metric:
            raise ValueError("source and metric must be non-empty")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.source, self.metric)


@dataclass
class ChannelState:
    """Latest record of one (source, metric) channel plus the time its value last strictly increased."""

    latest: MetricRecord
    last_increase: float

    @classmethod
    def first(cls, record: MetricRecord) -> "ChannelState":
        return cls(record, record.timestamp)

    def update(self, record: MetricRecord) -> None:
        if record.value > self.latest.value:
            self.last_increase = record.timestamp
        self.latest = record

    def age(self, kind: MetricKind, now: float) -> float:
        since = self.last_increase if kind is MetricKind.COUNTER else self.latest.timestamp
        return now - since


@dataclass(frozen=True)
class SkillState:
    skill: str
    own_performance: float
    aggregated_performance: float
    status: SkillStatus


@dataclass(frozen=True)
class Decision:
    timestamp: float
    root: str
    state: DecisionState
    aggregated: float
    cause: Tuple[Tuple[str, SkillStatus], ...] = ()

    def csv_row(self) -> List[str]:
        return [
            repr(self.timestamp),
            self.root,
            self.state.value,
            repr(self.aggregated),
            "|".join(skill for skill, _ in self.cause),
        ]


def normalize(binding: MetricBinding, value: float, age: float) -> float:
    """Map a raw measurement to a performance in [0, 1].

    Inside the nominal interval -> 1, inside the unavailable interval -> 0,
    otherwise dist(unavailable) / (dist(nominal) + dist(unavailable)), which is
    linear interpolation across the gap between the two intervals. Liveness
    bindings older than their timeout are 0.
    """
    if binding.kind.is_liveness and binding.timeout is not None and age > binding.timeout:
        return 0.0
    if math.isnan(value):
        return 0.0
    if binding.nominal.contains(value):
        return 1.0
    if binding.unavailable.contains(value):
        return 0.0
    to_nominal = binding.nominal.distance(value)
    to_unavailable = binding.unavailable.distance(value)
    return min(1.0, max(0.0, to_unavailable / (to_nominal + to_unavailable)))


Evidence = Mapping[Tuple[str, str], Union[MetricRecord, ChannelState]]


def evaluate_leaf(skill: Skill, metrics: Evidence, now: float) -> float:
    """Minimum normalized value over the skill's bindings; a binding without a record counts as 0."""
    if not skill.metric_bindings:
        return 0.0
    worst = 1.0
    for binding in skill.metric_bindings:
        seen = metrics.get(binding.key)
        if seen is None:
            return 0.0
        if isinstance(seen, ChannelState):
            value, age = seen.latest.value, seen.age(binding.kind, now)
        else:
            value, age = seen.value, now - seen.timestamp
        worst = min(worst, normalize(binding, value, age))
    return worst


def own_performance(graph: SkillGraph, skill_id: str, metrics: Evidence, now: float) -> float:
    skill = graph.skill(skill_id)
    if skill.metric_bindings:
        return evaluate_leaf(skill, metrics, now)
    return 0.0 if graph.is_leaf(skill_id) else 1.0


def propagate(graph: SkillGraph, own: Mapping[str, float]) -> Dict[str, float]:
    """aggregated(s) = min(own(s), aggregated(c) for every c that s requires)."""
    aggregated: Dict[str, float] = {}
    for skill_id in topological_order(graph):
        fallback = 0.0 if graph.is_leaf(skill_id) else 1.0
        value = min(1.0, max(0.0, own.get(skill_id, fallback)))
        for child in graph.children(skill_id):
            value = min(value, aggregated[child])
        aggregated[skill_id] = value
    return aggregated


def status_for(value: float, thresholds: Thresholds) -> SkillStatus:
    if value >= thresholds.degraded:
        return SkillStatus.NOMINAL
    if value >= thresholds.unavailable:
        return SkillStatus.DEGRADED
    return SkillStatus.UNAVAILABLE


def skill_states(
    graph: SkillGraph,
    own: Mapping[str, float],
    default_thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> Dict[str, SkillState]:
    aggregated = propagate(graph, own)
    states = {}
    for skill_id, value in aggregated.items():
        thresholds = graph.skill(skill_id).effective_thresholds(default_thresholds)
        fallback = 0.0 if graph.is_leaf(skill_id) else 1.0
        states[skill_id] = SkillState(skill_id, own.get(skill_id, fallback), value, status_for(value, thresholds))
    return states


def decide(
    graph: SkillGraph,
    root: str,
    states: Mapping[str, SkillState],
    thresholds: Optional[Thresholds] = None,
    *,
    timestamp: float = 0.0,
    default_thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> Decision:
    """Decision for `root`; the cause lists the deepest skills below the violated threshold."""
    if root not in graph or root not in states:
        raise UnknownSkill(root)
    if thresholds is None:
        thresholds = graph.skill(root).effective_thresholds(default_thresholds)
    value = states[root].aggregated_performance

    if value >= thresholds.degraded:
        return Decision(timestamp, root, DecisionState.NOMINAL, value)
    if value >= thresholds.unavailable:
        state, limit = DecisionState.DEGRADED, thresholds.degraded
    else:
        state, limit = DecisionState.RMS, thresholds.unavailable

    cause = []
    for skill_id in [root] + graph.descendants(root):
        mine = states[skill_id].aggregated_performance
        if mine >= limit:
            continue
        if any(states[d].aggregated_performance <= mine for d in graph.descendants(skill_id)):
            continue
        cause.append((skill_id, states[skill_id].status))
    return Decision(timestamp, root, state, value, tuple(sorted(cause)))


class CapabilityMonitor:
    """Single-writer monitor over a totally ordered record stream."""

    def __init__(self, graph: SkillGraph, default_thresholds: Thresholds = DEFAULT_THRESHOLDS) -> None:
        self.graph = graph
        self.default_thresholds = default_thresholds
        self._order = topological_order(graph)
        self._channels: Dict[Tuple[str, str], ChannelState] = {}
        self._last_timestamp = -math.inf
        self._ingested = 0

    @property
    def channels(self) -> Mapping[Tuple[str, str], ChannelState]:
        return dict(self._channels)

    def ingest(self, record: MetricRecord) -> None:
        if record.timestamp < self._last_timestamp:
            raise UnsortedStream(self._ingested, record.timestamp, self._last_timestamp)
        self._last_timestamp = record.timestamp
        self._ingested += 1
        channel = self._channels.get(record.key)
        if channel is None:
            self._channels[record.key] = ChannelState.first(record)
        else:
            channel.update(record)

    def evaluate(self, now: float) -> Dict[str, SkillState]:
        own = {s: own_performance(self.graph, s, self._channels, now) for s in self._order}
        return skill_states(self.graph, own, self.default_thresholds)

    def decide(self, root: str, now: float) -> Decision:
        if root not in self.graph:
            raise UnknownSkill(root)
        return decide(
            self.graph, root, self.evaluate(now), timestamp=now, default_thresholds=self.default_thresholds
        )


def replay(
    model: ArchitectureModel,
    root: str,
    stream: Iterable[MetricRecord],
    step: float,
    until: Optional[float] = None,
    default_thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> List[Decision]:
    """One decision per step boundary k*step (k = 1..floor(until/step)), latest record wins."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    graph = model.skill_graph()
    if root not in graph:
        raise UnknownSkill(root)
    records = list(stream)
    for index in range(1, len(records)):
        if records[index].timestamp < records[index - 1].timestamp:
            raise UnsortedStream(index, records[index].timestamp, records[index - 1].timestamp)
    if until is None:
        until = records[-1].timestamp if records else 0.0

    monitor = CapabilityMonitor(graph, default_thresholds)
    steps = int(math.floor(until / step + 1e-9))
    decisions = []
    cursor = 0
    for k in range(1, steps + 1):
        boundary = round(k * step, 9)
        while cursor < len(records) and records[cursor].timestamp <= boundary:
            monitor.ingest(records[cursor])
            cursor += 1
        decisions.append(monitor.decide(root, boundary))
    logger.debug("replayed %d record(s) into %d decision(s)", cursor, len(decisions))
    return decisions


def merge_streams(*streams: Iterable[MetricRecord]) -> Iterator[MetricRecord]:
    """Merge per-producer streams (each sorted) into one stream ordered by timestamp, ties by producer order."""

    def tagged(producer: int, stream: Iterable[MetricRecord]) -> Iterator[Tuple[float, int, int, MetricRecord]]:
        for index, record in enumerate(stream):
            yield record.timestamp, producer, index, record

    merged = heapq.merge(*(tagged(p, s) for p, s in enumerate(streams)), key=lambda item: item[:3])
    for _, _, _, record in merged:
        yield record


def read_metric_stream(handle: IO[str], source: str = "<stream>") -> List[MetricRecord]:
    """Parse `timestamp,source,metric,value`; an empty value means 1.0."""
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != STREAM_HEADER:
        raise MetricStreamError(source, 1, f"expected header {','.join(STREAM_HEADER)}")
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise MetricStreamError(source, reader.line_num, f"expected 4 fields, got {len(row)}")
        try:
            timestamp = float(row[0])
            value = float(row[3]) if row[3].strip() else 1.0
            records.append(MetricRecord(timestamp, row[1].strip(), row[2].strip(), value))
        except ValueError as e:
            raise MetricStreamError(source, reader.line_num, str(e)) from None
    return records


def write_decision_log(decisions: Sequence[Decision], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(DECISION_HEADER)
    for decision in decisions:
        writer.writerow(decision.csv_row())
