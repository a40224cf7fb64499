"""Coverage and impact analysis across viewpoint correspondences."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, List, Optional, Tuple

import networkx as nx

from .errors import UnknownElement, UnknownRequirement
from .model import ArchitectureModel, ElementRef, RequirementKind, ViewpointKind

logger = logging.getLogger(__name__)

Path = Tuple[ElementRef, ...]


@dataclass(frozen=True)
class CoverageGap:
    correspondence: str
    from_viewpoint: str
    to_viewpoint: str
    uncovered: Tuple[str, ...]

    @property
    def covered(self) -> bool:
        return not self.uncovered


@dataclass(frozen=True)
class ImpactSet:
    origin: ElementRef
    affected: Tuple[ElementRef, ...]
    paths: Optional[Dict[ElementRef, Path]] = None

    def __contains__(self, ref: object) -> bool:
        return ref in self.affected


@dataclass(frozen=True)
class RequirementTrace:
    requirement: str
    kind: RequirementKind
    anchors: Tuple[ElementRef, ...]
    affected: Tuple[ElementRef, ...]
    impacts: Dict[ElementRef, Tuple[ElementRef, ...]] = field(default_factory=dict)


def check_coverage(model: ArchitectureModel) -> List[CoverageGap]:
    """Per correspondence, the source-viewpoint elements that appear in no pair."""
    gaps = []
    for corr in model.correspondences:
        source = model.viewpoint(corr.from_viewpoint)
        elements = sorted(set(source.element_ids)) if source else []
        mapped = {a for a, _ in corr.pairs}
        gaps.append(
            CoverageGap(
                corr.id, corr.from_viewpoint, corr.to_viewpoint, tuple(e for e in elements if e not in mapped)
            )
        )
    return gaps


def impact_graph(model: ArchitectureModel) -> nx.DiGraph:
    """Correspondence pairs in both directions, requires edges from required skill up to requiring skill."""
    graph = nx.DiGraph()
    graph.add_nodes_from(model.element_refs())
    for corr in model.correspondences:
        for a, b in corr.pairs:
            left, right = ElementRef(corr.from_viewpoint, a), ElementRef(corr.to_viewpoint, b)
            if model.has_element(left) and model.has_element(right):
                graph.add_edge(left, right)
                graph.add_edge(right, left)
    for viewpoint in model.viewpoints:
        if viewpoint.kind is not ViewpointKind.CAPABILITY:
            continue
        for skill in viewpoint.skills:
            for child in skill.requires:
                child_ref = ElementRef(viewpoint.id, child)
                if model.has_element(child_ref):
                    graph.add_edge(child_ref, ElementRef(viewpoint.id, skill.id))
    return graph


def _closure(graph: nx.DiGraph, origin: ElementRef, with_paths: bool) -> ImpactSet:
    affected = tuple(sorted({origin} | nx.descendants(graph, origin)))
    paths = None
    if with_paths:
        found = nx.single_source_shortest_path(graph, origin)
        paths = {ref: tuple(found[ref]) for ref in affected}
    return ImpactSet(origin, affected, paths)


def impact(model: ArchitectureModel, origin: ElementRef, with_paths: bool = False) -> ImpactSet:
    """Everything a change or failure at `origin` can reach; always contains `origin`."""
    origin = ElementRef(*origin)
    if not model.has_element(origin):
        raise UnknownElement(origin.viewpoint, origin.element)
    result = _closure(impact_graph(model), origin, with_paths)
    logger.debug("impact of %s reaches %d element(s)", origin, len(result.affected))
    return result


def trace_requirement(model: ArchitectureModel, requirement_id: str) -> RequirementTrace:
    requirement = model.requirement(requirement_id)
    if requirement is None:
        raise UnknownRequirement(requirement_id)
    graph = impact_graph(model)
    anchors = []
    for anchor in requirement.anchors:
        ref = model.resolve(anchor)
        if ref is None:
            raise UnknownElement(anchor.viewpoint, anchor.element)
        anchors.append(ref)
    impacts = {ref: _closure(graph, ref, with_paths=False).affected for ref in sorted(set(anchors))}
    affected = sorted(set().union(*impacts.values()))
    return RequirementTrace(requirement.id, requirement.kind, tuple(impacts), tuple(affected), impacts)


def write_refs_csv(refs: Iterable[ElementRef], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["viewpoint", "element"])
    for ref in refs:
        writer.writerow([ref.viewpoint, ref.element])


def format_path(path: Path) -> str:
    return " -> ".join(str(ref) for ref in path)
