import networkx as nx
import pytest
from hypothesis import given, settings

from capcheck import adl
from capcheck.errors import CycleError
from capcheck.model import (
    Anchor,
    ArchitectureModel,
    ElementRef,
    Interval,
    Skill,
    SkillGraph,
    Thresholds,
    Viewpoint,
    ViewpointKind,
    scenario_problems,
    topological_order,
    validate,
)

from .strategies import dags

LEAF = "metric s.m scalar nominal [0.8, 1] unavailable [0, 0.2]"


def codes(text):
    return validate(adl.parse(text)).codes


class TestInterval:
    def test_contains_is_closed(self):
        interval = Interval(0.0, 1.0)
        assert interval.contains(0.0) and interval.contains(1.0)
        assert not interval.contains(1.0000001)

    def test_distance(self):
        interval = Interval(2.0, 3.0)
        assert interval.distance(2.5) == 0.0
        assert interval.distance(1.0) == 1.0
        assert interval.distance(5.0) == 2.0

    def test_unbounded(self):
        assert Interval(float("-inf"), 0.0).contains(-1e300)
        assert Interval(1.0, float("inf")).distance(0.0) == 1.0


@pytest.mark.parametrize(
    "degraded, unavailable, ok",
    [(0.8, 0.3, True), (1.0, 0.0, True), (0.3, 0.8, False), (0.5, 0.5, False), (1.2, 0.3, False), (0.8, -0.1, False)],
)
def test_thresholds_validity(degraded, unavailable, ok):
    assert Thresholds(degraded, unavailable).is_valid is ok


class TestSkillGraph:
    def test_topological_order_puts_required_skills_first(self):
        graph = SkillGraph.from_edges(["A", "B", "C"], [("A", "B"), ("A", "C")])
        assert topological_order(graph) == ["B", "C", "A"]

    def test_ties_are_broken_by_id(self):
        graph = SkillGraph.from_edges(["Z", "A", "M"], [("Z", "A")])
        assert topological_order(graph) == ["A", "M", "Z"]

    def test_cycle_raises_with_members(self):
        graph = SkillGraph.from_edges(["A", "B", "C"], [("A", "B"), ("B", "C"), ("C", "A")])
        with pytest.raises(CycleError) as info:
            topological_order(graph)
        assert info.value.members == ("A", "B", "C")

    def test_self_requirement_is_a_cycle(self):
        graph = SkillGraph([Skill("A", requires=("A",))])
        assert graph.cycles() == [("A",)]

    def test_leaf_means_no_declared_requires(self):
        graph = SkillGraph.from_edges(["A", "B"], [("A", "B")])
        assert graph.is_leaf("B") and not graph.is_leaf("A")
        assert graph.children("A") == ["B"]
        assert graph.parents("B") == ["A"]

    @settings(max_examples=300, deadline=None)
    @given(dags())
    def test_topological_order_respects_every_edge(self, graph):
        order = topological_order(graph)
        position = {skill: i for i, skill in enumerate(order)}
        assert sorted(order) == sorted(graph)
        for parent, child in graph.requires_edges:
            assert position[child] < position[parent]

    @settings(max_examples=200, deadline=None)
    @given(dags())
    def test_topological_order_is_deterministic(self, graph):
        rebuilt = SkillGraph.from_edges(reversed(list(graph)), reversed(graph.requires_edges))
        assert topological_order(rebuilt) == topological_order(graph)

    @settings(max_examples=200, deadline=None)
    @given(dags())
    def test_descendants_match_networkx(self, graph):
        for skill in graph:
            assert graph.descendants(skill) == sorted(nx.descendants(graph.graph, skill))


class TestArchitectureModel:
    def test_declaration_order_does_not_matter(self):
        a = adl.parse("viewpoint software S { node B; node A; }\nviewpoint hardware H { node X; }")
        b = adl.parse("viewpoint hardware H { node X; }\nviewpoint software S { node A; node B; }")
        assert a == b

    def test_bare_anchor_resolves_to_unique_element(self, crosswalk_model):
        assert crosswalk_model.resolve(Anchor("BrakeActuator")) == ElementRef("hardware", "BrakeActuator")

    def test_ambiguous_bare_anchor_does_not_resolve(self):
        model = adl.parse("viewpoint software S { node A; }\nviewpoint hardware H { node A; }")
        assert model.resolve(Anchor("A")) is None
        assert model.resolve(Anchor("A", "H")) == ElementRef("H", "A")

    def test_skill_graph_of_model_without_capability_viewpoint_is_empty(self):
        assert len(ArchitectureModel().skill_graph()) == 0

    def test_element_ids_include_skills(self):
        viewpoint = Viewpoint("cap", ViewpointKind.CAPABILITY, skills=(Skill("B"), Skill("A")))
        assert viewpoint.element_ids == ["A", "B"]


class TestValidate:
    def test_crosswalk_fixture_is_clean(self, crosswalk_model):
        report = validate(crosswalk_model)
        assert report.ok, [str(v) for v in report]

    def test_empty_model_is_clean(self):
        assert validate(ArchitectureModel()).ok

    def test_cycle(self, fixtures_dir):
        report = validate(adl.parse_file(fixtures_dir / "cyclic.adl"))
        assert report.codes == ["E_CYCLE"]
        assert "A|B|C" in report.violations[0].location

    def test_dangling_requires(self):
        assert "E_DANGLING_EDGE" in codes(f"viewpoint capability {{ skill A requires Ghost; skill B {LEAF}; }}")

    def test_dangling_edge(self):
        assert codes("viewpoint software S { node A; edge A -> Ghost; }") == ["E_DANGLING_EDGE"]

    def test_duplicate_ids(self):
        assert codes("viewpoint software S { node A; node A; }") == ["E_DUP_ID"]
        assert codes("viewpoint software S { }\nviewpoint hardware S { }") == ["E_DUP_ID"]

    def test_bad_thresholds(self):
        assert codes(f"viewpoint capability {{ skill A thresholds 0.3 0.8 {LEAF}; }}") == ["E_BAD_THRESHOLDS"]

    def test_unanchored_requirement(self):
        text = 'viewpoint software S { node A; }\nrequirement R hazard on S.Ghost text "x";'
        assert codes(text) == ["E_UNANCHORED_REQ"]

    def test_leaf_without_binding(self):
        assert codes("viewpoint capability { skill A; }") == ["E_UNBOUND_LEAF"]

    def test_overlapping_intervals(self):
        text = "viewpoint capability { skill A metric s.m scalar nominal [0, 1] unavailable [0.5, 2]; }"
        assert codes(text) == ["E_BAD_INTERVAL"]

    def test_heartbeat_needs_timeout(self):
        text = "viewpoint capability { skill A metric s.hb heartbeat nominal [1, 1] unavailable [0, 0]; }"
        assert codes(text) == ["E_BAD_TIMEOUT"]

    def test_scalar_takes_no_timeout(self):
        text = "viewpoint capability { skill A metric s.m scalar nominal [1, 1] unavailable [0, 0] timeout 1; }"
        assert codes(text) == ["E_BAD_TIMEOUT"]

    def test_dangling_correspondence_pair(self):
        text = "viewpoint software S { node A; }\nviewpoint hardware H { node X; }\ncorrespondence C S -> H { A => Y; }"
        assert codes(text) == ["E_DANGLING_PAIR"]
        assert codes("correspondence C S -> H { }") == ["E_DANGLING_PAIR"]

    def test_skill_outside_capability_viewpoint(self):
        assert codes(f"viewpoint software S {{ skill A {LEAF}; }}") == ["E_MISPLACED_SKILL"]

    def test_single_capability_viewpoint(self):
        assert codes("viewpoint capability A { }\nviewpoint capability B { }") == ["E_MULTIPLE_CAPABILITY"]

    def test_bad_scenario(self):
        assert codes("scenario S { v_init = 10; }") == ["E_BAD_SCENARIO"]

    def test_violations_are_sorted_and_unique(self):
        report = validate(adl.parse("viewpoint software S { node A; node A; edge A -> G; edge A -> G; }"))
        assert list(report.violations) == sorted(set(report.violations))


class TestScenarioProblems:
    BASE = {"v_init": 10.0, "d_crossing": 40.0, "a_max": 8.0, "mu": 0.8, "t_react": 0.5, "d_detect": 35.0}

    def test_complete_profile(self):
        assert scenario_problems(self.BASE) == []

    def test_friction_range(self):
        assert scenario_problems({**self.BASE, "mu": 0.0})
        assert scenario_problems({**self.BASE, "mu": 1.6})
        assert scenario_problems({**self.BASE, "mu": 1.5}) == []

    def test_partial_occlusion_geometry(self):
        assert scenario_problems({**self.BASE, "van_length": 8.0})

    def test_negative_distance(self):
        assert scenario_problems({**self.BASE, "d_detect": -1.0})
