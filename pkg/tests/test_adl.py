import math

import pytest
from hypothesis import HealthCheck, given, settings

from capcheck import adl
from capcheck.errors import ParseError
from capcheck.model import (
    Anchor,
    ArchitectureModel,
    Element,
    Interval,
    MetricBinding,
    MetricKind,
    RequirementKind,
    Skill,
    Viewpoint,
    ViewpointKind,
)

from .strategies import models, single_line_texts

ROUND_TRIP = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])


class TestParse:
    def test_crosswalk_fixture(self, crosswalk_model):
        assert [v.id for v in crosswalk_model.viewpoints] == ["capability", "functional", "hardware", "software"]
        capability = crosswalk_model.capability_viewpoint
        assert len(capability.skills) == 7
        assert capability.stakeholders == ("Behavior planner developer",)
        kinds = {r.id: r.kind for r in crosswalk_model.requirements}
        assert kinds["SG1"] is RequirementKind.SAFETY_GOAL
        assert kinds["RMS1"] is RequirementKind.RISK_MINIMAL_STATE
        assert crosswalk_model.scenario("crosswalk_25mph").get("v_init") == 11.176

    def test_viewpoint_without_id_is_named_after_its_kind(self):
        model = adl.parse("viewpoint capability {}")
        assert model.viewpoints[0].id == "capability"
        assert model.viewpoints[0].kind is ViewpointKind.CAPABILITY

    def test_skill_clauses(self):
        model = adl.parse(
            'viewpoint capability { skill A description "top" requires C, B thresholds 0.9 0.2; '
            "skill B metric cam.hb heartbeat nominal [1, 1] unavailable [0, 0] timeout 0.5 "
            "metric cam.rate scalar nominal [25, inf] unavailable [-inf, 5]; skill C metric x.y scalar "
            "nominal [1, 1] unavailable [0, 0]; }"
        )
        a, b, _ = model.capability_viewpoint.skills
        assert a.description == "top"
        assert a.requires == ("B", "C")
        assert (a.thresholds.degraded, a.thresholds.unavailable) == (0.9, 0.2)
        assert [m.kind for m in b.metric_bindings] == [MetricKind.HEARTBEAT, MetricKind.SCALAR]
        assert b.metric_bindings[0].timeout == 0.5
        assert b.metric_bindings[1].nominal.high == math.inf
        assert b.metric_bindings[1].unavailable.low == -math.inf

    def test_dotted_references_split_at_first_dot(self):
        model = adl.parse(
            "viewpoint capability { skill A metric lidar.range.front scalar nominal [1, 1] unavailable [0, 0]; }\n"
            'requirement R hazard on capability.A, A text "t";'
        )
        binding = model.capability_viewpoint.skills[0].metric_bindings[0]
        assert (binding.source, binding.metric) == ("lidar", "range.front")
        assert model.requirements[0].anchors == (Anchor("A"), Anchor("A", "capability"))

    def test_edge_labels_and_correspondence_fan_out(self):
        model = adl.parse(
            "viewpoint software S { node A; node B; edge A -> B : data; }\n"
            "viewpoint hardware H { node X; node Y; }\n"
            "correspondence C S -> H { A => X, Y; B => Y; }"
        )
        assert model.viewpoints[1].edges[0].label == "data"
        assert model.correspondences[0].pairs == (("A", "X"), ("A", "Y"), ("B", "Y"))

    def test_string_escapes(self):
        model = adl.parse(r'viewpoint software S { concern "say \"hi\" \\ bye"; }')
        assert model.viewpoints[0].concerns == ('say "hi" \\ bye',)

    def test_comments_and_whitespace_are_ignored(self):
        assert adl.parse("# nothing here\n\n   # still nothing\n").is_empty

    def test_parse_file_rejects_invalid_utf8(self, tmp_path):
        path = tmp_path / "bad.adl"
        path.write_bytes(b"viewpoint software S { node \xff; }")
        with pytest.raises(ParseError):
            adl.parse_file(path)


class TestParseErrors:
    def test_missing_semicolon_points_at_next_token(self):
        with pytest.raises(ParseError) as info:
            adl.parse("viewpoint functional F {\n  node A\n}", file="f.adl")
        error = info.value
        assert (error.span.file, error.span.line, error.span.column) == ("f.adl", 3, 1)
        assert error.expected == ";"
        assert str(error).startswith("f.adl:3:1: unexpected '}'")

    def test_unknown_block_keyword(self):
        with pytest.raises(ParseError) as info:
            adl.parse("view software S {}")
        assert info.value.span.line == 1 and info.value.span.column == 1

    def test_unknown_scenario_key(self):
        with pytest.raises(ParseError, match="unknown scenario key 'speed'"):
            adl.parse("scenario S { speed = 3; }")

    def test_duplicate_scenario_key(self):
        with pytest.raises(ParseError, match="given twice"):
            adl.parse("scenario S { mu = 0.5; mu = 0.6; }")

    def test_unsupported_escape(self):
        with pytest.raises(ParseError, match="unsupported escape"):
            adl.parse(r'viewpoint software S { concern "a\nb"; }')

    def test_unterminated_string(self):
        with pytest.raises(ParseError, match="unterminated string") as info:
            adl.parse('viewpoint software S {\n  concern "open;\n}')
        assert info.value.span.line == 2

    def test_unexpected_end_of_input(self):
        with pytest.raises(ParseError, match="end of input"):
            adl.parse("viewpoint software S { node A;")

    def test_viewpoint_id_cannot_be_dotted(self):
        source = "viewpoint software sw.main { node Brake; }\nrequirement R functional on sw.main.Brake text \"x\";"
        with pytest.raises(ParseError, match="must not contain") as info:
            adl.parse(source)
        assert (info.value.span.line, info.value.span.column) == (1, 20)

    def test_keyword_cannot_be_a_number(self):
        with pytest.raises(ParseError) as info:
            adl.parse("viewpoint capability { skill A thresholds high 0.3; }")
        assert info.value.expected == "number"

    def test_every_statement_terminator_is_located(self, crosswalk_model):
        lines = adl.serialize(crosswalk_model).split("\n")
        targets = [i for i, line in enumerate(lines) if line.endswith(";")]
        assert targets
        for index in targets:
            mutated = list(lines)
            mutated[index] = mutated[index][:-1] + "{"
            with pytest.raises(ParseError) as info:
                adl.parse("\n".join(mutated))
            assert info.value.span.line == index + 1


class TestSerialize:
    def test_empty_model(self):
        assert adl.serialize(ArchitectureModel()) == "# capcheck-adl 1\n"
        assert adl.parse(adl.serialize(ArchitectureModel())) == ArchitectureModel()

    def test_blocks_are_ordered_by_kind_then_id(self, crosswalk_model):
        text = adl.serialize(crosswalk_model)
        heads = [line.split()[0] + " " + line.split()[1] for line in text.split("\n") if line and line[0].isalpha()]
        kinds = [h.split()[0] for h in heads]
        assert kinds == sorted(kinds, key=["correspondence", "requirement", "scenario", "viewpoint"].index)
        assert heads[:3] == ["correspondence deploys", "correspondence implements", "correspondence realizes"]

    def test_fixture_round_trip(self, crosswalk_model):
        assert adl.parse(adl.serialize(crosswalk_model)) == crosswalk_model

    def test_floats_keep_full_precision(self):
        model = adl.parse("scenario S { v_init = 0.1; d_crossing = 1e-7; mu = 1.4999999999999998; }")
        assert adl.parse(adl.serialize(model)) == model
        assert "v_init = 0.1;" in adl.serialize(model)

    def test_dotted_viewpoint_id_cannot_be_written(self):
        viewpoint = Viewpoint("sw.main", ViewpointKind.SOFTWARE, nodes=(Element("Brake"),))
        with pytest.raises(ValueError):
            adl.serialize(ArchitectureModel(viewpoints=(viewpoint,)))

    def test_dotted_metric_source_cannot_be_written(self):
        binding = MetricBinding("a.x", "b", MetricKind.SCALAR, Interval(1.0, 1.0), Interval(0.0, 0.0))
        viewpoint = Viewpoint("capability", ViewpointKind.CAPABILITY, skills=(Skill("A", metric_bindings=(binding,)),))
        with pytest.raises(ValueError):
            adl.serialize(ArchitectureModel(viewpoints=(viewpoint,)))

    @ROUND_TRIP
    @given(models())
    def test_round_trip(self, model):
        assert adl.parse(adl.serialize(model)) == model

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(models())
    def test_serialize_is_a_fixpoint(self, model):
        text = adl.serialize(model)
        assert adl.serialize(adl.parse(text)) == text

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(models(text=single_line_texts))
    def test_mutated_terminator_is_reported_on_its_line(self, model):
        lines = adl.serialize(model).split("\n")
        for index, line in enumerate(lines):
            if not line.endswith(";"):
                continue
            mutated = list(lines)
            mutated[index] = line[:-1] + "{"
            with pytest.raises(ParseError) as info:
                adl.parse("\n".join(mutated))
            assert info.value.span.line == index + 1
