#!/usr/bin/env python3
"""
capcheck - capability-viewpoint checks for automated-vehicle architectures
"""

import io
import logging
import sys
from enum import IntEnum
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

import click
import colorama
import numpy as np
from colorama import Fore, Style

from . import __version__
from . import adl
from . import kinematics as kin
from .config import Settings, load_settings
from .errors import (
    CapcheckError,
    ConfigError,
    MetricStreamError,
    ParseError,
    UnknownElement,
    UnknownRequirement,
    UnknownScenario,
    UnknownSkill,
    UnsortedStream,
)
from .model import ArchitectureModel, ElementRef, RequirementKind, Thresholds, validate
from .monitor import read_metric_stream, replay, write_decision_log
from .traceability import check_coverage, format_path, impact, trace_requirement, write_refs_csv

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


class ExitStatus(IntEnum):
    OK = 0
    FINDINGS = 1
    PARSE_ERROR = 2
    IO_ERROR = 3
    USAGE_ERROR = 4


class _EchoHandler(logging.Handler):
    """Log records go to whatever stderr click currently writes to."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            click.echo(self.format(record), err=True)
        except Exception:
            self.handleError(record)


def configure_logging(level: str) -> None:
    root = logging.getLogger("capcheck")
    if not any(isinstance(h, _EchoHandler) for h in root.handlers):
        handler = _EchoHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


class Output:
    """Human-readable output; colour only when enabled in settings or by CAPCHECK_COLOR=1."""

    def __init__(self, color: bool) -> None:
        self.color = color

    def paint(self, text: str, color: str) -> str:
        return f"{color}{text}{Style.RESET_ALL}" if self.color else text

    def ok(self, text: str) -> None:
        click.echo(f"{self.paint('✓', Fore.GREEN)} {text}")

    def fail(self, text: str, err: bool = False) -> None:
        click.echo(f"{self.paint('✗', Fore.RED)} {text}", err=err)

    def heading(self, text: str) -> None:
        click.echo(self.paint(text, Fore.BLUE))


class AppContext:
    def __init__(self, settings: Settings) -> None:
        self.settings = settings
        self.out = Output(settings.output.color)

    @property
    def default_thresholds(self) -> Thresholds:
        degraded, unavailable = self.settings.monitor.default_thresholds
        return Thresholds(degraded, unavailable)


def _exit_for(error: BaseException) -> ExitStatus:
    if isinstance(error, (ParseError, MetricStreamError, UnsortedStream)):
        return ExitStatus.PARSE_ERROR
    if isinstance(error, (UnknownSkill, UnknownElement, UnknownRequirement, UnknownScenario, ConfigError)):
        return ExitStatus.USAGE_ERROR
    if isinstance(error, OSError):
        return ExitStatus.IO_ERROR
    return ExitStatus.FINDINGS


class CapcheckGroup(click.Group):
    """Maps every failure to an ExitStatus instead of click's defaults."""

    def main(
        self, args: Optional[Sequence[str]] = None, *pargs: Any, standalone_mode: bool = True, **extra: Any
    ) -> Any:
        colorama.just_fix_windows_console()
        try:
            rv = super().main(args, *pargs, standalone_mode=False, **extra)
            status = ExitStatus.OK if rv is None else ExitStatus(int(rv))
        except click.ClickException as e:
            e.show()
            status = ExitStatus.USAGE_ERROR
        except click.Abort:
            click.echo("Operation cancelled.", err=True)
            status = ExitStatus.FINDINGS
        except (CapcheckError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            status = _exit_for(e)
        if standalone_mode:
            sys.exit(int(status))
        return int(status)


def _load(path: Path) -> ArchitectureModel:
    return adl.parse_file(path)


def _load_valid(app: AppContext, path: Path) -> ArchitectureModel:
    """Parse and validate; an invalid model stops the command with exit 1."""
    model = _load(path)
    report = validate(model)
    if not report.ok:
        for violation in report:
            app.out.fail(str(violation), err=True)
        click.echo(f"{path}: model has {len(report)} violation(s)", err=True)
        click.get_current_context().exit(ExitStatus.FINDINGS)
    return model


def _profile(model: ArchitectureModel, scenario_id: str) -> kin.ScenarioProfile:
    scenario = model.scenario(scenario_id)
    if scenario is None:
        raise UnknownScenario(scenario_id)
    return kin.ScenarioProfile.from_scenario(scenario)


def _parse_ref(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[ElementRef]:
    if value is None:
        return None
    viewpoint, sep, element = value.partition(":")
    if not sep or not viewpoint or not element:
        raise click.BadParameter("expected <viewpoint>:<element>", ctx=ctx, param=param)
    return ElementRef(viewpoint, element)


def _write_csv(writer: Callable[[Any, Any], None], rows: Any, out: Optional[Path]) -> None:
    if out is None:
        buffer = io.StringIO()
        writer(rows, buffer)
        click.echo(buffer.getvalue(), nl=False)
        return
    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer(rows, handle)


model_argument = click.argument("model_path", metavar="MODEL", type=click.Path(dir_okay=False, path_type=Path))
out_option = click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), help="Write CSV here")
scenario_option = click.option("--scenario", "-s", "scenario_id", required=True, help="Scenario id")


@click.group(cls=CapcheckGroup)
@click.version_option(__version__, "--version", "-v", prog_name="capcheck")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default="WARNING", show_default=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="User config file")
@click.pass_context
def cli(ctx: click.Context, log_level: str, config_path: Optional[Path]) -> None:
    """capcheck - capability viewpoint toolkit for automated-vehicle safety."""
    configure_logging(log_level.upper())
    ctx.obj = AppContext(load_settings(config_path))


@cli.command("validate")
@model_argument
@click.pass_obj
def validate_cmd(app: AppContext, model_path: Path) -> ExitStatus:
    """Check the model's structural invariants."""
    report = validate(_load(model_path))
    for violation in report:
        app.out.fail(str(violation))
    count = len(report)
    summary = f"{count} violation" + ("" if count == 1 else "s")
    if report.ok:
        app.out.ok(summary)
        return ExitStatus.OK
    click.echo(app.out.paint(summary, Fore.RED))
    return ExitStatus.FINDINGS


@cli.command()
@model_argument
@click.pass_obj
def coverage(app: AppContext, model_path: Path) -> ExitStatus:
    """List source-viewpoint elements missing from each correspondence."""
    model = _load_valid(app, model_path)
    gaps = check_coverage(model)
    for gap in gaps:
        name = f"{gap.correspondence} ({gap.from_viewpoint} -> {gap.to_viewpoint})"
        if gap.covered:
            app.out.ok(f"{name}: covered")
        else:
            app.out.fail(f"{name}: uncovered {', '.join(gap.uncovered)}")
    return ExitStatus.OK if all(g.covered for g in gaps) else ExitStatus.FINDINGS


@cli.command()
@model_argument
@click.option("--from", "origin", required=True, callback=_parse_ref, help="Origin element as <viewpoint>:<element>")
@click.option("--csv", "as_csv", is_flag=True, help="Print viewpoint,element rows")
@click.pass_obj
def trace(app: AppContext, model_path: Path, origin: ElementRef, as_csv: bool) -> ExitStatus:
    """Impact set of a change or failure at one element."""
    model = _load_valid(app, model_path)
    result = impact(model, origin, with_paths=not as_csv)
    if as_csv:
        _write_csv(write_refs_csv, result.affected, None)
        return ExitStatus.OK
    app.out.heading(f"Impact of {origin}: {len(result.affected)} element(s)")
    for ref in result.affected:
        click.echo(f"  {ref}  via {format_path(result.paths[ref])}")
    return ExitStatus.OK


@cli.command()
@model_argument
@click.option("--id", "requirement_id", required=True, help="Requirement id")
@click.option("--csv", "as_csv", is_flag=True, help="Print viewpoint,element rows")
@click.pass_obj
def requirement(app: AppContext, model_path: Path, requirement_id: str, as_csv: bool) -> ExitStatus:
    """Elements a requirement is anchored on and everything they impact."""
    model = _load_valid(app, model_path)
    result = trace_requirement(model, requirement_id)
    if as_csv:
        _write_csv(write_refs_csv, result.affected, None)
        return ExitStatus.OK
    app.out.heading(f"{result.requirement} ({result.kind.label})")
    click.echo(f"  Anchors: {', '.join(str(a) for a in result.anchors)}")
    click.echo(f"  Affected ({len(result.affected)}):")
    for ref in result.affected:
        click.echo(f"    {ref}")
    return ExitStatus.OK


@cli.command()
@model_argument
@click.option("--root", required=True, help="Root skill to decide for")
@click.option("--metrics", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Metric stream CSV")
@click.option("--step", required=True, type=click.FloatRange(min=0, min_open=True), help="Decision period in s")
@click.option("--until", type=click.FloatRange(min=0), help="Last decision time (default: last record)")
@out_option
@click.pass_obj
def monitor(
    app: AppContext,
    model_path: Path,
    root: str,
    metrics: Path,
    step: float,
    until: Optional[float],
    out: Optional[Path],
) -> ExitStatus:
    """Replay a metric stream through the capability monitor."""
    model = _load_valid(app, model_path)
    with open(metrics, newline="", encoding="utf-8") as handle:
        records = read_metric_stream(handle, str(metrics))
    decisions = replay(model, root, records, step, until, app.default_thresholds)
    if out is not None:
        _write_csv(write_decision_log, decisions, out)
        app.out.ok(f"{len(decisions)} decision(s) written to {out}")
        return ExitStatus.OK

    colors = {"NOMINAL": Fore.GREEN, "DEGRADED": Fore.YELLOW, "RMS": Fore.RED}
    for d in decisions:
        state = app.out.paint(f"{d.state.value:<8}", colors[d.state.value])
        cause = ", ".join(f"{skill} ({status.value})" for skill, status in d.cause)
        click.echo(f"t={d.timestamp:.3f}  {state}  {d.aggregated:.3f}" + (f"  cause: {cause}" if cause else ""))
    return ExitStatus.OK


@cli.command()
@model_argument
@scenario_option
@click.option("--grid", required=True, type=click.IntRange(min=2), help="Number of points from 0 to d_crossing")
@click.option("--detection", type=click.FloatRange(0, 1), default=1.0, help="Detection performance in [0, 1]")
@click.option("--braking", type=click.FloatRange(0, 1), default=1.0, help="Braking performance in [0, 1]")
@out_option
@click.pass_obj
def boundary(
    app: AppContext,
    model_path: Path,
    scenario_id: str,
    grid: int,
    detection: float,
    braking: float,
    out: Optional[Path],
) -> ExitStatus:
    """Adequate-speed boundary between safety goal and risk-minimal state."""
    model = _load_valid(app, model_path)
    profile = kin.degrade(_profile(model, scenario_id), detection, braking)
    points = kin.rms_boundary(profile, np.linspace(0.0, profile.d_crossing, grid))
    if out is not None:
        _write_csv(kin.write_boundary, points, out)
        app.out.ok(f"{len(points)} boundary point(s) written to {out}")
        return ExitStatus.OK

    app.out.heading(f"{scenario_id}: a_eff={profile.a_eff:.3f} m/s^2, d_detect={profile.d_detect:.3f} m")
    click.echo(f"  {'d [m]':>10}  {'v_boundary [m/s]':>16}  {'[mph]':>8}")
    for d, v in points:
        click.echo(f"  {d:>10.3f}  {v:>16.3f}  {v / kin.MPH:>8.2f}")
    return ExitStatus.OK


@cli.command()
@model_argument
@scenario_option
@click.option("--policy", required=True, type=click.Choice([p.value for p in kin.Policy]), help="Speed policy")
@out_option
@click.pass_obj
def simulate(app: AppContext, model_path: Path, scenario_id: str, policy: str, out: Optional[Path]) -> ExitStatus:
    """Integrate one approach to the crossing under a speed policy."""
    model = _load_valid(app, model_path)
    profile = _profile(model, scenario_id)
    sim = app.settings.simulation
    result = kin.simulate(profile, policy, sim.dt, sim.standstill_speed, sim.max_duration)
    if out is not None:
        _write_csv(kin.write_trace, result, out)
        app.out.ok(f"{len(result)} sample(s) written to {out}")
        return ExitStatus.OK

    final = result.final
    app.out.heading(f"{scenario_id} / {policy}: {len(result)} sample(s)")
    click.echo(f"  Final: t={final.t:.3f} s  x={final.x:.3f} m  v={final.v:.3f} m/s")
    remaining = profile.d_crossing - final.x
    if final.v == 0 and remaining >= 0:
        app.out.ok(f"Stopped {remaining:.3f} m before the crossing")
    else:
        app.out.fail(f"Reached the crossing at {final.v:.3f} m/s")
    return ExitStatus.OK


@cli.command()
@model_argument
@scenario_option
@click.option("--trace", "trace_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_obj
def hazards(app: AppContext, model_path: Path, scenario_id: str, trace_path: Path) -> ExitStatus:
    """Check a behaviour trace against the hazards declared in the model."""
    model = _load_valid(app, model_path)
    profile = _profile(model, scenario_id)
    with open(trace_path, newline="", encoding="utf-8") as handle:
        behavior = kin.read_trace(handle, str(trace_path))
    declared = {r.id for r in model.requirements if r.kind is RequirementKind.HAZARD}
    findings = kin.check_hazards(behavior, profile, app.settings.hazards.tolerance, declared)
    for finding in findings:
        app.out.fail(f"{finding.hazard} t={finding.timestamp:.3f}: {finding.detail}")
    if not findings:
        app.out.ok("no hazards")
        return ExitStatus.OK
    return ExitStatus.FINDINGS


@cli.command()
@model_argument
def fmt(model_path: Path) -> ExitStatus:
    """Print the model in canonical form."""
    click.echo(adl.serialize(_load(model_path)), nl=False)
    return ExitStatus.OK


@cli.command()
@model_argument
@click.pass_obj
def info(app: AppContext, model_path: Path) -> ExitStatus:
    """Summarize viewpoints, requirements and scenarios."""
    model = _load(model_path)
    app.out.heading("Viewpoints:")
    for viewpoint in model.viewpoints:
        click.echo(f"  {viewpoint.id} ({viewpoint.kind.value}): {len(viewpoint.element_ids)} element(s)")
        for stakeholder in viewpoint.stakeholders:
            click.echo(f"    stakeholder: {stakeholder}")
        for concern in viewpoint.concerns:
            click.echo(f"    concern: {concern}")
    app.out.heading("Requirements:")
    for kind in RequirementKind:
        ids: List[str] = [r.id for r in model.requirements if r.kind is kind]
        if ids:
            click.echo(f"  {kind.label}: {', '.join(ids)}")
    app.out.heading("Scenarios:")
    for scenario in model.scenarios:
        params = ", ".join(f"{k}={v!r}" for k, v in scenario.parameters)
        click.echo(f"  {scenario.id}: {params}")
    return ExitStatus.OK


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Entry point for the CLI application."""
    cli.main(args=argv, prog_name="capcheck")


if __name__ == "__main__":
    main()
