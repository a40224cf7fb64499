"""Behavioral-safety kinematics for the pedestrian-crossing scenario.

Distances are measured along the ego path, `x` from the start position and
`d` as the remaining distance to the crossing line. Lateral offsets are
measured from the ego path (sensor origin at lateral 0).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import IO, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .errors import DomainError, MetricStreamError
from .model import SCENARIO_DEFAULTS, Scenario, scenario_problems

logger = logging.getLogger(__name__)

MPH = 0.44704  # m/s, exact
MIN_DECELERATION = 1e-6

TRACE_HEADER = ["t", "x", "v", "a_cmd"]
BOUNDARY_HEADER = ["d", "v_boundary"]

ArrayLike = Union[float, Sequence[float], np.ndarray]


class Policy(str, Enum):
    CONSERVATIVE_STOP = "conservative_stop"
    ADEQUATE_SPEED_TRACKING = "adequate_speed_tracking"
    CONSTANT_SPEED = "constant_speed"


@dataclass(frozen=True)
class ScenarioProfile:
    v_init: float
    d_crossing: float
    a_max: float
    mu: float
    t_react: float
    d_detect: float
    g: float = SCENARIO_DEFAULTS["g"]
    margin: float = SCENARIO_DEFAULTS["margin"]
    van_offset_lat: Optional[float] = None
    van_length: Optional[float] = None
    ped_lat: Optional[float] = None

    def __post_init__(self) -> None:
        values = {k: v for k, v in self.__dict__.items() if v is not None}
        problems = scenario_problems(values)
        if problems:
            raise DomainError("invalid scenario profile: " + "; ".join(problems))

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioProfile":
        problems = scenario_problems(scenario.as_dict())
        if problems:
            raise DomainError(f"scenario '{scenario.id}': " + "; ".join(problems))
        return cls(**scenario.as_dict())

    @property
    def a_eff(self) -> float:
        return effective_deceleration(self.a_max, self.mu, self.g)

    @property
    def has_occlusion(self) -> bool:
        return self.van_offset_lat is not None and self.van_length is not None and self.ped_lat is not None


@dataclass(frozen=True)
class TraceSample:
    t: float
    x: float
    v: float
    a_cmd: float


@dataclass(frozen=True)
class BehaviorTrace:
    samples: Tuple[TraceSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        for prev, cur in zip(self.samples, self.samples[1:]):
            if not cur.t > prev.t:
                raise DomainError(f"trace time must strictly increase ({prev.t!r} -> {cur.t!r})")
        if any(s.v < 0 for s in self.samples):
            raise DomainError("trace speed must be non-negative")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def final(self) -> TraceSample:
        return self.samples[-1]


@dataclass(frozen=True)
class HazardFinding:
    hazard: str
    timestamp: float
    detail: str


def effective_deceleration(a_max: float, mu: float, g: float = SCENARIO_DEFAULTS["g"]) -> float:
    """Brake actuator limit capped by road friction."""
    return min(a_max, mu * g)


def degrade(profile: ScenarioProfile, detection: float = 1.0, braking: float = 1.0) -> ScenarioProfile:
    """Scale detection range and brake limit by monitored performances in [0, 1]."""
    for name, value in (("detection", detection), ("braking", braking)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} performance must be in [0, 1], got {value!r}")
    return replace(
        profile,
        d_detect=profile.d_detect * detection,
        a_max=max(profile.a_max * braking, MIN_DECELERATION),
    )


def stopping_distance(v: float, a_eff: float, t_react: float = 0.0, margin: float = 0.0) -> float:
    """Reaction distance plus braking distance (plus the acceptable-risk margin)."""
    if not a_eff > 0:
        raise DomainError(f"deceleration must be positive, got {a_eff!r}")
    if v < 0:
        raise DomainError(f"speed must be non-negative, got {v!r}")
    return v * t_react + v * v / (2.0 * a_eff) + margin


def _speed_for(available: np.ndarray, a_eff: float, t_react: float) -> np.ndarray:
    # 2aD / (a t + sqrt((a t)^2 + 2aD)) is the positive root of v t + v^2/2a = D without cancellation
    available = np.maximum(available, 0.0)
    at = a_eff * t_react
    numerator = 2.0 * a_eff * available
    denominator = at + np.sqrt(at * at + numerator)
    finite = (denominator > 0) & np.isfinite(available)
    speed = np.divide(numerator, denominator, out=np.zeros_like(numerator), where=finite)
    return np.where(np.isposinf(available), math.inf, speed)


def adequate_speed(
    d: float, a_eff: float, t_react: float = 0.0, d_detect: float = math.inf, margin: float = 0.0
) -> float:
    """Largest speed that can still stop within min(d, d_detect) - margin."""
    if not a_eff > 0:
        raise DomainError(f"deceleration must be positive, got {a_eff!r}")
    available = min(d, d_detect) - margin
    return float(_speed_for(np.asarray(available, dtype=float), a_eff, t_react))


def _visible_range(profile: ScenarioProfile, corner: np.ndarray) -> np.ndarray:
    """Distance ahead along the pedestrian line that is visible past the van's near corner."""
    if not profile.has_occlusion:
        return np.full_like(corner, math.inf)
    lateral_van, lateral_ped = profile.van_offset_lat, profile.ped_lat
    if lateral_van <= 0 or lateral_ped <= lateral_van:
        return np.full_like(corner, math.inf)
    return np.where(corner > 0, corner * lateral_ped / lateral_van, 0.0)


def occlusion_range(profile: ScenarioProfile, x_ego: float) -> float:
    """Distance ahead at which a pedestrian on the line `ped_lat` first becomes visible past the van corner.

    +inf means the van does not occlude the line from this position.
    """
    if x_ego >= profile.d_crossing:
        return math.inf
    corner = profile.d_crossing - (profile.van_length or 0.0) - x_ego
    return float(_visible_range(profile, np.asarray(corner, dtype=float)))


def _emergence(profile: ScenarioProfile, d: np.ndarray) -> np.ndarray:
    if not profile.has_occlusion:
        return np.full_like(d, math.inf)
    visible = _visible_range(profile, d - profile.van_length)
    # a hidden stretch that starts beyond the crossing does not constrain the approach
    return np.where((d <= 0) | (visible >= d), math.inf, visible)


def effective_distance(profile: ScenarioProfile, d: ArrayLike) -> np.ndarray:
    """Distance within which the vehicle must be able to stop: crossing, detection range or emergence point."""
    d = np.asarray(d, dtype=float)
    return np.minimum(np.minimum(d, profile.d_detect), _emergence(profile, d))


def boundary_speed(profile: ScenarioProfile, d: ArrayLike) -> np.ndarray:
    """v_boundary at remaining distance(s) d; at or below it the safety goal is still achievable."""
    available = effective_distance(profile, d) - profile.margin
    return _speed_for(available, profile.a_eff, profile.t_react)


def rms_boundary(profile: ScenarioProfile, d_grid: Iterable[float]) -> List[Tuple[float, float]]:
    grid = np.asarray(list(d_grid), dtype=float)
    if np.any(grid < 0):
        raise DomainError("distance grid values must be >= 0")
    speeds = boundary_speed(profile, grid)
    return [(float(d), float(v)) for d, v in zip(grid, speeds)]


def _advance(x: np.ndarray, v: np.ndarray, a: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One integration step: velocity first, position with the mean velocity.

    A braking step that would reverse the vehicle is cut at standstill, so
    piecewise-constant deceleration is integrated exactly. Returns (x, v, elapsed).
    """
    v_next = v + a * dt
    stops = (a < 0) & (v_next <= 0)
    safe_a = np.where(stops, a, -1.0)
    x_next = np.where(stops, x + v * v / (-2.0 * safe_a), x + 0.5 * (v + v_next) * dt)
    elapsed = np.where(stops, v / -safe_a, dt)
    return x_next, np.where(stops, 0.0, v_next), elapsed


def stopping_outcomes(
    profile: ScenarioProfile, d_values: ArrayLike, v_values: ArrayLike, dt: float = 1e-3
) -> np.ndarray:
    """Boolean matrix [d, v]: does an emergency stop (after t_react) end within the effective distance?"""
    d = np.asarray(d_values, dtype=float)
    v0 = np.asarray(v_values, dtype=float)
    limit = np.maximum(effective_distance(profile, d) - profile.margin, 0.0)
    v = np.broadcast_to(v0, (d.size, v0.size)).copy()
    x = np.zeros_like(v)

    reaction_steps = math.ceil(profile.t_react / dt - 1e-9)
    for _ in range(reaction_steps):
        x, v, _ = _advance(x, v, np.zeros_like(v), profile.t_react / reaction_steps)
    a_brake = np.full_like(v, -profile.a_eff)
    while np.any(v > 0):
        x, v, _ = _advance(x, v, a_brake, dt)
    return x <= limit[:, None]


def _step_scalar(x: float, v: float, a: float, dt: float) -> Tuple[float, float, float]:
    x_next, v_next, elapsed = _advance(np.asarray(x), np.asarray(v), np.asarray(a), dt)
    return float(x_next), float(v_next), float(elapsed)


def _can_still_brake(profile: ScenarioProfile, x: float, v: float, dt: float) -> bool:
    """Would full braking from (x, v), sampled every dt, stay at or below v_boundary and stop before the crossing?"""
    a_eff = profile.a_eff
    t = np.arange(math.ceil(v / (a_eff * dt))) * dt if v > 0 else np.zeros(0)
    positions = np.append(x + v * t - 0.5 * a_eff * t * t, x + v * v / (2.0 * a_eff))
    speeds = np.append(v - a_eff * t, 0.0)
    if positions[-1] > profile.d_crossing:
        return False
    return bool(np.all(speeds <= boundary_speed(profile, profile.d_crossing - positions)))


def simulate(
    profile: ScenarioProfile,
    policy: Union[Policy, str],
    dt: float = 1e-3,
    standstill_speed: float = 1e-3,
    max_duration: float = 120.0,
) -> BehaviorTrace:
    """Forward-integrate one approach; the trace ends at standstill, on passing the crossing, or at max_duration."""
    policy = Policy(policy)
    a_eff = profile.a_eff
    t, x, v = 0.0, 0.0, profile.v_init
    samples: List[TraceSample] = []
    reason = "max_duration"

    while True:
        if v <= 0.0:
            samples.append(TraceSample(t, x, 0.0, 0.0))
            reason = "standstill"
            break
        if x >= profile.d_crossing:
            samples.append(TraceSample(t, x, v, 0.0))
            reason = "crossing passed"
            break
        if t >= max_duration:
            samples.append(TraceSample(t, x, v, 0.0))
            break

        if policy is Policy.CONSERVATIVE_STOP:
            a = -a_eff
        elif policy is Policy.CONSTANT_SPEED:
            a = 0.0
        else:
            target = float(boundary_speed(profile, profile.d_crossing - x - v * dt))
            a = min(0.0, max(-a_eff, (target - v) / dt))
            # keep only commands after which full braking still respects v_boundary at every sample
            if a > -a_eff and not _can_still_brake(profile, *_step_scalar(x, v, a, dt)[:2], dt):
                a = -a_eff

        samples.append(TraceSample(t, x, v, a))
        x, v, elapsed = _step_scalar(x, v, a, dt)
        t += elapsed
        if policy is Policy.ADEQUATE_SPEED_TRACKING and 0.0 < v <= standstill_speed:
            v = 0.0

    logger.debug("simulate %s: %d samples, ended by %s", policy.value, len(samples), reason)
    return BehaviorTrace(tuple(samples))


def check_hazards(
    trace: BehaviorTrace,
    profile: ScenarioProfile,
    tolerance: float = 1e-6,
    declared: Optional[Set[str]] = None,
) -> List[HazardFinding]:
    """H2: faster than v_boundary; H1: no braking within t_react of that; H3: crossing passed while moving."""
    findings: List[HazardFinding] = []
    samples = trace.samples
    before = [s for s in samples if s.x < profile.d_crossing]
    if before:
        limits = boundary_speed(profile, [profile.d_crossing - s.x for s in before])
        too_fast = next(((s, float(b)) for s, b in zip(before, limits) if s.v > b + tolerance), None)
        if too_fast is not None:
            sample, limit = too_fast
            findings.append(
                HazardFinding(
                    "H2",
                    sample.t,
                    f"v={sample.v:.3f} m/s exceeds adequate speed {limit:.3f} m/s "
                    f"{profile.d_crossing - sample.x:.3f} m before the crossing",
                )
            )
            deadline = sample.t + profile.t_react + 1e-9
            reacted = any(s.a_cmd < 0 for s in samples if sample.t <= s.t <= deadline)
            if not reacted:
                findings.append(
                    HazardFinding("H1", sample.t, f"no braking command within {profile.t_react:.3f} s")
                )

    passing = next((s for s in samples if s.x >= profile.d_crossing and s.v > 0), None)
    if passing is not None:
        findings.append(
            HazardFinding("H3", passing.t, f"crossing passed at v={passing.v:.3f} m/s, pedestrian assumed present")
        )

    if declared is not None:
        findings = [f for f in findings if f.hazard in declared]
    return sorted(findings, key=lambda f: (f.hazard, f.timestamp))


def write_trace(trace: BehaviorTrace, handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for s in trace.samples:
        writer.writerow([repr(s.t), repr(s.x), repr(s.v), repr(s.a_cmd)])


def read_trace(handle: IO[str], source: str = "<trace>") -> BehaviorTrace:
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TRACE_HEADER:
        raise MetricStreamError(source, 1, f"expected header {','.join(TRACE_HEADER)}")
    samples = []
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise MetricStreamError(source, reader.line_num, f"expected 4 fields, got {len(row)}")
        try:
            samples.append(TraceSample(*(float(field) for field in row)))
        except ValueError as e:
            raise MetricStreamError(source, reader.line_num, str(e)) from None
    if not samples:
        raise MetricStreamError(source, reader.line_num, "trace has no samples")
    try:
        return BehaviorTrace(tuple(samples))
    except DomainError as e:
        raise MetricStreamError(source, reader.line_num, str(e)) from None


def write_boundary(points: Sequence[Tuple[float, float]], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(BOUNDARY_HEADER)
    for d, v in points:
        writer.writerow([repr(d), repr(v)])
