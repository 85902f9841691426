"""Robot geometry, safety thresholds and cost weights.

Defaults describe a 0.7 m x 0.5 m Ackermann rover that can climb 0.3 rad
slopes and cross 0.1 m steps.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import InvalidSpec


@dataclass(frozen=True)
class RobotSpec:
    length: float = 0.7
    width: float = 0.5
    max_slope: float = 0.3
    max_step: float = 0.1
    # static traversability weights
    static_roughness_weight: float = 0.5
    static_slope_weight: float = 0.5
    # real (heading-dependent) traversability weights
    roughness_weight: float = 0.3
    roll_weight: float = 0.4
    pitch_weight: float = 0.4
    # None means "derive from point density during assessment"
    max_roughness: float | None = None
    max_roll: float = 0.18
    min_pitch: float = -0.3
    max_pitch: float = 0.25
    turn_cost: float = 1.1
    traversability_cost: float = 2.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (self.length > 0 and self.width > 0):
            raise InvalidSpec("robot length and width must be positive")
        if not 0 < self.max_slope < math.pi / 2:
            raise InvalidSpec("max_slope must lie in (0, pi/2)")
        if not self.max_step > 0:
            raise InvalidSpec("max_step must be positive")
        weights = (
            self.static_roughness_weight, self.static_slope_weight,
            self.roughness_weight, self.roll_weight, self.pitch_weight,
            self.turn_cost, self.traversability_cost,
        )
        if any(not (w >= 0) for w in weights):
            raise InvalidSpec("weights and cost factors must be non-negative")
        if self.max_roughness is not None and not self.max_roughness > 0:
            raise InvalidSpec("max_roughness must be positive when given")
        if not self.max_roll > 0:
            raise InvalidSpec("max_roll must be positive")
        if not self.min_pitch < 0 < self.max_pitch:
            raise InvalidSpec("need min_pitch < 0 < max_pitch")

    @property
    def robot_radius(self) -> float:
        """Circumscribed-circle radius used for obstacle inflation."""
        return math.hypot(self.length, self.width) / 2.0

    def replace(self, **changes) -> "RobotSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RobotSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidSpec(f"unknown robot parameters: {sorted(unknown)}")
        return cls(**data)


DEFAULT_SPEC = RobotSpec()
