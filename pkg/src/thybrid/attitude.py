"""Projected robot attitude on a local terrain plane and real traversability.

Two heading conventions meet here. :func:`heading_rotation` and
:func:`project` take ``theta`` in the layout where the robot x-axis is
``(cos theta, -sin theta, 0)``. Planner headings are CCW-positive with motion
along ``(cos h, sin h)``; use :func:`attitude_for_heading` (or the scalar
:func:`roll_pitch`) for those.

Angle conventions: ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. With z up and
y to the left, driving forward up a ramp gives negative pitch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection
from .robot import RobotSpec

_CROSS_EPS = 1e-6
_GIMBAL_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class ProjectedAttitude:
    rotation: np.ndarray
    roll: float
    pitch: float
    yaw: float


def heading_rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0],
                     [-s, c, 0.0],
                     [0.0, 0.0, 1.0]])


def euler_zyx(rot) -> tuple:
    """Return ``(yaw, pitch, roll)`` with ``rot = Rz(yaw) Ry(pitch) Rx(roll)``."""
    r = np.asarray(rot, dtype=float)
    cos_pitch = math.hypot(r[0, 0], r[1, 0])
    if cos_pitch < _GIMBAL_EPS:
        raise DegenerateProjection("pitch at +-pi/2 (gimbal lock)")
    yaw = math.atan2(r[1, 0], r[0, 0])
    pitch = math.atan2(-r[2, 0], cos_pitch)
    roll = math.atan2(r[2, 1], r[2, 2])
    return yaw, pitch, roll


def rotation_zyx(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    return rz @ ry @ rx


def project(theta: float, normal) -> ProjectedAttitude:
    """Rest the robot with heading ``theta`` on a plane with unit ``normal``.

    The projected x-axis is kept perpendicular to the unprojected y-axis, so
    the projection introduces no yaw relative to the heading frame.
    """
    v = np.asarray(normal, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"normal must be a unit vector (|v| = {norm})")
    y_axis = heading_rotation(theta)[:, 1]
    x_dir = np.cross(y_axis, v)
    length = np.linalg.norm(x_dir)
    if length < _CROSS_EPS:
        raise DegenerateProjection("terrain normal is parallel to the robot's lateral axis")
    x_axis = x_dir / length
    rot = np.column_stack([x_axis, np.cross(v, x_axis), v])
    yaw, pitch, roll = euler_zyx(rot)
    return ProjectedAttitude(rot, roll, pitch, yaw)


def attitude_for_heading(heading: float, normal) -> ProjectedAttitude:
    """:func:`project` for a CCW-positive planner heading."""
    return project(-heading, normal)


def roll_pitch(heading, nx, ny, nz):
    """Scalar fast path of :func:`attitude_for_heading`; returns ``(roll, pitch)``.

    ``(nx, ny, nz)`` need not be exactly unit length.
    """
    inv = 1.0 / math.sqrt(nx * nx + ny * ny + nz * nz)
    nx, ny, nz = nx * inv, ny * inv, nz * inv
    # lateral axis of the heading frame
    ly_x, ly_y = -math.sin(heading), math.cos(heading)
    # x = ly cross n
    xx = ly_y * nz
    xy = -ly_x * nz
    xz = ly_x * ny - ly_y * nx
    length = math.sqrt(xx * xx + xy * xy + xz * xz)
    if length < _CROSS_EPS:
        raise DegenerateProjection("terrain normal is parallel to the robot's lateral axis")
    xx, xy, xz = xx / length, xy / length, xz / length
    # second column y = n cross x; only its z component is needed
    yz = nx * xy - ny * xx
    cos_pitch = math.sqrt(xx * xx + xy * xy)
    if cos_pitch < _GIMBAL_EPS:
        raise DegenerateProjection("pitch at +-pi/2 (gimbal lock)")
    return math.atan2(yz, nz), math.atan2(-xz, cos_pitch)


def pitch_penalty(pitch: float, spec: RobotSpec) -> float:
    """Normalized pitch with separate nose-up and nose-down limits."""
    return max(pitch / spec.min_pitch, pitch / spec.max_pitch)


def exceeds_limits(r_sum: float, roll: float, pitch: float, spec: RobotSpec,
                   max_roughness: float) -> bool:
    return (abs(roll) > spec.max_roll
            or not spec.min_pitch <= pitch <= spec.max_pitch
            or r_sum > max_roughness)


def real_traversability(r_sum: float, attitude, spec: RobotSpec,
                        max_roughness: float | None = None) -> float:
    """Heading-dependent traversability in [0, 1].

    ``attitude`` is a :class:`ProjectedAttitude` or a ``(roll, pitch)`` pair.
    Any pose beyond a hard safety limit (roll, pitch window, roughness) scores
    exactly 0.
    """
    r_max = spec.max_roughness if max_roughness is None else max_roughness
    if r_max is None or not r_max > 0:
        raise ValueError("a positive max_roughness is required")
    if isinstance(attitude, ProjectedAttitude):
        roll, pitch = attitude.roll, attitude.pitch
    else:
        roll, pitch = attitude
    if exceeds_limits(r_sum, roll, pitch, spec, r_max):
        return 0.0
    tau = (1.0
           - spec.roughness_weight * r_sum / r_max
           - spec.roll_weight * abs(roll) / spec.max_roll
           - spec.pitch_weight * pitch_penalty(pitch, spec))
    return min(1.0, max(0.0, tau))
