"""Retrospective motion-artifact synthesis with controllable severity.

A motion schedule assigns a head pose to every acquired k-space line.  The
corrupted volume is built by splicing PE lines from pose-rotated copies of
the input into the per-slice 2D k-spaces, visiting lines in centric order
against a slice-major acquisition timeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InvalidPattern, ScheduleMismatch
from .kspace import fft2_slices, ifft2_slices
from .volume import Volume, normalize

__all__ = [
    "Pose",
    "MotionSchedule",
    "build_schedule",
    "corrupted_ratio",
    "centric_order",
    "rotate_volume",
    "apply_motion",
    "export_mask_csv",
]

REFERENCE = None  # set after Pose is defined


@dataclass(frozen=True)
class Pose:
    """Head pose: yaw = in-plane rotation, pitch = through-plane nodding (degrees)."""

    yaw_deg: float = 0.0
    pitch_deg: float = 0.0

    @property
    def is_reference(self) -> bool:
        return self.yaw_deg == 0.0 and self.pitch_deg == 0.0


REFERENCE = Pose(0.0, 0.0)


@dataclass(frozen=True)
class MotionSchedule:
    """Time-ordered pose-per-line table.

    events are (start_line, end_line, Pose) half-open intervals that
    partition [0, total_lines).
    """

    t_s_eg: int
    eg_echoes: int
    trajectory: str
    events: tuple[tuple[int, int, Pose], ...]
    total_lines: int

    def __post_init__(self):
        if self.trajectory not in ("centric", "linear"):
            raise ValueError(f"unknown trajectory {self.trajectory!r}")
        prev = 0
        for start, end, _pose in self.events:
            if start != prev or end <= start:
                raise ValueError("events must partition the line range without gaps")
            prev = end
        if prev != self.total_lines:
            raise ValueError("events do not cover total_lines")

    def pose_per_line(self) -> list[Pose]:
        out: list[Pose] = []
        for start, end, pose in self.events:
            out.extend([pose] * (end - start))
        return out

    def poses(self) -> list[Pose]:
        """Distinct poses in schedule order, reference first."""
        seen: list[Pose] = [REFERENCE]
        for _s, _e, p in self.events:
            if p not in seen:
                seen.append(p)
        return seen

    def to_json(self) -> dict:
        yaw = max((abs(p.yaw_deg) for _s, _e, p in self.events), default=0.0)
        pitch = max((abs(p.pitch_deg) for _s, _e, p in self.events), default=0.0)
        return {
            "t_s_eg": self.t_s_eg,
            "eg_echoes": self.eg_echoes,
            "trajectory": self.trajectory,
            "yaw_deg": yaw,
            "pitch_deg": pitch,
            "total_lines": self.total_lines,
        }


def build_schedule(t_s_eg: int, eg_echoes: int, total_lines: int,
                   pattern: tuple[float, float] = (5.0, 0.0),
                   trajectory: str = "centric",
                   literal_steps: bool = False) -> MotionSchedule:
    """Schedule from the repeating stay / rotate-left / stay / rotate-right cycle.

    pattern is (yaw_deg, pitch_deg); yaw alternates sign between episodes and
    pitch is applied together with yaw.  Each rotation episode lasts 9 EG
    (rotate out 2, hold 5, rotate back 2) and carries the rotated pose for
    its full duration, which reproduces the stated corrupted-line ratios
    18EG / (2*T_s + 18EG).  With literal_steps=True one extra reference stay
    of T_s is inserted per cycle (ratio 18EG / (3*T_s + 18EG)).
    """
    if t_s_eg < 1 or eg_echoes < 1 or total_lines < 1:
        raise InvalidPattern("t_s_eg, eg_echoes and total_lines must be >= 1")
    yaw, pitch = float(pattern[0]), float(pattern[1])
    if yaw < 0 or pitch < 0:
        raise InvalidPattern("pattern angles must be non-negative")
    eg = eg_echoes

    if yaw == 0.0 and pitch == 0.0:
        events = ((0, total_lines, REFERENCE),)
        return MotionSchedule(t_s_eg, eg_echoes, trajectory, events, total_lines)

    left = Pose(+yaw, pitch)
    right = Pose(-yaw, pitch)
    # (duration_in_EG, pose) blocks; first block is the initial stay
    cycle = [(9, left), (t_s_eg, REFERENCE), (9, right), (t_s_eg, REFERENCE)]
    if literal_steps:
        cycle.append((t_s_eg, REFERENCE))

    events: list[tuple[int, int, Pose]] = []
    cursor = 0

    def push(duration_eg: int, pose: Pose):
        nonlocal cursor
        if cursor >= total_lines:
            return
        end = min(cursor + duration_eg * eg, total_lines)
        if events and events[-1][2] == pose:
            events[-1] = (events[-1][0], end, pose)
        else:
            events.append((cursor, end, pose))
        cursor = end

    push(t_s_eg, REFERENCE)
    while cursor < total_lines:
        for dur, pose in cycle:
            push(dur, pose)
    return MotionSchedule(t_s_eg, eg_echoes, trajectory, tuple(events), total_lines)


def corrupted_ratio(s: MotionSchedule) -> float:
    """Exact fraction of lines acquired at a non-reference pose."""
    corrupted = sum(end - start for start, end, p in s.events if not p.is_reference)
    return corrupted / s.total_lines


def centric_order(n_lines: int) -> list[int]:
    """Line visit order: by distance from the center index, ties to the lower index."""
    if n_lines < 1:
        raise ValueError("n_lines must be >= 1")
    c = n_lines // 2
    return sorted(range(n_lines), key=lambda i: (abs(i - c), i))


def rotate_volume(v: Volume, pose: Pose) -> Volume:
    """Rigid rotation about the volume center, trilinear, zeros outside the field.

    Yaw rotates in the (FE, PE) plane (about SL), pitch in the (PE, SL)
    plane (about FE).
    """
    data = v.data.astype(np.float64)
    if pose.yaw_deg != 0.0:
        data = ndimage.rotate(data, pose.yaw_deg, axes=(0, 1), reshape=False,
                              order=1, mode="constant", cval=0.0)
    if pose.pitch_deg != 0.0:
        data = ndimage.rotate(data, pose.pitch_deg, axes=(1, 2), reshape=False,
                              order=1, mode="constant", cval=0.0)
    return Volume(data, spacing=v.spacing)


def apply_motion(v: Volume, schedule: MotionSchedule,
                 pose_catalog: list[Pose] | None = None,
                 renormalize: bool = False) -> Volume:
    """Splice per-slice k-space lines from pose-rotated variants of v.

    The acquisition timeline is slice-major: all PE lines of slice 0 (in
    centric order), then slice 1, and so on; global line index t maps to
    the pose active at time t in the schedule.
    """
    n_fe, n_pe, n_sl = v.dims
    if schedule.total_lines != n_pe * n_sl:
        raise ScheduleMismatch(
            f"schedule covers {schedule.total_lines} lines, volume needs {n_pe * n_sl}")
    poses = pose_catalog if pose_catalog is not None else schedule.poses()
    for _s, _e, p in schedule.events:
        if p not in poses:
            raise ScheduleMismatch(f"schedule pose {p} missing from catalog")
    variants = {p: fft2_slices((v if p.is_reference else rotate_volume(v, p)).data
                               .astype(np.float64))
                for p in poses}
    pose_of_line = schedule.pose_per_line()
    order = (centric_order(n_pe) if schedule.trajectory == "centric"
             else list(range(n_pe)))

    out_k = np.array(variants[REFERENCE], copy=True) if REFERENCE in variants \
        else np.zeros((n_fe, n_pe, n_sl), dtype=np.complex128)
    for sl in range(n_sl):
        base = sl * n_pe
        for j, pe in enumerate(order):
            pose = pose_of_line[base + j]
            out_k[:, pe, sl] = variants[pose][:, pe, sl]
    img = ifft2_slices(out_k).real
    vol = Volume(img, spacing=v.spacing)
    return normalize(vol) if renormalize else vol


def export_mask_csv(schedule: MotionSchedule, path: str | Path) -> None:
    """Write a (line_index, corrupted 0/1) CSV for audit."""
    pose_of_line = schedule.pose_per_line()
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["line_index", "corrupted"])
        for i, p in enumerate(pose_of_line):
            w.writerow([i, 0 if p.is_reference else 1])
