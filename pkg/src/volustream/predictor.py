"""Short-horizon bandwidth and pose predictors.

Deliberately simple statistical stand-ins: harmonic-mean smoothing for
bandwidth (robust to throughput spikes) and constant-velocity / constant
angular-velocity extrapolation for the 6DoF pose. A perfect-prediction
mode lives in the simulator, which feeds ground-truth future samples to
isolate selection quality from prediction error.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial.transform import Rotation

from .geometry import Pose

__all__ = ["History", "predict_bandwidth", "predict_pose"]


class History:
    """Ring of recent (timestamp, value) samples, timestamps increasing."""

    def __init__(self, capacity: int = 10):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self._samples: deque[tuple[float, object]] = deque(maxlen=capacity)

    def push(self, t: float, value) -> None:
        if self._samples and t <= self._samples[-1][0]:
            raise ValueError(f"timestamps must strictly increase, got {t}")
        self._samples.append((t, value))

    def __len__(self) -> int:
        return len(self._samples)

    def last(self) -> tuple[float, object]:
        if not self._samples:
            raise ValueError("history is empty")
        return self._samples[-1]

    def recent(self, k: int) -> list[tuple[float, object]]:
        return list(self._samples)[-k:]


def predict_bandwidth(history: History, horizon: float = 0.0, k: int = 5) -> float:
    """Harmonic mean of the last k bandwidth samples, Mbps.

    The horizon argument is accepted for interface symmetry; the estimate
    is horizon-free.
    """
    samples = [float(v) for _, v in history.recent(k)]
    if not samples:
        raise ValueError("cannot predict bandwidth from an empty history")
    if any(s <= 0.0 for s in samples):
        raise ValueError("bandwidth samples must be positive")
    return len(samples) / sum(1.0 / s for s in samples)


def predict_pose(history: History, horizon: float) -> Pose:
    """Extrapolate the last motion over the horizon.

    Position moves at the velocity between the last two samples;
    orientation continues the same angular velocity (rotation-vector
    scaling of the last relative rotation). With fewer than two samples
    the last pose is returned unchanged.
    """
    t_last, pose = history.last()
    pose: Pose
    if len(history) < 2 or horizon == 0.0:
        return Pose(t=t_last + horizon, position=pose.position, orientation=pose.orientation)

    (t0, p0), (t1, p1) = history.recent(2)
    dt = t1 - t0
    scale = horizon / dt
    position = p1.position + (p1.position - p0.position) * scale

    r0, r1 = p0.rotation(), p1.rotation()
    step = (r1 * r0.inv()).as_rotvec() * scale
    x, y, z, w = (Rotation.from_rotvec(step) * r1).as_quat()
    return Pose(t=t1 + horizon, position=position, orientation=np.array([w, x, y, z]))
