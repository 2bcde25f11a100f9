"""Fixed-step classical Runge-Kutta integration with post-step monitors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import CasimirKitError, DivergenceError


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of an ODE plus named scalar monitors.

    ``states[i]`` is the state at ``times[i]``; every monitor has one entry per
    sample, evaluated after the step that produced the sample.
    """

    times: np.ndarray
    states: np.ndarray
    monitors: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        if len(self.states) != n:
            raise ValueError("times and states differ in length")
        for name, values in self.monitors.items():
            if len(values) != n:
                raise ValueError(f"monitor {name!r} has wrong length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self):
        return self.states[-1]


def rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(t_end, dt):
    if not (dt > 0 and t_end > 0):
        raise CasimirKitError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    return max(1, int(np.ceil(t_end / dt - 1e-9)))


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_end: float,
    dt: float,
    monitors: Mapping[str, Callable[[np.ndarray], float]] | None = None,
    stride: int = 1,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from 0 to ``t_end`` with classical RK4.

    The last step is shortened so the run ends exactly at ``t_end``. States are
    stored every ``stride`` steps (the final state is always stored); monitors
    are evaluated at every stored sample.
    """
    monitors = dict(monitors or {})
    n_steps = step_count(t_end, dt)
    y = np.array(y0, dtype=np.result_type(np.asarray(y0), float), copy=True)
    t = 0.0
    times, states = [0.0], [y.copy()]
    records = {name: [fn(y)] for name, fn in monitors.items()}
    for i in range(1, n_steps + 1):
        h = min(dt, t_end - t) if i == n_steps else dt
        y_new = rk4_step(rhs, t, y, h)
        if not np.all(np.isfinite(y_new)):
            raise DivergenceError("non-finite state during integration", t)
        y = y_new
        t = t_end if i == n_steps else t + h
        if i % stride == 0 or i == n_steps:
            times.append(t)
            states.append(y.copy())
            for name, fn in monitors.items():
                records[name].append(fn(y))
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        monitors={k: np.asarray(v) for k, v in records.items()},
    )


def drift(traj: Trajectory, name: str) -> float:
    """Largest excursion ``max_t |m(t) - m(0)|`` of a recorded monitor."""
    try:
        values = traj.monitors[name]
    except KeyError:
        raise KeyError(f"unknown monitor {name!r}; have {sorted(traj.monitors)}") from None
    return float(np.max(np.abs(values - values[0])))
