"""PID teacher, closed-loop simulation and behaviour-cloning dataset.

The controller is queried every dt_control seconds with the full raw state;
its output (the centre-of-mass offset) is held constant while the dynamics
advance at dt_model. Recorded query rows become the regression dataset, and
min-max normalization maps it into the unit box for training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .aeromodel import (EX_MAX, EX_MIN, AlphaRegionGuard,
                        IntegrationDivergedError, PlateParams, State, Trace,
                        rk4_step)


@dataclass(frozen=True)
class PidGains:
    """Gains on the x6+x5 tracking error, plus the actuation bias and clamp."""

    kp: float
    ki: float = 0.0
    kd: float = 0.0
    u_center: float = 0.187
    u_min: float = EX_MIN
    u_max: float = EX_MAX

    def __post_init__(self):
        if not (self.u_min <= self.u_center <= self.u_max):
            raise ValueError("u_center must lie inside [u_min, u_max]")


# Desk-tuned with scripts/tune_pid.py over the nine default starts. The
# descent rate relative to the target line is essentially actuation-
# insensitive for this parameter set (tuner floor: worst |x6+x5| ~= 2.65 for
# t >= 10 s at kp=-0.01, ki=+0.01, kd=-0.005), so among near-floor gains we
# ship the pure-proportional teacher: its command is an exact function of the
# queried state (ideal for behaviour cloning) and it commands a larger offset
# above the line, matching the trajectory-property conventions.
DEFAULT_GAINS = PidGains(kp=0.005, ki=0.0, kd=0.0)


def _evenly_spaced(lo: float, hi: float, n: int) -> tuple:
    if n == 1:
        return (0.5 * (lo + hi),)
    step = (hi - lo) / (n - 1)
    return tuple(lo + i * step for i in range(n))


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 20.0
    dt_model: float = 0.01
    dt_control: float = 0.5
    n_sims: int = 9
    x6_starts: tuple = field(default=None)
    record_skip: int = 16

    def __post_init__(self):
        if self.x6_starts is None:
            object.__setattr__(self, "x6_starts",
                               _evenly_spaced(1.43, 4.29, self.n_sims))
        ratio = self.dt_control / self.dt_model
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt_control must be an integer multiple of dt_model")
        n_ctrl = self.t_end / self.dt_control
        if abs(n_ctrl - round(n_ctrl)) > 1e-9:
            raise ValueError("t_end must be an integer multiple of dt_control")
        if len(self.x6_starts) != self.n_sims:
            raise ValueError("x6_starts must have n_sims entries")
        if self.record_skip < 0 or self.record_skip >= round(n_ctrl):
            raise ValueError("record_skip out of range")

    @property
    def steps_per_control(self) -> int:
        return round(self.dt_control / self.dt_model)

    @property
    def n_control(self) -> int:
        return round(self.t_end / self.dt_control)


@dataclass(frozen=True)
class DataRow:
    state: State
    err: float
    actuation: float

    def __post_init__(self):
        if not (EX_MIN - 1e-12 <= self.actuation <= EX_MAX + 1e-12):
            raise ValueError("actuation outside the clamp range")


def target_error(s: State, slope: float = -1.0, intercept: float = 0.0) -> float:
    """Signed offset of the state above the reference line x6 = slope*x5 + intercept.

    With the defaults this is x6 + x5: positive above the line x6 = -x5.
    """
    return s.x6 - (slope * s.x5 + intercept)


@dataclass
class PidState:
    integral: float = 0.0
    prev_err: float | None = None


def pid_step(e: float, pid_state: PidState, gains: PidGains, dt: float) -> float:
    """One PID update; returns the clamped actuation.

    Rectangle-rule integral, backward-difference derivative, and the integral
    is frozen whenever the unclamped output saturates (anti-windup).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    integral_next = pid_state.integral + e * dt
    deriv = 0.0 if pid_state.prev_err is None else (e - pid_state.prev_err) / dt
    u_raw = gains.u_center + gains.kp * e + gains.ki * integral_next + gains.kd * deriv
    if gains.u_min <= u_raw <= gains.u_max:
        pid_state.integral = integral_next
        u = u_raw
    else:
        u = min(gains.u_max, max(gains.u_min, u_raw))
    pid_state.prev_err = e
    return u


class PidController:
    """State-to-actuation teacher; owns its PID memory, reset per simulation."""

    def __init__(self, gains: PidGains = DEFAULT_GAINS, dt_control: float = 0.5,
                 slope: float = -1.0, intercept: float = 0.0):
        self.gains = gains
        self.dt_control = dt_control
        self.slope = slope
        self.intercept = intercept
        self._pid = PidState()

    def reset(self):
        self._pid = PidState()

    def __call__(self, s: State) -> float:
        e = target_error(s, self.slope, self.intercept)
        return pid_step(e, self._pid, self.gains, self.dt_control)


class NetworkController:
    """Wraps a trained network as a state-to-actuation controller."""

    def __init__(self, net, u_min: float = EX_MIN, u_max: float = EX_MAX):
        from .mlp import forward
        self._forward = forward
        self.net = net
        self.u_min = u_min
        self.u_max = u_max

    def reset(self):
        pass

    def __call__(self, s: State) -> float:
        y = self._forward(self.net, np.array(s.as_tuple()), use_norm=True)
        return min(self.u_max, max(self.u_min, float(y)))


class ConstantController:
    def __init__(self, e_x: float):
        self.e_x = e_x

    def reset(self):
        pass

    def __call__(self, s: State) -> float:
        return self.e_x


def simulate_closed_loop(s0: State, ctrl, cfg: SimConfig, p: PlateParams,
                         record=None, strict: bool = False) -> Trace:
    """Closed-loop trajectory; ctrl(state) is queried every dt_control.

    `record(k, state, err, u)` is invoked at each controller query, after the
    actuation is computed.
    """
    if hasattr(ctrl, "reset"):
        ctrl.reset()
    tr = Trace()
    s = s0
    u = None
    guard = AlphaRegionGuard(strict)
    for k in range(round(cfg.t_end / cfg.dt_model)):
        t = k * cfg.dt_model
        if k % cfg.steps_per_control == 0:
            u = float(ctrl(s))
            if record is not None:
                record(k // cfg.steps_per_control, s, target_error(s), u)
        if k == 0:
            tr.append(0.0, s, u)
        try:
            s = rk4_step(s, u, p, cfg.dt_model, t=t)
        except IntegrationDivergedError as exc:
            raise IntegrationDivergedError(
                exc.t, f"(control step {k // cfg.steps_per_control})") from exc
        tr.append(t + cfg.dt_model, s, u)
        guard.check(s, u, p, t + cfg.dt_model)
    guard.finish()
    return tr


def generate_dataset(cfg: SimConfig, gains: PidGains, p: PlateParams) -> list:
    """PID closed-loop runs from every start; one DataRow per controller
    query after the first record_skip queries."""
    rows = []
    for x6_0 in cfg.x6_starts:
        s0 = State(1.0, 0.0, 0.0, 0.0, 0.0, x6_0)
        sim_rows = []

        def record(i, s, err, u, sim_rows=sim_rows):
            if i >= cfg.record_skip:
                sim_rows.append(DataRow(s, err, u))

        simulate_closed_loop(s0, PidController(gains, cfg.dt_control), cfg, p,
                             record=record)
        rows.extend(sim_rows)
    return rows


# ---------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class NormSpec:
    in_min: tuple
    in_max: tuple
    out_min: float
    out_max: float

    def __post_init__(self):
        if len(self.in_min) != len(self.in_max):
            raise ValueError("in_min/in_max length mismatch")
        for lo, hi in zip(self.in_min, self.in_max):
            if not lo < hi:
                raise ValueError("in_min must be strictly below in_max")
        if not self.out_min < self.out_max:
            raise ValueError("out_min must be strictly below out_max")

    def to_json(self) -> str:
        return json.dumps({"in_min": list(self.in_min), "in_max": list(self.in_max),
                           "out_min": self.out_min, "out_max": self.out_max})

    @staticmethod
    def from_json(text: str) -> "NormSpec":
        d = json.loads(text)
        return NormSpec(tuple(d["in_min"]), tuple(d["in_max"]),
                        d["out_min"], d["out_max"])


class DegenerateRangeError(ValueError):
    pass


def fit_norm(rows: list) -> NormSpec:
    """Min-max bounds of the dataset inputs (states) and output (actuation)."""
    if len(rows) < 2:
        raise ValueError("need at least two rows to fit normalization")
    X = np.array([r.state.as_tuple() for r in rows], dtype=float)
    y = np.array([r.actuation for r in rows], dtype=float)
    in_min, in_max = X.min(axis=0), X.max(axis=0)
    for d in range(X.shape[1]):
        if in_min[d] == in_max[d]:
            raise DegenerateRangeError(f"input dimension {d} has zero range")
    if y.min() == y.max():
        raise DegenerateRangeError("output has zero range")
    return NormSpec(tuple(in_min), tuple(in_max), float(y.min()), float(y.max()))


def normalize(v, spec: NormSpec):
    v = np.asarray(v, dtype=float)
    lo = np.array(spec.in_min)
    hi = np.array(spec.in_max)
    return (v - lo) / (hi - lo)


def denormalize(v_hat, spec: NormSpec):
    v_hat = np.asarray(v_hat, dtype=float)
    lo = np.array(spec.in_min)
    hi = np.array(spec.in_max)
    return v_hat * (hi - lo) + lo


def normalize_out(y, spec: NormSpec):
    return (y - spec.out_min) / (spec.out_max - spec.out_min)


def denormalize_out(y_hat, spec: NormSpec):
    return y_hat * (spec.out_max - spec.out_min) + spec.out_min


def rows_to_arrays(rows: list, spec: NormSpec | None = None):
    """(X, y) arrays; normalized into the unit box when a spec is given."""
    X = np.array([r.state.as_tuple() for r in rows], dtype=float)
    y = np.array([r.actuation for r in rows], dtype=float)
    if spec is not None:
        X = normalize(X, spec)
        y = normalize_out(y, spec)
    return X, y


def dataset_to_csv(rows: list, path):
    with open(path, "w") as fh:
        fh.write("x1,x2,x3,x4,x5,x6,err,e_x_cmd\n")
        for r in rows:
            vals = r.state.as_tuple() + (r.err, r.actuation)
            fh.write(",".join(format(v, ".17g") for v in vals) + "\n")


def dataset_from_csv(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x1,x2,x3,x4,x5,x6,err,e_x_cmd":
            raise ValueError(f"unexpected dataset header: {header}")
        for line in fh:
            vals = [float(v) for v in line.strip().split(",")]
            rows.append(DataRow(State(*vals[:6]), vals[6], vals[7]))
    return rows
