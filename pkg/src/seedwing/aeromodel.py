"""2D quasi-steady falling-plate dynamics with a displaced centre of mass.

Plate-frame velocities (x1, x2), angular rate x3, pitch x4 and world position
(x5, x6). The centre-of-mass offset e_x = l_CM/l is the single actuation
variable. The derivative core is generic over the scalar types in
:mod:`seedwing.intervals`, so the same formulas serve simulation, interval
enclosures and Jacobians.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from . import intervals as iv

DEG = math.pi / 180.0

# actuation clamp for the centre-of-mass offset
EX_MIN = 0.181
EX_MAX = 0.193

# assumed angle-of-attack validity region
ALPHA_LO = -math.pi / 2
ALPHA_HI = 0.0


class IntegrationDivergedError(RuntimeError):
    def __init__(self, t: float, detail: str = ""):
        self.t = t
        super().__init__(f"integration diverged at t={t:.6g}s {detail}".rstrip())


class AlphaRegionError(RuntimeError):
    """Angle of attack left the assumed region while strict mode was on."""


def _default_inertia(p: "PlateParams", e_x):
    # dimensional reading of the dimensionless appendix formula: I* * rho*l^4
    return (p.mass * (p.a_semi ** 2 + p.b_semi ** 2)
            + p.rho_f * p.ell ** 4 * (1.0 / 32.0 + e_x * e_x))


@dataclass(frozen=True)
class PlateParams:
    """Mechanical and aerodynamic constants of the glider.

    Angles alpha0 / delta_s are stored in radians (defaults converted from
    the tabulated degrees). m_prime defaults to the buoyancy-corrected mass
    of the elliptical section; inertia_fn maps e_x to a moment of inertia.
    """

    ell: float = 0.07
    mass: float = 3.175e-4
    rho_f: float = 1.225
    alpha0: float = 14.0 * DEG
    delta_s: float = 6.0 * DEG
    cl1: float = 0.23857
    cl2: float = 2.8529
    cd0: float = 0.36893
    cd1: float = 5.1822
    cd90: float = 0.80751
    ccp0: float = 0.10598
    ccp1: float = 4.9368
    ccp2: float = 1.4996
    cr: float = 1.73
    a_semi: float = 0.03375
    b_semi: float = 5e-4
    g: float = 9.81
    m_prime: float | None = None
    inertia_fn: Callable[["PlateParams", float], float] | None = None
    tau_r_sign: float = 1.0

    def __post_init__(self):
        for name in ("ell", "mass", "rho_f", "delta_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PlateParams.{name} must be > 0")
        for name in ("cl1", "cl2", "cd0", "cd1", "cd90", "ccp0", "ccp1", "ccp2", "cr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PlateParams.{name} must be > 0")
        if self.tau_r_sign not in (1.0, -1.0):
            raise ValueError("tau_r_sign must be +1 or -1")
        if self.inertia(0.187) <= 0:
            raise ValueError("moment of inertia must be positive")

    @property
    def m_eff(self) -> float:
        """Effective gravitational mass m'."""
        if self.m_prime is not None:
            return self.m_prime
        return self.mass - self.rho_f * math.pi * self.a_semi * self.b_semi

    @property
    def added_mass(self) -> float:
        return math.pi * self.rho_f * self.ell ** 2 / 4.0

    def inertia(self, e_x):
        if self.inertia_fn is not None:
            return self.inertia_fn(self, e_x)
        return _default_inertia(self, e_x)


@dataclass(frozen=True)
class State:
    """The six system variables."""

    x1: float  # plate-frame x' velocity
    x2: float  # plate-frame y' velocity
    x3: float  # angular velocity
    x4: float  # pitch angle
    x5: float  # world x position
    x6: float  # world y position

    def __post_init__(self):
        for name in ("x1", "x2", "x3", "x4", "x5", "x6"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"State.{name} is not finite")

    def as_tuple(self):
        return (self.x1, self.x2, self.x3, self.x4, self.x5, self.x6)

    @staticmethod
    def from_iterable(vals: Sequence[float]) -> "State":
        return State(*map(float, vals))


@dataclass(frozen=True)
class ControlInput:
    """Dimensionless centre-of-mass offset commanded by the controller."""

    e_x: float

    def __post_init__(self):
        if not (EX_MIN - 1e-12 <= self.e_x <= EX_MAX + 1e-12):
            raise ValueError(f"e_x={self.e_x} outside [{EX_MIN}, {EX_MAX}]")


class StateDerivative(NamedTuple):
    dx1: float
    dx2: float
    dx3: float
    dx4: float
    dx5: float
    dx6: float


@dataclass(frozen=True)
class AeroBreakdown:
    alpha: float
    f_sel: float
    c_lift: float
    c_drag: float
    l_cp: float          # metres
    lift_t: tuple        # (x', y') components
    lift_r: tuple
    drag: tuple
    tau_t: float
    tau_r: float


def _ex_value(u) -> float:
    return u.e_x if isinstance(u, ControlInput) else float(u)


# ---------------------------------------------------------------------------
# generic scalar core

def _alpha_of(x1, x2, x3, e_x, p: PlateParams, simplified: bool):
    if simplified:
        return iv.atan2(x2, x1)
    return iv.atan2(x2 - x3 * (e_x * p.ell), x1)


def _coeffs_abs(aa, p: PlateParams):
    """Coefficients from |alpha|; every aerodynamic term is even in alpha."""
    f = (1.0 - iv.tanh((aa - p.alpha0) / p.delta_s)) * 0.5
    c_lift = -(f * p.cl1 * iv.sin(aa) + (1.0 - f) * p.cl2 * iv.sin(2.0 * aa))
    s2 = iv.sin(aa) ** 2
    c_drag = f * (p.cd0 + p.cd1 * s2) + (1.0 - f) * p.cd90 * s2
    l_cp = p.ell * (f * (p.ccp0 - p.ccp1 * aa ** 2)
                    + p.ccp2 * (1.0 - f) * (1.0 - aa / (math.pi / 2)))
    return f, c_lift, c_drag, l_cp


def _coeffs(alpha, p: PlateParams):
    """Selection fraction, signed lift coefficient, drag coefficient, l_cp [m]."""
    return _coeffs_abs(iv.absval(alpha), p)


def _derivative_core(x, e_x, p: PlateParams, simplified: bool = False):
    """Six derivatives for generic scalars. x is a 6-sequence, e_x a scalar.

    The angle of attack enters only through |alpha| = atan2(|vy|, x1), which
    keeps the enclosure defined for any flow direction short of a velocity
    box containing the origin.
    """
    x1, x2, x3, x4 = x[0], x[1], x[2], x[3]
    l_cm = e_x * p.ell
    vy = x2 - x3 * l_cm
    aa = iv.atan2(iv.absval(x2 if simplified else vy), x1)
    _, c_lift, c_drag, l_cp = _coeffs_abs(aa, p)
    spd = iv.sqrt(x1 * x1 + vy * vy)

    half_rho_l = 0.5 * p.rho_f * p.ell
    # lift carries -x1 in the y' slot so that tau_t below is exactly the
    # lever arm times the y' aerodynamic force (and the lift is the
    # perpendicular Kutta force for c_lift < 0)
    lt_x = half_rho_l * c_lift * spd * vy
    lt_y = -half_rho_l * c_lift * spd * x1
    lr_x = -0.5 * p.rho_f * p.ell ** 2 * p.cr * x3 * vy
    lr_y = 0.5 * p.rho_f * p.ell ** 2 * p.cr * x3 * x1
    d_x = -half_rho_l * c_drag * spd * x1
    d_y = -half_rho_l * c_drag * spd * vy

    tau_t = -half_rho_l * spd * (c_lift * x1 + c_drag * vy) * (l_cp - l_cm)
    bracket = (2.0 * e_x + 1.0) ** 4 + p.tau_r_sign * (2.0 * e_x - 1.0) ** 4
    tau_r = -(1.0 / 128.0) * p.rho_f * p.ell ** 4 * p.cd90 * x3 * iv.absval(x3) * bracket

    m, ma, mp_g = p.mass, p.added_mass, p.m_eff * p.g
    dx3 = (tau_t + tau_r) / p.inertia(e_x)
    dx2 = (-m * x3 * x1 + ma * dx3 * l_cm + lt_y + lr_y + d_y
           - mp_g * iv.cos(x4)) / (m + ma)
    dx1 = ((m + ma) * x3 * x2 - ma * x3 * x3 * l_cm + lt_x + lr_x + d_x
           - mp_g * iv.sin(x4)) / m
    c4, s4 = iv.cos(x4), iv.sin(x4)
    return (dx1, dx2, dx3, x3, x1 * c4 - x2 * s4, x1 * s4 + x2 * c4)


# ---------------------------------------------------------------------------
# public float-path operations

def _check_alpha_region(alpha: float, strict: bool):
    if ALPHA_LO <= alpha <= ALPHA_HI:
        return
    if strict:
        raise AlphaRegionError(f"alpha={alpha:.4f} outside [{ALPHA_LO:.4f}, {ALPHA_HI}]")
    warnings.warn(f"angle of attack {alpha:.4f} outside assumed region "
                  f"[-pi/2, 0]; aerodynamic fit extrapolating", stacklevel=3)


def angle_of_attack(s: State, u, p: PlateParams, simplified: bool = False) -> float:
    """atan2(x2 - x3*e_x*l, x1), or atan2(x2, x1) in simplified mode.

    Zero relative flow returns 0 by convention.
    """
    e_x = _ex_value(u)
    vy = s.x2 if simplified else s.x2 - s.x3 * e_x * p.ell
    if s.x1 == 0.0 and vy == 0.0:
        return 0.0
    return math.atan2(vy, s.x1)


def selection_fraction(alpha: float, p: PlateParams) -> float:
    """Smooth pre/post-stall blending factor in (0, 1), decreasing in alpha."""
    return (1.0 - math.tanh((alpha - p.alpha0) / p.delta_s)) / 2.0


def force_coefficients(alpha: float, p: PlateParams, strict: bool = False):
    """(c_lift, c_drag, l_cp[m]) at the given angle of attack."""
    _check_alpha_region(alpha, strict)
    _, c_lift, c_drag, l_cp = _coeffs(alpha, p)
    return c_lift, c_drag, l_cp


def aero_breakdown(s: State, u, p: PlateParams, strict: bool = False) -> AeroBreakdown:
    """All intermediate aerodynamic quantities for one state."""
    e_x = _ex_value(u)
    alpha = angle_of_attack(s, u, p)
    _check_alpha_region(alpha, strict)
    f = selection_fraction(abs(alpha), p)
    _, c_lift, c_drag, l_cp = _coeffs(alpha, p)

    l_cm = e_x * p.ell
    vy = s.x2 - s.x3 * l_cm
    spd = math.hypot(s.x1, vy)
    half_rho_l = 0.5 * p.rho_f * p.ell
    lift_t = (half_rho_l * c_lift * spd * vy, -half_rho_l * c_lift * spd * s.x1)
    lift_r = (-0.5 * p.rho_f * p.ell ** 2 * p.cr * s.x3 * vy,
              0.5 * p.rho_f * p.ell ** 2 * p.cr * s.x3 * s.x1)
    drag = (-half_rho_l * c_drag * spd * s.x1, -half_rho_l * c_drag * spd * vy)
    tau_t = -half_rho_l * spd * (c_lift * s.x1 + c_drag * vy) * (l_cp - l_cm)
    bracket = (2.0 * e_x + 1.0) ** 4 + p.tau_r_sign * (2.0 * e_x - 1.0) ** 4
    tau_r = -(1.0 / 128.0) * p.rho_f * p.ell ** 4 * p.cd90 * s.x3 * abs(s.x3) * bracket
    return AeroBreakdown(alpha, f, c_lift, c_drag, l_cp,
                         lift_t, lift_r, drag, tau_t, tau_r)


def aero_forces(s: State, u, p: PlateParams) -> AeroBreakdown:
    return aero_breakdown(s, u, p)


def aero_torques(s: State, u, p: PlateParams, l_cp: float):
    """(tau_t, tau_r) given l_cp in metres."""
    e_x = _ex_value(u)
    l_cm = e_x * p.ell
    vy = s.x2 - s.x3 * l_cm
    spd = math.hypot(s.x1, vy)
    c_lift, c_drag, _ = force_coefficients(angle_of_attack(s, u, p), p)
    tau_t = -0.5 * p.rho_f * p.ell * spd * (c_lift * s.x1 + c_drag * vy) * (l_cp - l_cm)
    bracket = (2.0 * e_x + 1.0) ** 4 + p.tau_r_sign * (2.0 * e_x - 1.0) ** 4
    tau_r = -(1.0 / 128.0) * p.rho_f * p.ell ** 4 * p.cd90 * s.x3 * abs(s.x3) * bracket
    return tau_t, tau_r


def state_derivative(s: State, u, p: PlateParams, simplified: bool = False) -> StateDerivative:
    """Time derivative of all six state variables."""
    if s.x1 == 0.0 and s.x2 == 0.0 and s.x3 == 0.0:
        # zero relative flow: alpha := 0 and every aero term vanishes
        mp_g = p.m_eff * p.g
        ma = p.added_mass
        return StateDerivative(-mp_g * math.sin(s.x4) / p.mass,
                               -mp_g * math.cos(s.x4) / (p.mass + ma),
                               0.0, 0.0,
                               s.x1 * math.cos(s.x4) - s.x2 * math.sin(s.x4),
                               s.x1 * math.sin(s.x4) + s.x2 * math.cos(s.x4))
    return StateDerivative(*_derivative_core(s.as_tuple(), _ex_value(u), p, simplified))


def _deriv_raw(x, e_x, p, simplified=False):
    if x[0] == 0.0 and x[1] == 0.0 and x[2] == 0.0:
        mp_g = p.m_eff * p.g
        return (-mp_g * math.sin(x[3]) / p.mass,
                -mp_g * math.cos(x[3]) / (p.mass + p.added_mass),
                0.0, 0.0,
                x[0] * math.cos(x[3]) - x[1] * math.sin(x[3]),
                x[0] * math.sin(x[3]) + x[1] * math.cos(x[3]))
    return _derivative_core(x, e_x, p, simplified)


def rk4_step(s: State, u, p: PlateParams, dt: float, t: float = 0.0,
             deriv=None) -> State:
    """One classical 4th-order Runge-Kutta step with the control held fixed.

    `deriv` may inject an alternative (x, e_x, p) -> 6-tuple derivative,
    used by the integrator order tests.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    f = deriv if deriv is not None else _deriv_raw
    e_x = _ex_value(u)
    x = s.as_tuple()
    k1 = f(x, e_x, p)
    k2 = f(tuple(x[i] + 0.5 * dt * k1[i] for i in range(6)), e_x, p)
    k3 = f(tuple(x[i] + 0.5 * dt * k2[i] for i in range(6)), e_x, p)
    k4 = f(tuple(x[i] + dt * k3[i] for i in range(6)), e_x, p)
    nxt = tuple(x[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
                for i in range(6))
    if not all(math.isfinite(v) for v in nxt):
        raise IntegrationDivergedError(t + dt)
    return State(*nxt)


@dataclass
class Trace:
    """Time-indexed sequence of states with the actuation applied at each sample."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    e_x: list = field(default_factory=list)

    def append(self, t: float, s: State, e_x: float):
        self.times.append(t)
        self.states.append(s)
        self.e_x.append(e_x)

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,x1,x2,x3,x4,x5,x6,e_x\n")
            for t, s, u in zip(self.times, self.states, self.e_x):
                vals = (t,) + s.as_tuple() + (u,)
                fh.write(",".join(format(v, ".17g") for v in vals) + "\n")

    @staticmethod
    def from_csv(path) -> "Trace":
        tr = Trace()
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "t,x1,x2,x3,x4,x5,x6,e_x":
                raise ValueError(f"unexpected trace header: {header}")
            for line in fh:
                vals = [float(v) for v in line.strip().split(",")]
                tr.append(vals[0], State(*vals[1:7]), vals[7])
        return tr


def simulate_open_loop(s0: State, e_x, p: PlateParams, t_end: float,
                       dt: float = 0.01, strict: bool = False) -> Trace:
    """Fixed-actuation trajectory sampled every dt (first sample at t=0)."""
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    u = _ex_value(e_x)
    n = round(t_end / dt)
    tr = Trace()
    s = s0
    tr.append(0.0, s, u)
    guard = AlphaRegionGuard(strict)
    for k in range(n):
        s = rk4_step(s, u, p, dt, t=k * dt)
        tr.append((k + 1) * dt, s, u)
        guard.check(s, u, p, (k + 1) * dt)
    guard.finish()
    return tr


class AlphaRegionGuard:
    """Tracks excursions of the angle of attack outside the assumed region.

    Warns once per run by default; raises AlphaRegionError under strict mode.
    """

    def __init__(self, strict: bool = False, margin: float = 1e-9):
        self.strict = strict
        self.margin = margin
        self.first = None

    def check(self, s: State, u, p: PlateParams, t: float):
        a = angle_of_attack(s, u, p)
        if ALPHA_LO - self.margin <= a <= ALPHA_HI + self.margin:
            return
        if self.strict:
            raise AlphaRegionError(
                f"alpha={a:.4f} outside [-pi/2, 0] at t={t:.3f}s")
        if self.first is None:
            self.first = (t, a)

    def finish(self):
        if self.first is not None:
            t, a = self.first
            warnings.warn(f"angle of attack left the assumed region "
                          f"[-pi/2, 0] (first at t={t:.3f}s, alpha={a:.4f}); "
                          f"the aerodynamic fit is extrapolating", stacklevel=2)


def mean_glide_slope(tr: Trace, t_from: float) -> float:
    """dx6/dx5 between the first sample at/after t_from and the last sample."""
    i0 = next(i for i, t in enumerate(tr.times) if t >= t_from)
    dx5 = tr.states[-1].x5 - tr.states[i0].x5
    dx6 = tr.states[-1].x6 - tr.states[i0].x6
    if dx5 == 0.0:
        return math.inf if dx6 > 0 else -math.inf
    return dx6 / dx5
