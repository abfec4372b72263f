"""Finite-horizon reachability of the closed loop with zonotopes.

One integration step is a conservative linearization of the dynamics: the
set is mapped through x+ = x + dt*(f(c) + J_c (x - c)) exactly, and a
remainder zonotope bounds (a) the mean-value linearization error via an
interval Jacobian, (b) the actuation interval held over the step, and (c)
the explicit-Euler truncation error via a validated a-priori enclosure of
the step trajectories. Every 0.5 s the controller's output range over the
current set is enclosed and held as the actuation interval.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import intervals as iv
from .aeromodel import ALPHA_HI, ALPHA_LO, EX_MAX, EX_MIN, PlateParams, \
    _derivative_core, _deriv_raw
from .intervals import Dual, Interval
from .mlp import Network
from .zono import (Zonotope, zono_hull, zono_max_linear, zono_reduce,
                   zono_split)


class BranchFailure(RuntimeError):
    """A reachability branch cannot be continued soundly."""


class ReachDomainError(BranchFailure):
    """Set left the domain where the dynamics enclosure is defined."""


@dataclass(frozen=True)
class ReachConfig:
    dt: float = 0.01
    t_end: float = 20.0
    dt_control: float = 0.5
    n_splits: int = 16
    max_order: float = 20.0
    width_resplit: float | None = None
    relu_mode: str = "zonotope"          # "zonotope" | "interval"
    exact_alpha: bool = False
    enforce_alpha_region: bool = False
    alpha_margin: float = 0.05
    blowup_width: float = 1e3
    max_branches: int = 256

    def __post_init__(self):
        for a, b in ((self.dt, self.dt_control), (self.dt_control, self.t_end)):
            ratio = b / a
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError("dt must divide dt_control must divide t_end")
        if self.relu_mode not in ("zonotope", "interval"):
            raise ValueError("relu_mode must be 'zonotope' or 'interval'")

    @property
    def steps_per_cycle(self) -> int:
        return round(self.dt_control / self.dt)

    @property
    def n_cycles(self) -> int:
        return round(self.t_end / self.dt_control)


def _boxes_to_intervals(lo, hi):
    return [Interval(float(a), float(b)) for a, b in zip(lo, hi)]


def _check_domain(x_ivs, u_iv: Interval, p: PlateParams, cfg: ReachConfig):
    """Optional model-validity guard: |alpha| must stay in [0, pi/2+margin].

    The enclosure itself is sound for any flow direction; enforcing the
    quasi-steady fit region is a policy choice (off by default, because the
    free-flight attractor of this parameter set sweeps through it)."""
    if not cfg.enforce_alpha_region:
        return
    if cfg.exact_alpha:
        vy = x_ivs[1] - x_ivs[2] * (u_iv * p.ell)
    else:
        vy = x_ivs[1]
    aa = iv.interval_atan2(iv.interval_abs(vy), x_ivs[0])
    if aa.hi > (ALPHA_HI - ALPHA_LO) + cfg.alpha_margin:
        raise ReachDomainError(
            f"|alpha| up to {aa.hi:.3f} outside the assumed fit region")


def interval_derivative(x_ivs, u_iv: Interval, p: PlateParams,
                        simplified: bool = True, core=None):
    """Interval enclosure of the six derivatives over a state box x input set.

    `core` may inject an alternative generic derivative (x, u, p, simplified);
    the default is the plate model.
    """
    f = core if core is not None else _derivative_core
    try:
        return f(list(x_ivs), u_iv, p, simplified)
    except iv.IntervalDomainError as exc:
        raise ReachDomainError(str(exc)) from exc


def point_jacobian(x, u: float, p: PlateParams, simplified: bool = True,
                   core=None):
    """6x7 Jacobian d f / d(x1..x6, u) at a point, via dual numbers."""
    f = core if core is not None else _derivative_core
    seeds = Dual.seed(list(x) + [u], kind=float)
    out = f(seeds[:6], seeds[6], p, simplified)
    J = np.zeros((6, 7))
    for i, d in enumerate(out):
        if isinstance(d, Dual):
            J[i, :] = d.der
    return J


def interval_jacobian(x_ivs, u_iv: Interval, p: PlateParams,
                      simplified: bool = True, cfg: ReachConfig = ReachConfig(),
                      core=None):
    """6x7 matrix of Interval partials of f over the box x_ivs x u_iv.

    Raises ReachDomainError when the set leaves the enclosure domain.
    """
    if core is None:
        _check_domain(x_ivs, u_iv, p, cfg)
    f = core if core is not None else _derivative_core
    seeds = Dual.seed(list(x_ivs) + [u_iv], kind=Interval)
    try:
        out = f(seeds[:6], seeds[6], p, simplified)
    except iv.IntervalDomainError as exc:
        raise ReachDomainError(str(exc)) from exc
    J = [[Interval(0.0)] * 7 for _ in range(6)]
    for i, d in enumerate(out):
        if isinstance(d, Dual):
            J[i] = [iv.as_interval(v) for v in d.der]
        # constant rows (no Dual) keep zero partials
    return J


def _apriori_box(lo, hi, u_iv: Interval, p: PlateParams, cfg: ReachConfig,
                 core=None):
    """Validated enclosure B of all step trajectories: hull + [0,dt]*f(B) in B.

    The candidate margin doubles until the Picard condition holds, which also
    copes with transiently stiff steps where additive inflation stalls.
    """
    dt = cfg.dt
    x_ivs = _boxes_to_intervals(lo, hi)
    f0 = [iv.as_interval(v) for v in
          interval_derivative(x_ivs, u_iv, p, not cfg.exact_alpha, core)]
    # one-sided extensions along the flow; grown per side only where deficient
    m_lo = np.array([max(0.0, -dt * f.lo) + 1e-15 for f in f0])
    m_hi = np.array([max(0.0, dt * f.hi) + 1e-15 for f in f0])
    for _ in range(40):
        B = [Interval(l.lo - a, l.hi + b) for l, a, b in zip(x_ivs, m_lo, m_hi)]
        fB = [iv.as_interval(v) for v in
              interval_derivative(B, u_iv, p, not cfg.exact_alpha, core)]
        need_lo = np.array([max(0.0, -dt * f.lo) + 1e-15 for f in fB])
        need_hi = np.array([max(0.0, dt * f.hi) + 1e-15 for f in fB])
        if np.all(m_lo >= need_lo) and np.all(m_hi >= need_hi):
            return B, fB
        m_lo = np.where(m_lo >= need_lo, m_lo, 1.2 * need_lo)
        m_hi = np.where(m_hi >= need_hi, m_hi, 1.2 * need_hi)
        if max(m_lo.max(), m_hi.max()) > 1e6:
            break
    raise BranchFailure("a-priori step enclosure did not converge")


def reach_step(Z: Zonotope, u_set: Interval, p: PlateParams,
               cfg: ReachConfig = ReachConfig(), core=None,
               return_info: bool = False):
    """One dt step of the conservative linearization.

    `core` injects alternative generic dynamics (tests); with return_info the
    remainder decomposition is returned alongside the zonotope.
    """
    dt = cfg.dt
    lo, hi = zono_hull(Z)
    B, fB = _apriori_box(lo, hi, u_set, p, cfg, core)
    J_int = interval_jacobian(B, u_set, p, not cfg.exact_alpha, cfg, core)

    u_c = u_set.mid
    c = Z.c
    if core is None:
        f_c = np.array(_deriv_raw(tuple(c), u_c, p, not cfg.exact_alpha))
    else:
        f_c = np.array([float(v) for v in core(list(c), u_c, p, not cfg.exact_alpha)])
    J_c = point_jacobian(c, u_c, p, not cfg.exact_alpha, core)

    A = np.eye(6) + dt * J_c[:, :6]
    center = c + dt * f_c
    G_lin = A @ Z.G

    du = u_set - u_c
    rem = []
    for i in range(6):
        acc = Interval(0.0)
        for j in range(6):
            dJ = J_int[i][j] - J_c[i, j]
            acc = acc + dJ * Interval(lo[j] - c[j], hi[j] - c[j])
        acc = acc * dt
        acc = acc + (J_int[i][6] * du) * dt
        trunc = Interval(0.0)
        for j in range(6):
            trunc = trunc + J_int[i][j] * fB[j]
        acc = acc + trunc * (0.5 * dt * dt)
        rem.append(acc)
    rem_mid = np.array([r.mid for r in rem])
    rem_rad = np.array([r.rad for r in rem])
    Z_next = Zonotope(center + rem_mid, np.hstack([G_lin, np.diag(rem_rad)]))
    Z_next = zono_reduce(Z_next, cfg.max_order)
    w = np.max(zono_hull(Z_next)[1] - zono_hull(Z_next)[0])
    if w > cfg.blowup_width:
        raise BranchFailure(f"set blow-up: hull width {w:.3g}")
    if return_info:
        return Z_next, {"remainder": rem, "apriori": B, "J_int": J_int,
                        "J_c": J_c, "f_c": f_c}
    return Z_next


def nn_output_set(net: Network, Z: Zonotope, mode: str = "zonotope") -> Interval:
    """Sound enclosure of the clamped controller output over Z.

    The network must be the raw-input form (normalization embedded). Stable
    ReLUs pass or zero exactly; unstable ones use the standard zonotope ReLU
    abstraction (slope u/(u-l), one fresh generator) in zonotope mode, or
    interval clipping in interval mode.
    """
    if mode == "interval":
        lo, hi = zono_hull(Z)
        a_lo, a_hi = lo.copy(), hi.copy()
        for layer in net.layers:
            c = 0.5 * (a_lo + a_hi)
            r = 0.5 * (a_hi - a_lo)
            pc = layer.w @ c + layer.b
            pr = np.abs(layer.w) @ r
            a_lo, a_hi = pc - pr, pc + pr
            if layer.act == "relu":
                a_lo = np.maximum(a_lo, 0.0)
                a_hi = np.maximum(a_hi, 0.0)
        out_lo, out_hi = float(a_lo[0]), float(a_hi[0])
    elif mode == "zonotope":
        c = Z.c.copy()
        G = Z.G.copy()
        a_lo, a_hi = zono_hull(Z)
        for layer in net.layers:
            c = layer.w @ c + layer.b
            G = layer.w @ G
            bc = 0.5 * (a_lo + a_hi)
            br = 0.5 * (a_hi - a_lo)
            pc = layer.w @ bc + layer.b
            pr = np.abs(layer.w) @ br
            # combine the zonotope hull with the running interval bounds;
            # both are sound, and their intersection keeps the relu slopes
            # (and the final answer) at least as tight as interval mode
            r = np.abs(G).sum(axis=1)
            l_b = np.maximum(c - r, pc - pr)
            u_b = np.minimum(c + r, pc + pr)
            if layer.act != "relu":
                a_lo, a_hi = l_b, u_b
                continue
            fresh = []
            for j in range(c.shape[0]):
                if l_b[j] >= 0.0:
                    continue
                if u_b[j] <= 0.0:
                    c[j] = 0.0
                    G[j, :] = 0.0
                    continue
                lam = u_b[j] / (u_b[j] - l_b[j])
                mu = -lam * l_b[j] / 2.0
                c[j] = lam * c[j] + mu
                G[j, :] *= lam
                col = np.zeros(c.shape[0])
                col[j] = mu
                fresh.append(col)
            if fresh:
                G = np.hstack([G, np.array(fresh).T])
            a_lo = np.maximum(l_b, 0.0)
            a_hi = np.maximum(u_b, 0.0)
        r = np.abs(G).sum(axis=1)
        out_lo = float(max(c[0] - r[0], a_lo[0]))
        out_hi = float(min(c[0] + r[0], a_hi[0]))
        if out_lo > out_hi:   # float dust when the two bounds coincide
            out_lo = out_hi = 0.5 * (out_lo + out_hi)
    else:
        raise ValueError("mode must be 'zonotope' or 'interval'")
    # image of the actuation clamp
    return Interval(min(max(out_lo, EX_MIN), EX_MAX),
                    min(max(out_hi, EX_MIN), EX_MAX))


def reach_control_cycle(Z: Zonotope, net: Network, p: PlateParams,
                        cfg: ReachConfig = ReachConfig(),
                        u_override: Interval | None = None) -> Zonotope:
    """One 0.5 s control period: controller range held over steps_per_cycle
    integration steps (state-actuation correlation dropped)."""
    u_set = u_override if u_override is not None else \
        nn_output_set(net, Z, cfg.relu_mode)
    for _ in range(cfg.steps_per_cycle):
        Z = reach_step(Z, u_set, p, cfg)
    return Z


@dataclass
class Branch:
    index: int
    x6_cell: tuple
    checkpoints: list = field(default_factory=list)   # Zonotope after each cycle
    failed: bool = False
    fail_reason: str = ""
    fail_cycle: int | None = None


@dataclass
class ReachResult:
    branches: list
    cfg: ReachConfig
    final_hull: tuple | None      # (lo, hi) arrays over surviving branches
    inconclusive: bool

    def surviving(self):
        return [b for b in self.branches if not b.failed]


def initial_zonotope(x6_lo: float, x6_hi: float, base_state=None) -> Zonotope:
    if base_state is None:
        c = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.5 * (x6_lo + x6_hi)])
    else:
        c = np.asarray(base_state, dtype=float).copy()
        c[5] = 0.5 * (x6_lo + x6_hi)
    if x6_hi > x6_lo:
        G = np.zeros((6, 1))
        G[5, 0] = 0.5 * (x6_hi - x6_lo)
    else:
        G = np.zeros((6, 0))
    return Zonotope(c, G)


def reach_full(x6_interval, net: Network, p: PlateParams,
               cfg: ReachConfig = ReachConfig(), base_state=None) -> ReachResult:
    """Reachable tube from the standard initial set over the full horizon.

    The initial x6 interval is split into n_splits equal cells; each branch
    runs n_cycles control periods. With width_resplit set, a branch whose
    hull exceeds that width is split along its dominant generator mid-flight.
    base_state overrides the non-x6 components of the standard start.
    """
    x6_lo, x6_hi = float(x6_interval[0]), float(x6_interval[1])
    edges = np.linspace(x6_lo, x6_hi, cfg.n_splits + 1)
    work = []
    for i in range(cfg.n_splits):
        work.append(Branch(i, (float(edges[i]), float(edges[i + 1])),
                           [initial_zonotope(edges[i], edges[i + 1], base_state)]))
    done = []
    next_index = cfg.n_splits
    while work:
        br = work.pop(0)
        Z = br.checkpoints[-1]
        cycle = len(br.checkpoints) - 1
        try:
            while cycle < cfg.n_cycles:
                Z = reach_control_cycle(Z, net, p, cfg)
                br.checkpoints.append(Z)
                cycle += 1
                if cfg.width_resplit is not None and cycle < cfg.n_cycles \
                        and len(work) + len(done) + 2 <= cfg.max_branches:
                    lo, hi = zono_hull(Z)
                    wide = np.flatnonzero(hi - lo > cfg.width_resplit)
                    if wide.size and Z.n_gen > 0:
                        d = int(wide[0])
                        g_idx = int(np.argmax(np.abs(Z.G[d, :])))
                        Z_a, Z_b = zono_split(Z, g_idx)
                        for Zc in (Z_a, Z_b):
                            child = Branch(next_index, br.x6_cell,
                                           br.checkpoints[:-1] + [Zc])
                            next_index += 1
                            work.append(child)
                        br = None
                        break
            if br is not None:
                done.append(br)
        except BranchFailure as exc:
            br.failed = True
            br.fail_reason = str(exc)
            br.fail_cycle = cycle
            done.append(br)
    done.sort(key=lambda b: b.index)

    surv = [b for b in done if not b.failed]
    final_hull = None
    if surv:
        los, his = zip(*(zono_hull(b.checkpoints[-1]) for b in surv))
        final_hull = (np.min(np.array(los), axis=0), np.max(np.array(his), axis=0))
    return ReachResult(done, cfg, final_hull, any(b.failed for b in done))


BAND_FUNCTIONAL = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0])   # x5 + x6


@dataclass
class GoalVerdict:
    status: str           # "success" | "failure" | "unknown"
    band_max: float | None
    band_min: float | None


def goal_check(result: ReachResult, ystar: float = 2.0) -> GoalVerdict:
    """Exact test of |x6 + x5| <= ystar on the final reachable sets."""
    surv = result.surviving()
    if result.inconclusive or not surv:
        return GoalVerdict("unknown", None, None)
    band_max = max(zono_max_linear(b.checkpoints[-1], BAND_FUNCTIONAL) for b in surv)
    band_min = min(-zono_max_linear(b.checkpoints[-1], -BAND_FUNCTIONAL) for b in surv)
    ok = band_max <= ystar and band_min >= -ystar
    return GoalVerdict("success" if ok else "failure", band_max, band_min)


def reach_to_csv(result: ReachResult, path):
    """Per-checkpoint hulls: branch,t,dim,lo,hi."""
    with open(path, "w") as fh:
        fh.write("branch,t,dim,lo,hi\n")
        for b in result.branches:
            for k, Z in enumerate(b.checkpoints):
                lo, hi = zono_hull(Z)
                t = k * result.cfg.dt_control
                for d in range(6):
                    fh.write(f"{b.index},{format(t, '.17g')},{d + 1},"
                             f"{format(lo[d], '.17g')},{format(hi[d], '.17g')}\n")
