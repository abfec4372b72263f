"""Sound and complete verification of linear properties of small ReLU nets.

Branch and bound over unstable ReLU phases: interval propagation fixes
stable neurons, each negated conclusion becomes an LP over the inputs plus
one variable per unstable neuron (triangle relaxation), and the LP optimum
is replayed through the concrete network. Genuine violations falsify;
spurious optima split the widest unstable neuron. An exhausted tree verifies
the property. Leaf LPs are exact (the network is affine on a fixed pattern),
so max violation <= tolerance at a leaf closes that cell.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from . import mlp
from .mlp import Network

REPLAY_TOL = 1e-9
LP_MARGIN = 1e-9
MAX_RELUS = 30


@dataclass(frozen=True)
class LinConstraint:
    """Linear constraint over named network inputs and outputs."""

    in_coef: tuple
    out_coef: tuple
    rel: str          # "<=" | ">=" | "="
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "in_coef", tuple(float(v) for v in self.in_coef))
        object.__setattr__(self, "out_coef", tuple(float(v) for v in self.out_coef))
        if self.rel not in ("<=", ">=", "="):
            raise ValueError(f"bad relation {self.rel!r}")
        if all(v == 0.0 for v in self.in_coef) and all(v == 0.0 for v in self.out_coef):
            raise ValueError("constraint must have a nonzero coefficient")

    @property
    def input_only(self) -> bool:
        return all(v == 0.0 for v in self.out_coef)

    def as_leq(self):
        """Equivalent list of (in_coef, out_coef, rhs) rows in <= form."""
        ic, oc = np.array(self.in_coef), np.array(self.out_coef)
        if self.rel == "<=":
            return [(ic, oc, self.rhs)]
        if self.rel == ">=":
            return [(-ic, -oc, -self.rhs)]
        return [(ic, oc, self.rhs), (-ic, -oc, -self.rhs)]

    def to_json(self):
        return {"in": list(self.in_coef), "out": list(self.out_coef),
                "rel": self.rel, "rhs": self.rhs}

    @staticmethod
    def from_json(d) -> "LinConstraint":
        return LinConstraint(tuple(d["in"]), tuple(d["out"]), d["rel"], d["rhs"])


@dataclass(frozen=True)
class PropertySpec:
    name: str
    input_box: tuple                  # ((lo, hi), ...) per input
    premise: tuple                    # LinConstraints over inputs only
    conclusion: tuple                 # conjunction of LinConstraints
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "input_box",
                           tuple((float(lo), float(hi)) for lo, hi in self.input_box))
        object.__setattr__(self, "premise", tuple(self.premise))
        object.__setattr__(self, "conclusion", tuple(self.conclusion))
        for c in self.premise:
            if not c.input_only:
                raise ValueError("premise constraints must be over inputs only")

    @property
    def n_in(self) -> int:
        return len(self.input_box)

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "input_box": [[lo, hi] for lo, hi in self.input_box],
            "premise": [c.to_json() for c in self.premise],
            "conclusion": [c.to_json() for c in self.conclusion],
            "params": self.params,
        })

    @staticmethod
    def from_json(text: str) -> "PropertySpec":
        d = json.loads(text)
        return PropertySpec(d["name"],
                            tuple((lo, hi) for lo, hi in d["input_box"]),
                            tuple(LinConstraint.from_json(c) for c in d["premise"]),
                            tuple(LinConstraint.from_json(c) for c in d["conclusion"]),
                            d.get("params", {}))


@dataclass
class Verdict:
    status: str                        # "verified" | "falsified" | "timeout"
    vacuous: bool = False
    witness: np.ndarray | None = None
    witness_outputs: np.ndarray | None = None
    nodes: int = 0
    lp_calls: int = 0
    seconds: float = 0.0

    @property
    def verified(self) -> bool:
        return self.status == "verified"


@dataclass(frozen=True)
class Budget:
    max_nodes: int = 200000
    max_seconds: float = 60.0


# ---------------------------------------------------------------------------
# property encodings

@dataclass(frozen=True)
class PropertyThresholds:
    """Actuation and state thresholds used by the four trajectory properties."""

    u_center: float = 0.187
    u_lo: float = 0.184
    u_hi: float = 0.19
    pitch_lo: float = -0.786
    pitch_hi: float = -0.747
    x3_max: float = -0.12
    x2_max: float = -0.3


def _in_vec(n, **kw):
    v = [0.0] * n
    for idx, val in kw.items():
        v[int(idx)] = val
    return tuple(v)


def encode_property(kind: int, ystar: float, box,
                    thresholds: PropertyThresholds = PropertyThresholds()) -> PropertySpec:
    """Trajectory-adherence properties 1-4 over a raw-unit input box.

    1: above the line by ystar      => output >= u_center (commands descent)
    2: below the line by ystar      => output <= u_center
    3: within ystar of the line and pitch in a window => output in [u_lo, u_hi]
    4: above and near the line, pitching down fast and sinking => output <= u_center
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    n = len(box)
    t = thresholds
    line = _in_vec(n, **{"4": 1.0, "5": 1.0})     # x5 + x6
    out1 = (1.0,)
    if kind == 1:
        premise = (LinConstraint(line, (0.0,), ">=", ystar),)
        conclusion = (LinConstraint((0.0,) * n, out1, ">=", t.u_center),)
    elif kind == 2:
        premise = (LinConstraint(line, (0.0,), "<=", -ystar),)
        conclusion = (LinConstraint((0.0,) * n, out1, "<=", t.u_center),)
    elif kind == 3:
        premise = (LinConstraint(line, (0.0,), ">=", -ystar),
                   LinConstraint(line, (0.0,), "<=", ystar),
                   LinConstraint(_in_vec(n, **{"3": 1.0}), (0.0,), ">=", t.pitch_lo),
                   LinConstraint(_in_vec(n, **{"3": 1.0}), (0.0,), "<=", t.pitch_hi))
        conclusion = (LinConstraint((0.0,) * n, out1, ">=", t.u_lo),
                      LinConstraint((0.0,) * n, out1, "<=", t.u_hi))
    elif kind == 4:
        premise = (LinConstraint(line, (0.0,), ">=", 0.0),
                   LinConstraint(line, (0.0,), "<=", ystar),
                   LinConstraint(_in_vec(n, **{"2": 1.0}), (0.0,), "<=", t.x3_max),
                   LinConstraint(_in_vec(n, **{"1": 1.0}), (0.0,), "<=", t.x2_max))
        conclusion = (LinConstraint((0.0,) * n, out1, "<=", t.u_center),)
    else:
        raise ValueError("kind must be 1..4")
    return PropertySpec(f"property{kind}", box, premise, conclusion,
                        {"ystar": ystar, "kind": kind})


def encode_robustness(net: Network, x0, epsilon: float, lstar: float,
                      box) -> PropertySpec:
    """Output stays within L*/epsilon of f(x0) on the epsilon-ball around x0.

    f(x0) is evaluated concretely and folded into the conclusion constants
    (the doubled-network formulation with one copy pinned).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    f0 = mlp.forward(net, x0)
    bound = lstar / epsilon
    ball = tuple((max(box[i][0], x0[i] - epsilon), min(box[i][1], x0[i] + epsilon))
                 for i in range(n))
    conclusion = (LinConstraint((0.0,) * n, (1.0,), "<=", f0 + bound),
                  LinConstraint((0.0,) * n, (1.0,), ">=", f0 - bound))
    return PropertySpec("robustness", ball, (), conclusion,
                        {"epsilon": epsilon, "lstar": lstar, "f0": f0})


def encode_robustness_doubled(net: Network, x0, epsilon: float, lstar: float,
                              box) -> PropertySpec:
    """Same query through an explicitly doubled network: copy A ranges over the
    ball, copy B is pinned at x0, and the conclusion bounds out_A - out_B."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    bound = lstar / epsilon
    ball = tuple((max(box[i][0], x0[i] - epsilon), min(box[i][1], x0[i] + epsilon))
                 for i in range(n))
    pinned = tuple((float(v), float(v)) for v in x0)
    conclusion = (LinConstraint((0.0,) * (2 * n), (1.0, -1.0), "<=", bound),
                  LinConstraint((0.0,) * (2 * n), (1.0, -1.0), ">=", -bound))
    return PropertySpec("robustness_doubled", ball + pinned, (), conclusion,
                        {"epsilon": epsilon, "lstar": lstar})


# ---------------------------------------------------------------------------
# interval reasoning

def tighten_box(box, premise, passes: int = 8):
    """Interval-consistency contraction of the box under the premise rows.

    Returns (lo, hi, empty).
    """
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    rows = []
    for c in premise:
        for ic, _, rhs in c.as_leq():
            rows.append((np.asarray(ic), rhs))
    for _ in range(passes):
        changed = False
        for a, rhs in rows:
            mins = np.where(a > 0, a * lo, a * hi)
            total = mins.sum()
            for i in np.flatnonzero(a):
                rest = total - mins[i]
                if a[i] > 0:
                    new_hi = (rhs - rest) / a[i]
                    if new_hi < hi[i] - 1e-15:
                        hi[i] = new_hi
                        changed = True
                else:
                    new_lo = (rhs - rest) / a[i]
                    if new_lo > lo[i] + 1e-15:
                        lo[i] = new_lo
                        changed = True
            if (lo > hi + 1e-12).any():
                return lo, hi, True
            mins = None
        if not changed:
            break
    return lo, hi, (lo > hi + 1e-12).any()


def _relu_layers(net: Network):
    return [i for i, l in enumerate(net.layers) if l.act == "relu"]


def interval_bounds(net: Network, box, premise=(), phases=None):
    """Sound pre-activation intervals per layer under branching decisions.

    phases maps (layer, idx) -> 0 (forced inactive) or 1 (forced active).
    Returns dict with keys: pre (list of (lo, hi) per layer), status (list of
    per-neuron 'A'/'I'/'U' for relu layers, None otherwise), box (tightened
    lo, hi), empty (bool).
    """
    phases = phases or {}
    lo, hi, empty = tighten_box(box, premise)
    if empty:
        return {"pre": [], "status": [], "box": (lo, hi), "empty": True}
    pre = []
    status = []
    a_lo, a_hi = lo, hi
    for li, layer in enumerate(net.layers):
        c = 0.5 * (a_lo + a_hi)
        r = 0.5 * (a_hi - a_lo)
        pc = layer.w @ c + layer.b
        pr = np.abs(layer.w) @ r
        p_lo, p_hi = pc - pr, pc + pr
        pre.append((p_lo, p_hi))
        if layer.act == "relu":
            st = []
            n_lo = np.empty_like(p_lo)
            n_hi = np.empty_like(p_hi)
            for j in range(p_lo.shape[0]):
                forced = phases.get((li, j))
                if forced == 1:
                    if p_hi[j] < -1e-12:
                        return {"pre": pre, "status": status, "box": (lo, hi),
                                "empty": True}
                    st.append("A")
                    n_lo[j], n_hi[j] = max(p_lo[j], 0.0), max(p_hi[j], 0.0)
                elif forced == 0:
                    if p_lo[j] > 1e-12:
                        return {"pre": pre, "status": status, "box": (lo, hi),
                                "empty": True}
                    st.append("I")
                    n_lo[j] = n_hi[j] = 0.0
                elif p_lo[j] >= 0.0:
                    st.append("A")
                    n_lo[j], n_hi[j] = p_lo[j], p_hi[j]
                elif p_hi[j] <= 0.0:
                    st.append("I")
                    n_lo[j] = n_hi[j] = 0.0
                else:
                    st.append("U")
                    n_lo[j], n_hi[j] = 0.0, p_hi[j]
            status.append(st)
            a_lo, a_hi = n_lo, n_hi
        else:
            status.append(None)
            a_lo, a_hi = p_lo, p_hi
    return {"pre": pre, "status": status, "box": (lo, hi), "empty": False}


# ---------------------------------------------------------------------------
# LP encoding of one branch-and-bound node

class _NodeLp:
    """Affine encoding of the network under the node's neuron statuses."""

    def __init__(self, net: Network, info, phases):
        self.net = net
        lo, hi = info["box"]
        self.n_in = lo.shape[0]
        unstable = []
        for li, st in enumerate(info["status"]):
            if st is None:
                continue
            for j, s in enumerate(st):
                if s == "U":
                    unstable.append((li, j))
        self.unstable = unstable
        self.z_of = {nz: self.n_in + k for k, nz in enumerate(unstable)}
        nv = self.n_in + len(unstable)
        self.nv = nv

        self.var_lo = np.concatenate([lo, np.zeros(len(unstable))])
        z_hi = [max(info["pre"][li][1][j], 0.0) for li, j in unstable]
        self.var_hi = np.concatenate([hi, np.array(z_hi)])

        self.rows_a = []
        self.rows_rel = []
        self.rows_b = []

        # network structure
        coefs = np.zeros((self.n_in, nv))
        consts = np.zeros(self.n_in)
        for i in range(self.n_in):
            coefs[i, i] = 1.0
        for li, layer in enumerate(net.layers):
            p_coefs = layer.w @ coefs
            p_consts = layer.w @ consts + layer.b
            if layer.act == "id":
                coefs, consts = p_coefs, p_consts
                continue
            p_lo, p_hi = info["pre"][li]
            st = info["status"][li]
            n_coefs = np.zeros_like(p_coefs)
            n_consts = np.zeros(p_consts.shape[0])
            for j, s in enumerate(st):
                forced = phases.get((li, j))
                if s == "A":
                    if forced == 1:
                        self._add(p_coefs[j], ">=", -p_consts[j])
                    n_coefs[j] = p_coefs[j]
                    n_consts[j] = p_consts[j]
                elif s == "I":
                    if forced == 0:
                        self._add(p_coefs[j], "<=", -p_consts[j])
                    # output already zero
                else:
                    z = self.z_of[(li, j)]
                    ez = np.zeros(nv)
                    ez[z] = 1.0
                    # z >= pre
                    self._add(ez - p_coefs[j], ">=", p_consts[j])
                    # z <= lam * (pre - l)
                    l, u = p_lo[j], p_hi[j]
                    lam = u / (u - l)
                    self._add(ez - lam * p_coefs[j], "<=", lam * (p_consts[j] - l))
                    n_coefs[j] = ez
                    n_consts[j] = 0.0
            coefs, consts = n_coefs, n_consts
        self.out_coefs = coefs
        self.out_consts = consts

    def _add(self, a, rel, b):
        self.rows_a.append(np.asarray(a, dtype=float))
        self.rows_rel.append(rel)
        self.rows_b.append(float(b))

    def constraint_expr(self, c: LinConstraint):
        vec = np.zeros(self.nv)
        vec[:self.n_in] = c.in_coef
        vec = vec + np.asarray(c.out_coef) @ self.out_coefs
        const = float(np.asarray(c.out_coef) @ self.out_consts)
        return vec, const

    def solve_negation(self, premise, conclusion: LinConstraint):
        """Maximize violation of `conclusion` subject to node + premise rows.

        Returns (lp_solution, violation, point) or (None, None, None) when the
        relaxation is infeasible.
        """
        rows_a = list(self.rows_a)
        rows_rel = list(self.rows_rel)
        rows_b = list(self.rows_b)
        for c in premise:
            for ic, _, rhs in c.as_leq():
                vec = np.zeros(self.nv)
                vec[:self.n_in] = ic
                rows_a.append(vec)
                rows_rel.append("<=")
                rows_b.append(rhs)
        vec, const = self.constraint_expr(conclusion)
        if conclusion.rel == "<=":
            # violation = expr - rhs; negation requires expr >= rhs
            rows_a.append(vec); rows_rel.append(">="); rows_b.append(conclusion.rhs - const)
            objective = vec
            off = const - conclusion.rhs
        elif conclusion.rel == ">=":
            rows_a.append(vec); rows_rel.append("<="); rows_b.append(conclusion.rhs - const)
            objective = -vec
            off = conclusion.rhs - const
        else:
            raise ValueError("equality conclusions must be expanded before solving")
        sol = lpmod.solve_lp(np.array(rows_a), rows_rel, np.array(rows_b),
                             self.var_lo, self.var_hi, objective=objective)
        if not sol.feasible:
            return None, None, None
        return sol, sol.objective + off, sol.x[:self.n_in]


def _expand_conclusions(conclusion):
    out = []
    for c in conclusion:
        if c.rel == "=":
            out.append(LinConstraint(c.in_coef, c.out_coef, "<=", c.rhs))
            out.append(LinConstraint(c.in_coef, c.out_coef, ">=", c.rhs))
        else:
            out.append(c)
    return out


def constraint_value(c: LinConstraint, x, y) -> float:
    yv = np.atleast_1d(y)
    out = float(np.dot(c.out_coef, yv)) if yv.size else 0.0
    return float(np.dot(c.in_coef, x)) + out


def constraint_violation(c: LinConstraint, x, y) -> float:
    v = constraint_value(c, x, y)
    if c.rel == "<=":
        return v - c.rhs
    if c.rel == ">=":
        return c.rhs - v
    return abs(v - c.rhs)


def premise_holds(spec: PropertySpec, x, tol: float = REPLAY_TOL) -> bool:
    for lo_hi, xi in zip(spec.input_box, x):
        if xi < lo_hi[0] - tol or xi > lo_hi[1] + tol:
            return False
    return all(constraint_violation(c, x, ()) <= tol for c in spec.premise)


def lp_feasible(constraints, box):
    """Feasibility of input-space constraints over a box (spec surface).

    Returns an LpSolution whose x is a satisfying input point.
    """
    rows_a, rows_rel, rows_b = [], [], []
    n = len(box)
    for c in constraints:
        for ic, oc, rhs in c.as_leq():
            if np.any(np.asarray(oc) != 0.0):
                raise ValueError("lp_feasible handles input-space constraints only")
            rows_a.append(ic)
            rows_rel.append("<=")
            rows_b.append(rhs)
    lo = [b[0] for b in box]
    hi = [b[1] for b in box]
    if not rows_a:
        rows_a = np.zeros((0, n))
    return lpmod.solve_lp(np.array(rows_a), rows_rel, np.array(rows_b), lo, hi)


def bab_verify(net: Network, spec: PropertySpec, budget: Budget = Budget()) -> Verdict:
    """Complete branch-and-bound verification of spec on net."""
    if net.n_relu > MAX_RELUS:
        raise ValueError(f"network has {net.n_relu} ReLUs; verifier accepts <= {MAX_RELUS}")
    if net.n_in != spec.n_in:
        raise ValueError("spec input arity does not match network")
    t0 = time.perf_counter()
    stats = {"nodes": 0, "lp": 0}

    conclusions = _expand_conclusions(spec.conclusion)

    # vacuity: premise inconsistent with the box
    feas = lp_feasible(spec.premise, spec.input_box)
    stats["lp"] += 1
    if not feas.feasible:
        return Verdict("verified", vacuous=True, nodes=0, lp_calls=stats["lp"],
                       seconds=time.perf_counter() - t0)

    # DFS over phase assignments; each entry carries the conclusions still open
    stack = [({}, list(range(len(conclusions))))]
    while stack:
        if stats["nodes"] >= budget.max_nodes or \
           time.perf_counter() - t0 > budget.max_seconds:
            return Verdict("timeout", nodes=stats["nodes"], lp_calls=stats["lp"],
                           seconds=time.perf_counter() - t0)
        phases, pending = stack.pop()
        stats["nodes"] += 1
        info = interval_bounds(net, spec.input_box, spec.premise, phases)
        if info["empty"]:
            continue
        node = _NodeLp(net, info, phases)
        still_open = []
        split_needed = False
        for ci in pending:
            c = conclusions[ci]
            sol, viol, x = node.solve_negation(spec.premise, c)
            stats["lp"] += 1
            if sol is None or viol <= LP_MARGIN:
                continue   # conclusion holds on this node
            y = mlp.forward_batch(net, x[None, :])[0]
            if premise_holds(spec, x):
                worst = max(constraint_violation(cc, x, y) for cc in conclusions)
                if worst > REPLAY_TOL:
                    return Verdict("falsified", witness=x,
                                   witness_outputs=np.atleast_1d(y),
                                   nodes=stats["nodes"], lp_calls=stats["lp"],
                                   seconds=time.perf_counter() - t0)
            if not node.unstable:
                # exact leaf: LP optimum replays below tolerance, cell is safe
                continue
            still_open.append(ci)
            split_needed = True
        if split_needed:
            li, j = _pick_split(info, phases)
            active = dict(phases)
            active[(li, j)] = 1
            inactive = dict(phases)
            inactive[(li, j)] = 0
            # inactive child explored first (deterministic DFS order)
            stack.append((active, still_open))
            stack.append((inactive, still_open))
    return Verdict("verified", nodes=stats["nodes"], lp_calls=stats["lp"],
                   seconds=time.perf_counter() - t0)


def _pick_split(info, phases):
    """Widest unstable pre-activation interval containing zero; ties break to
    the lowest layer then lowest index."""
    best = None
    best_width = -1.0
    for li, st in enumerate(info["status"]):
        if st is None:
            continue
        p_lo, p_hi = info["pre"][li]
        for j, s in enumerate(st):
            if s != "U" or (li, j) in phases:
                continue
            width = p_hi[j] - p_lo[j]
            if width > best_width + 1e-15:
                best_width = width
                best = (li, j)
    if best is None:
        raise RuntimeError("split requested with no unstable neuron")
    return best


# ---------------------------------------------------------------------------
# critical-ystar search and the robustness grid

@dataclass
class CriticalResult:
    value: float | None            # None = Failed
    flagged_timeout: bool = False
    vacuous: bool = False
    probes: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.value is None


def find_critical_ystar(net: Network, kind: int, box,
                        resolution: float = 1.0, search_max: float = 50.0,
                        thresholds: PropertyThresholds = PropertyThresholds(),
                        budget: Budget = Budget()) -> CriticalResult:
    """Critical threshold distance for one trajectory property.

    Kinds 1/2/4: smallest verified ystar (premise shrinks as ystar grows).
    Kind 3: largest verified ystar (premise grows), Failed when none verifies.
    Integer-grid sweep locates the transition, bisection refines it to
    `resolution`. Timeout probes flag the result as a bound.
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    res = CriticalResult(None)

    def probe(y):
        v = bab_verify(net, encode_property(kind, y, box, thresholds), budget)
        if v.status == "timeout":
            res.flagged_timeout = True
        res.probes.append((y, v.status, v.vacuous))
        return v

    if kind in (1, 2, 4):
        hi = None
        prev = 0.0
        y = 0.0
        while y <= search_max + 1e-12:
            v = probe(y)
            if v.verified:
                hi = y
                hi_vac = v.vacuous
                break
            prev = y
            y = y + max(1.0, resolution)
        if hi is None:
            return res
        lo = prev if hi > 0.0 else 0.0
        while hi - lo > resolution and hi > 0.0:
            mid = 0.5 * (lo + hi)
            v = probe(mid)
            if v.verified:
                hi, hi_vac = mid, v.vacuous
            else:
                lo = mid
        res.value = hi
        res.vacuous = hi_vac
        return res

    if kind == 3:
        v = probe(resolution)
        if not v.verified or v.vacuous:
            return res
        lo, lo_vac = resolution, v.vacuous
        y = max(1.0, resolution)
        while y <= search_max + 1e-12:
            v = probe(y)
            if v.verified and not v.vacuous:
                lo, lo_vac = y, v.vacuous
                y += max(1.0, resolution)
            else:
                break
        hi = min(y, search_max)
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            v = probe(mid)
            if v.verified and not v.vacuous:
                lo, lo_vac = mid, v.vacuous
            else:
                hi = mid
        res.value = lo
        res.vacuous = lo_vac
        return res

    raise ValueError("kind must be 1..4")


@dataclass
class SweepCell:
    rate: float | None            # None = absent (budget ran out)
    n_verified: int = 0
    n_done: int = 0
    seconds: float = 0.0
    timeouts: int = 0


def robustness_sweep(net: Network, X: np.ndarray,
                     eps_list=(1e-5, 1e-4, 1e-3, 1e-2),
                     lstar_list=(1e-5, 1e-4, 1e-3, 1e-2),
                     box=None, n_points: int = 100,
                     per_query_budget: Budget = Budget(max_nodes=20000, max_seconds=5.0),
                     cell_budget_s: float = 60.0) -> dict:
    """Verification success rate per (epsilon, L*) cell over dataset points.

    A cell is marked absent (rate None) when its cumulative time exceeds
    cell_budget_s before n_points queries complete.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if box is None:
        box = tuple((float(X[:, i].min()), float(X[:, i].max()))
                    for i in range(X.shape[1]))
    quota = min(n_points, X.shape[0])
    grid = {}
    for eps in eps_list:
        for lstar in lstar_list:
            cell = SweepCell(rate=None)
            t0 = time.perf_counter()
            for k in range(quota):
                if time.perf_counter() - t0 > cell_budget_s:
                    break
                spec = encode_robustness(net, X[k], eps, lstar, box)
                v = bab_verify(net, spec, per_query_budget)
                cell.n_done += 1
                if v.verified:
                    cell.n_verified += 1
                elif v.status == "timeout":
                    cell.timeouts += 1
            cell.seconds = time.perf_counter() - t0
            if cell.n_done == quota:
                cell.rate = cell.n_verified / quota
            grid[(eps, lstar)] = cell
    return grid


def results_to_csv(rows, path):
    """rows: iterable of (property, param, Verdict)."""
    with open(path, "w") as fh:
        fh.write("property,param,verdict,vacuous,witness,nodes,lp_calls,seconds\n")
        for name, param, v in rows:
            wit = "" if v.witness is None else \
                ";".join(format(x, ".17g") for x in v.witness)
            fh.write(f"{name},{param},{v.status},{int(v.vacuous)},{wit},"
                     f"{v.nodes},{v.lp_calls},{format(v.seconds, '.3f')}\n")
