"""Batch front-end: simulate -> dataset -> train -> verify -> reach.

Configuration comes from an optional JSON file plus flags (flags win). Every
run writes a manifest listing the produced artifacts. Exit codes: 0 success,
1 usage error, 2 falsified / goal failure, 3 timeout or unknown.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
import time
import warnings

import numpy as np

from . import __version__, mlp, robust
from .aeromodel import PlateParams, State, simulate_open_loop
from .closedloop import (DEFAULT_GAINS, NetworkController, PidController,
                         PidGains, SimConfig, dataset_from_csv, dataset_to_csv,
                         fit_norm, generate_dataset, rows_to_arrays,
                         simulate_closed_loop)
from .reach import ReachConfig, goal_check, reach_full, reach_to_csv
from .svgplot import plot_reach, plot_trajectories
from .verifier import (Budget, PropertySpec, bab_verify, encode_property,
                       find_critical_ystar, results_to_csv, robustness_sweep)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FALSIFIED = 2
EXIT_UNKNOWN = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_manifest(path, command, args_ns, inputs, outputs, wall):
    doc = {
        "command": command,
        "config": getattr(args_ns, "config", None),
        "seed": getattr(args_ns, "seed", None),
        "args": {k: v for k, v in sorted(vars(args_ns).items())
                 if k not in ("func",)},
        "inputs": list(inputs),
        "outputs": list(outputs),
        "version": __version__,
        "wall_time_s": wall,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def _apply_config(args):
    """Fill argparse Nones from the JSON config (flags win), then defaults."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            conf = json.load(fh)
        section = conf.get(args.command, conf)
        for key, val in section.items():
            if getattr(args, key, None) is None and hasattr(args, key):
                setattr(args, key, val)
    return args


def _d(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


def _load_net(path):
    return mlp.load(path)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args):
    t0 = time.perf_counter()
    p = PlateParams()
    t_end = float(_d(args, "t_end", 20.0))
    dt = float(_d(args, "dt", 0.01))
    x6_0 = float(_d(args, "x6_start", 2.86))
    s0 = State(1.0, 0.0, 0.0, 0.0, 0.0, x6_0)
    out = _d(args, "out", "trace.csv")
    svg = _d(args, "svg", "trace.svg")
    inputs = []
    if args.mode == "open":
        e_x = float(_d(args, "ex", 0.187))
        tr = simulate_open_loop(s0, e_x, p, t_end, dt, strict=args.strict)
    else:
        cfg = SimConfig(t_end=t_end, dt_model=dt,
                        dt_control=float(_d(args, "dt_control", 0.5)),
                        n_sims=1, x6_starts=(x6_0,), record_skip=0)
        if args.net:
            ctrl = NetworkController(_load_net(args.net))
            inputs.append(args.net)
        else:
            ctrl = PidController(DEFAULT_GAINS, cfg.dt_control)
        tr = simulate_closed_loop(s0, ctrl, cfg, p, strict=args.strict)
    tr.to_csv(out)
    plot_trajectories([tr], svg, title=f"{args.mode}-loop trajectory",
                      goal_ystar=2.0)
    _write_manifest(out + ".manifest.json", "simulate", args, inputs,
                    [out, svg], time.perf_counter() - t0)
    print(f"wrote {out} ({len(tr)} samples) and {svg}")
    return EXIT_OK


def cmd_gen_data(args):
    t0 = time.perf_counter()
    p = PlateParams()
    cfg = SimConfig(record_skip=int(_d(args, "record_skip", 16)))
    gains = PidGains(kp=float(_d(args, "kp", DEFAULT_GAINS.kp)),
                     ki=float(_d(args, "ki", DEFAULT_GAINS.ki)),
                     kd=float(_d(args, "kd", DEFAULT_GAINS.kd)))
    rows = generate_dataset(cfg, gains, p)
    out = _d(args, "out", "dataset.csv")
    norm_out = _d(args, "norm_out", "norm.json")
    dataset_to_csv(rows, out)
    spec = fit_norm(rows)
    with open(norm_out, "w") as fh:
        fh.write(spec.to_json())
    _write_manifest(out + ".manifest.json", "gen-data", args, [],
                    [out, norm_out], time.perf_counter() - t0)
    print(f"wrote {len(rows)} rows to {out}; normalization to {norm_out}")
    return EXIT_OK


def _train_common(args, adversarial: bool):
    t0 = time.perf_counter()
    data = _d(args, "data", "dataset.csv")
    rows = dataset_from_csv(data)
    spec = fit_norm(rows)
    X, Y = rows_to_arrays(rows, spec)
    seed = int(_d(args, "seed", 0))
    epochs = int(_d(args, "epochs", 2000))
    lr = float(_d(args, "lr", 0.02))
    batch = int(_d(args, "batch_size", 32))
    net0 = mlp.init_network(seed=seed, norm=spec)
    if adversarial:
        rcfg = robust.RobustTrainConfig(
            attack=robust.AttackConfig(
                epsilon=float(_d(args, "epsilon", 0.01)),
                steps=int(_d(args, "pgd_steps", 10)),
                restarts=int(_d(args, "restarts", 2))),
            lambda_lip=float(_d(args, "lambda_lip", 0.01)),
            epochs=epochs, lr=lr, seed=seed, batch_size=batch)
        net = robust.train_adversarial(net0, X, Y, rcfg)
    else:
        net = mlp.train(net0, X, Y, epochs=epochs, lr=lr, seed=seed,
                        batch_size=batch)
    net = mlp.Network(net.layers, norm=spec, meta=net.meta)
    out = _d(args, "out", "net-adv.json" if adversarial else "net.json")
    mlp.save(net, out)
    outputs = [out]
    if getattr(args, "embedded_out", None):
        mlp.save(mlp.embed_normalization(net), args.embedded_out)
        outputs.append(args.embedded_out)
    _write_manifest(out + ".manifest.json",
                    "train-adv" if adversarial else "train", args, [data],
                    outputs, time.perf_counter() - t0)
    print(f"trained {'adversarial' if adversarial else 'naive'} network -> {out} "
          f"(train RMSE {net.meta['train_rmse']:.5f})")
    return EXIT_OK


def cmd_train(args):
    return _train_common(args, adversarial=False)


def cmd_train_adv(args):
    return _train_common(args, adversarial=True)


def _verdict_exit(status: str) -> int:
    return {"verified": EXIT_OK, "falsified": EXIT_FALSIFIED,
            "timeout": EXIT_UNKNOWN}[status]


def _box_from_net(net):
    if net.norm is None:
        raise UsageError("network carries no normalization bounds; "
                         "provide --spec with an explicit input box")
    return tuple(zip(net.norm.in_min, net.norm.in_max))


def cmd_verify(args):
    t0 = time.perf_counter()
    if not args.net:
        raise UsageError("--net is required")
    net = _load_net(args.net)
    inputs = [args.net]
    budget = Budget(max_seconds=float(_d(args, "budget_s", 60.0)))
    if args.spec:
        with open(args.spec) as fh:
            spec = PropertySpec.from_json(fh.read())
        inputs.append(args.spec)
        target = mlp.embed_normalization(net) if net.norm is not None else net
        param = spec.params.get("ystar", "")
    else:
        if args.prop is None:
            raise UsageError("--property (1..4) or --spec is required")
        ystar = float(_d(args, "ystar", 2.0))
        box = _box_from_net(net)
        spec = encode_property(int(args.prop), ystar, box)
        target = mlp.embed_normalization(net)
        param = ystar
    v = bab_verify(target, spec, budget)
    out = _d(args, "out", "verify.csv")
    results_to_csv([(spec.name, param, v)], out)
    _write_manifest(out + ".manifest.json", "verify", args, inputs, [out],
                    time.perf_counter() - t0)
    extra = " (vacuous premise)" if v.vacuous else ""
    print(f"{spec.name}: {v.status}{extra} nodes={v.nodes} lp={v.lp_calls} "
          f"[{v.seconds:.2f}s] -> {out}")
    return _verdict_exit(v.status)


def cmd_critical_ystar(args):
    t0 = time.perf_counter()
    if not args.net:
        raise UsageError("--net is required")
    net = _load_net(args.net)
    target = mlp.embed_normalization(net)
    box = _box_from_net(net)
    kinds = [int(k) for k in str(_d(args, "properties", "1,2,3,4")).split(",")]
    resolution = float(_d(args, "resolution", 1.0))
    budget = Budget(max_seconds=float(_d(args, "budget_s", 30.0)))
    out = _d(args, "out", "critical-ystar.csv")
    lines = ["property,critical_ystar,failed,vacuous,timeout_flag"]
    for kind in kinds:
        res = find_critical_ystar(target, kind, box, resolution=resolution,
                                  search_max=float(_d(args, "search_max", 50.0)),
                                  budget=budget)
        val = "" if res.failed else format(res.value, ".17g")
        lines.append(f"{kind},{val},{int(res.failed)},{int(res.vacuous)},"
                     f"{int(res.flagged_timeout)}")
        shown = "Failed" if res.failed else f"{res.value:g}"
        print(f"property {kind}: critical ystar = {shown}"
              + (" (vacuous)" if res.vacuous else "")
              + (" [timeout bound]" if res.flagged_timeout else ""))
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_manifest(out + ".manifest.json", "critical-ystar", args,
                    [args.net], [out], time.perf_counter() - t0)
    return EXIT_OK


def cmd_robust_sweep(args):
    t0 = time.perf_counter()
    if not args.net:
        raise UsageError("--net is required")
    if not args.data:
        raise UsageError("--data is required")
    net = _load_net(args.net)
    if net.norm is None:
        raise UsageError("robustness sweep needs a network with normalization")
    rows = dataset_from_csv(args.data)
    X, _ = rows_to_arrays(rows, net.norm)
    core = mlp.Network(net.layers, norm=None, meta=dict(net.meta))
    eps_list = [float(v) for v in str(_d(args, "eps_list", "1e-5,1e-4,1e-3,1e-2")).split(",")]
    l_list = [float(v) for v in str(_d(args, "lstar_list", "1e-5,1e-4,1e-3,1e-2")).split(",")]
    sweep_kw = dict(
        n_points=int(_d(args, "points", 100)),
        per_query_budget=Budget(max_seconds=float(_d(args, "query_budget_s", 5.0))),
        cell_budget_s=float(_d(args, "cell_budget_s", 60.0)))
    jobs = int(_d(args, "jobs", 1))
    if jobs > 1:
        cells = [(e, l) for e in eps_list for l in l_list]
        grid = {}
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(_sweep_cell, core, X, e, l, sweep_kw): (e, l)
                    for e, l in cells}
            for fut in concurrent.futures.as_completed(futs):
                grid[futs[fut]] = fut.result()
    else:
        grid = robustness_sweep(core, X, eps_list, l_list, **sweep_kw)
    out = _d(args, "out", "robust-sweep.csv")
    with open(out, "w") as fh:
        fh.write("epsilon,lstar,rate,n_verified,n_done,seconds,timeouts\n")
        for (eps, ls), cell in grid.items():
            rate = "" if cell.rate is None else format(cell.rate, ".4f")
            fh.write(f"{eps},{ls},{rate},{cell.n_verified},{cell.n_done},"
                     f"{cell.seconds:.2f},{cell.timeouts}\n")
    _write_manifest(out + ".manifest.json", "robust-sweep", args,
                    [args.net, args.data], [out], time.perf_counter() - t0)
    print(f"wrote {out}")
    for eps in eps_list:
        row = []
        for ls in l_list:
            cell = grid[(eps, ls)]
            row.append(" -  " if cell.rate is None else f"{100*cell.rate:4.0f}")
        print(f"eps={eps:g}: " + " ".join(row))
    return EXIT_OK


def _sweep_cell(core, X, eps, lstar, kw):
    grid = robustness_sweep(core, X, (eps,), (lstar,), **kw)
    return grid[(eps, lstar)]


def _reach_cell(payload):
    idx, cell, net, p, cfg = payload
    sub = dataclasses.replace(cfg, n_splits=1)
    res = reach_full(cell, net, p, sub)
    branch = res.branches[0]
    branch.index = idx
    return branch


def _reach_parallel(x6_interval, net, p, cfg, jobs):
    """Initial cells distributed over processes; deterministic merge by index."""
    from .reach import ReachResult
    from .zono import zono_hull
    edges = np.linspace(x6_interval[0], x6_interval[1], cfg.n_splits + 1)
    payloads = [(i, (float(edges[i]), float(edges[i + 1])), net, p, cfg)
                for i in range(cfg.n_splits)]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        branches = list(pool.map(_reach_cell, payloads))
    branches.sort(key=lambda b: b.index)
    surv = [b for b in branches if not b.failed]
    final_hull = None
    if surv:
        los, his = zip(*(zono_hull(b.checkpoints[-1]) for b in surv))
        final_hull = (np.min(np.array(los), axis=0), np.max(np.array(his), axis=0))
    return ReachResult(branches, cfg, final_hull, any(b.failed for b in branches))


def cmd_reach(args):
    t0 = time.perf_counter()
    if not args.net:
        raise UsageError("--net is required")
    net = _load_net(args.net)
    target = mlp.embed_normalization(net) if net.norm is not None else net
    cfg = ReachConfig(dt=float(_d(args, "dt", 0.01)),
                      t_end=float(_d(args, "t_end", 20.0)),
                      n_splits=int(_d(args, "splits", 16)),
                      max_order=float(_d(args, "max_order", 20.0)),
                      relu_mode=str(_d(args, "relu_mode", "zonotope")))
    x6_lo = float(_d(args, "x6_lo", 1.43))
    x6_hi = float(_d(args, "x6_hi", 4.29))
    jobs = int(_d(args, "jobs", 1))
    if jobs > 1 and cfg.width_resplit is None and cfg.n_splits > 1:
        result = _reach_parallel((x6_lo, x6_hi), target, PlateParams(), cfg, jobs)
    else:
        result = reach_full((x6_lo, x6_hi), target, PlateParams(), cfg)
    ystar = float(_d(args, "goal_ystar", 2.0))
    verdict = goal_check(result, ystar)
    out = _d(args, "out", "reach.csv")
    svg = _d(args, "svg", "reach.svg")
    reach_to_csv(result, out)
    plot_reach(result, svg, title="reachable sets", goal_ystar=ystar)
    _write_manifest(out + ".manifest.json", "reach", args, [args.net],
                    [out, svg], time.perf_counter() - t0)
    n_fail = sum(1 for b in result.branches if b.failed)
    print(f"reach: {len(result.branches)} branches ({n_fail} failed); "
          f"goal |x6+x5| <= {ystar:g}: {verdict.status}"
          + (f" (band [{verdict.band_min:.3f}, {verdict.band_max:.3f}])"
             if verdict.band_max is not None else ""))
    if result.inconclusive:
        for b in result.branches:
            if b.failed:
                print(f"  branch {b.index} x6 in [{b.x6_cell[0]:.3f}, {b.x6_cell[1]:.3f}]"
                      f" failed at cycle {b.fail_cycle}: {b.fail_reason}")
                break
    return {"success": EXIT_OK, "failure": EXIT_FALSIFIED,
            "unknown": EXIT_UNKNOWN}[verdict.status]


def build_parser() -> _Parser:
    ap = _Parser(prog="seedwing", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (flags win)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--strict", action="store_true")

    sp = sub.add_parser("simulate", help="open- or closed-loop trajectory")
    sp.add_argument("--mode", choices=("open", "closed"), default="open")
    sp.add_argument("--ex", type=float, help="fixed actuation (open loop)")
    sp.add_argument("--net", help="network controller (closed loop)")
    sp.add_argument("--x6-start", dest="x6_start", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--dt-control", dest="dt_control", type=float)
    sp.add_argument("--out")
    sp.add_argument("--svg")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("gen-data", help="behaviour-cloning dataset from the PID teacher")
    sp.add_argument("--kp", type=float)
    sp.add_argument("--ki", type=float)
    sp.add_argument("--kd", type=float)
    sp.add_argument("--record-skip", dest="record_skip", type=int)
    sp.add_argument("--out")
    sp.add_argument("--norm-out", dest="norm_out")
    common(sp)
    sp.set_defaults(func=cmd_gen_data)

    for name, fn in (("train", cmd_train), ("train-adv", cmd_train_adv)):
        sp = sub.add_parser(name)
        sp.add_argument("--data")
        sp.add_argument("--out")
        sp.add_argument("--embedded-out", dest="embedded_out")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--batch-size", dest="batch_size", type=int)
        if name == "train-adv":
            sp.add_argument("--epsilon", type=float)
            sp.add_argument("--pgd-steps", dest="pgd_steps", type=int)
            sp.add_argument("--restarts", type=int)
            sp.add_argument("--lambda-lip", dest="lambda_lip", type=float)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("verify", help="verify one property")
    sp.add_argument("--net")
    sp.add_argument("--property", dest="prop", type=int, choices=(1, 2, 3, 4))
    sp.add_argument("--ystar", type=float)
    sp.add_argument("--spec", help="PropertySpec JSON file")
    sp.add_argument("--budget-s", dest="budget_s", type=float)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("critical-ystar", help="critical threshold per property")
    sp.add_argument("--net")
    sp.add_argument("--properties")
    sp.add_argument("--resolution", type=float)
    sp.add_argument("--search-max", dest="search_max", type=float)
    sp.add_argument("--budget-s", dest="budget_s", type=float)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_critical_ystar)

    sp = sub.add_parser("robust-sweep", help="robustness success-rate grid")
    sp.add_argument("--net")
    sp.add_argument("--data")
    sp.add_argument("--eps-list", dest="eps_list")
    sp.add_argument("--lstar-list", dest="lstar_list")
    sp.add_argument("--points", type=int)
    sp.add_argument("--query-budget-s", dest="query_budget_s", type=float)
    sp.add_argument("--cell-budget-s", dest="cell_budget_s", type=float)
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_robust_sweep)

    sp = sub.add_parser("reach", help="closed-loop reachable sets and goal check")
    sp.add_argument("--net")
    sp.add_argument("--splits", type=int)
    sp.add_argument("--goal-ystar", dest="goal_ystar", type=float)
    sp.add_argument("--x6-lo", dest="x6_lo", type=float)
    sp.add_argument("--x6-hi", dest="x6_hi", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--max-order", dest="max_order", type=float)
    sp.add_argument("--relu-mode", dest="relu_mode", choices=("zonotope", "interval"))
    sp.add_argument("--out")
    sp.add_argument("--svg")
    common(sp)
    sp.set_defaults(func=cmd_reach)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        args = _apply_config(args)
        if not getattr(args, "strict", False):
            warnings.simplefilter("ignore")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
