"""Command-line front end.

Subcommands wire the library modules together and write analysis-ready
CSV/JSON files (12 significant digits) plus optional rendered figures.
Exit codes: 0 success, 1 configuration/validation error, 2 a --strict
verdict failed (not certified / violations found).
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import abm, meanfield, monotone, sparse
from .orders import CapacityError, PartialOrder
from .systems import (InvalidParameterError, LinkSpace, SignallingSystem,
                      build, validate)


class ConfigError(Exception):
    pass


def _round12(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _write_atomic(path, text):
    """Write whole files only; a failed run never leaves partial output."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".monosig-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc):
    _write_atomic(path, json.dumps(_round12(doc), indent=2) + "\n")


def write_trajectory(path, traj):
    buf = io.StringIO()
    traj.write_csv(buf)
    _write_atomic(path, buf.getvalue())


def load_system(args) -> SignallingSystem:
    if getattr(args, "system", None):
        try:
            with open(args.system) as fh:
                system = SignallingSystem.from_json_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
            raise ConfigError(f"cannot load system document: {e}")
    elif getattr(args, "builder", None):
        try:
            system = build(args.builder)
        except (InvalidParameterError, ValueError) as e:
            raise ConfigError(str(e))
    else:
        raise ConfigError("one of --builder or --system is required")
    report = validate(system)
    if not report.ok:
        raise ConfigError(f"system fails validation:\n{report}")
    return system


def load_order(args, system) -> PartialOrder:
    if not getattr(args, "order", None):
        raise ConfigError("--order is required for this command")
    try:
        with open(args.order) as fh:
            return PartialOrder.from_json_dict(json.load(fh), system.labels)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(f"cannot load order document: {e}")
    except InvalidParameterError as e:
        raise ConfigError(str(e))


def parse_fractions(text, K, what="--n0"):
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated float list")
    if v.shape != (K,):
        raise ConfigError(f"{what} needs {K} entries, got {v.size}")
    if v.min() < 0 or abs(v.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{what} must be nonnegative and sum to 1")
    return v


def _maybe_plot(args, render):
    if getattr(args, "plot", False):
        if not getattr(args, "out", None):
            raise ConfigError("--plot requires --out")
        from . import plots  # matplotlib import deferred to first use
        fig_path = os.path.splitext(args.out)[0] + ".png"
        render(plots, fig_path)
        print(f"figure written to {fig_path}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_check(args):
    system = load_system(args)
    order = load_order(args, system)
    report = monotone.certify(system, order)
    print(f"verdict: {report.verdict.value}")
    for c in report.conditions:
        print(f"  condition ({c.name}): {'pass' if c.passed else 'FAIL'} "
              f"margin={c.margin:.6g} witness={c.witness}")
    if args.out:
        write_json(args.out, report.to_json_dict(system.labels))
    if args.strict and report.verdict is not monotone.Verdict.CERTIFIED_MONOTONE:
        return 2
    return 0


def cmd_search_order(args):
    system = load_system(args)
    try:
        report = monotone.find_order(system, maxK=args.max_states)
    except CapacityError as e:
        raise ConfigError(str(e))
    print(f"verdict: {report.verdict.value}")
    if report.order is not None:
        edges = report.order.to_json_dict(system.labels)["edges"]
        print("order: " + ", ".join(f"{a} < {b}" for a, b in edges))
    if args.out:
        write_json(args.out, report.to_json_dict(system.labels))
    if args.strict and report.verdict is not monotone.Verdict.CERTIFIED_MONOTONE:
        return 2
    return 0


def cmd_type_c(args):
    system = load_system(args)
    order = load_order(args, system)
    res = monotone.type_c_sampled(system, order, args.samples, args.seed)
    if res.passed:
        print(f"Pass ({args.samples} interior samples)")
        doc = {"result": "Pass", "samples": args.samples, "seed": args.seed}
    else:
        print(f"CounterexamplePoint at n={res.witness_state} "
              f"generator={res.witness_generator} residual={res.residual:.3g}")
        doc = {"result": "CounterexamplePoint",
               "state": res.witness_state.tolist(),
               "generator": res.witness_generator, "residual": res.residual}
    if args.out:
        write_json(args.out, doc)
    if args.strict and not res.passed:
        return 2
    return 0


def cmd_integrate(args):
    system = load_system(args)
    n0 = parse_fractions(args.n0, system.K)
    traj = meanfield.integrate(system, n0, args.t_end, dt=args.dt,
                               record_every=args.record_every)
    term = ", ".join(f"{l}={x:.6g}" for l, x in zip(traj.labels, traj.terminal))
    print(f"terminal state at t={traj.times[-1]:g}: {term}")
    if args.out:
        write_trajectory(args.out, traj)
    _maybe_plot(args, lambda plots, p: plots.plot_trajectory(
        traj, p, title="mean-field trajectory"))
    return 0


def cmd_integrate_sparse(args):
    system = load_system(args)
    ls = LinkSpace(system.K)
    if args.l0:
        l0 = parse_fractions(args.l0, ls.L, "--l0")
    else:
        n0 = parse_fractions(args.n0, system.K)
        l0 = ls.from_node(n0)
    traj = sparse.integrate_sparse(system, args.mean_degree, l0, args.t_end,
                                   dt=args.dt, record_every=args.record_every,
                                   variant=args.related)
    term = ", ".join(f"{l}={x:.6g}" for l, x in zip(traj.labels, traj.terminal))
    print(f"terminal link state at t={traj.times[-1]:g}: {term}")
    if args.out:
        write_trajectory(args.out, traj)
    _maybe_plot(args, lambda plots, p: plots.plot_trajectory(
        traj, p, title="link mean-field trajectory"))
    return 0


def cmd_abm(args):
    system = load_system(args)
    n0 = parse_fractions(args.n0, system.K)
    edges = None
    if args.mean_degree is not None:
        edges = abm.make_er_graph(args.n_agents, args.mean_degree, args.seed)
    if args.runs == 1:
        rng = np.random.default_rng(args.seed)
        spins = abm.spins_from_fractions(n0, args.n_agents,
                                         rng if edges is not None else None)
        pop = abm.AgentPopulation(spins, edges, args.seed)
        traj = abm.run(pop, system, args.t_end, args.record_every,
                       selection=args.selection)
        print(f"terminal macrostate: {np.array2string(traj.terminal, precision=4)}")
        if args.out:
            write_trajectory(args.out, traj)
        _maybe_plot(args, lambda plots, p: plots.plot_trajectory(
            traj, p, title="ABM trajectory"))
        return 0
    stats = abm.ensemble(system, n0, args.n_agents, args.t_end,
                         args.record_every, args.runs, args.seed,
                         edges=edges, selection=args.selection)
    if edges is None:
        mf = meanfield.integrate(system, n0, args.t_end, dt=args.dt,
                                 record_every=args.record_every)
    else:
        ls = LinkSpace(system.K)
        mf = sparse.node_trajectory(system, sparse.integrate_sparse(
            system, args.mean_degree, ls.from_node(n0), args.t_end,
            dt=args.dt, record_every=args.record_every, variant=args.related))
    cmp_report = abm.compare(stats, mf)
    print(f"{args.runs} runs; sup deviation from mean field: "
          f"{cmp_report.sup_deviation:.6g} (t={cmp_report.worst_time:g})")
    if args.out:
        mean_traj = meanfield.Trajectory(stats.times, stats.mean, system.labels)
        write_trajectory(args.out, mean_traj)
        doc = stats.to_json_dict()
        doc.update(cmp_report.to_json_dict())
        write_json(os.path.splitext(args.out)[0] + ".summary.json", doc)
    _maybe_plot(args, lambda plots, p: plots.plot_ensemble(
        stats, system.labels, p, meanfield=mf,
        title="ABM ensemble vs mean field"))
    return 0


def cmd_sweep_committed(args):
    system = load_system(args)
    try:
        result = meanfield.sweep_committed(
            system, args.committed, args.q_low, args.q_high, tol=args.tol,
            dt=args.dt, t_end=args.t_end, target=args.target,
            opposing=args.opposing)
    except (InvalidParameterError, meanfield.NoTransitionError) as e:
        raise ConfigError(str(e))
    print(f"qc = {result.qc:.6g} bracket=[{result.bracket[0]:.6g}, "
          f"{result.bracket[1]:.6g}]")
    if args.out:
        write_json(args.out, result.to_json_dict())
    _maybe_plot(args, lambda plots, p: plots.plot_sweep(
        result, p, title="committed-fraction sweep"))
    return 0


def _report_violations(violations, out, strict):
    if violations:
        print(f"{len(violations)} violations; first at pair "
              f"{violations[0].pair}, t={violations[0].time:g}, "
              f"residual={violations[0].residual:.3g}")
    else:
        print("order preserved: no violations")
    if out:
        write_json(out, {"violations": [
            {"pair": v.pair, "time": v.time, "residual": v.residual}
            for v in violations]})
    return 2 if (strict and violations) else 0


def cmd_verify_order(args):
    system = load_system(args)
    order = load_order(args, system)
    violations = meanfield.order_harness(system, order, args.pairs,
                                         args.t_end, args.checkpoints,
                                         args.seed, dt=args.dt)
    return _report_violations(violations, args.out, args.strict)


def cmd_verify_order_sparse(args):
    system = load_system(args)
    order = load_order(args, system)
    violations = sparse.order_harness_sparse(
        system, order, args.mean_degree, args.pairs, args.t_end,
        args.checkpoints, args.seed, dt=args.dt, variant=args.related)
    return _report_violations(violations, args.out, args.strict)


def cmd_equilibria(args):
    system = load_system(args)
    eqs, dropped = meanfield.find_equilibria(system, grid_density=args.grid_density)
    print(f"{len(eqs)} equilibria ({dropped} seeds dropped)")
    for e in eqs:
        state = ", ".join(f"{l}={x:.6g}" for l, x in zip(system.labels, e.state))
        print(f"  [{e.classification}] {state} residual={e.residual:.3g}")
    if args.out:
        write_json(args.out, {"equilibria": [
            {"state": e.state.tolist(), "residual": e.residual,
             "classification": e.classification,
             "eigenvalues": [[z.real, z.imag] for z in e.eigenvalues]}
            for e in eqs], "droppedSeeds": dropped})
    return 0


# ---------------------------------------------------------------------------

def _add_system_args(p):
    p.add_argument("--builder", help="long | kng:K | counterexample, optionally "
                   "+committed:BASE=ALPHA[,...]")
    p.add_argument("--system", help="path to a system JSON document")
    p.add_argument("--out", help="output file path")


def build_parser():
    ap = argparse.ArgumentParser(prog="monosig",
                                 description="monotone signalling-system toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="certify monotonicity with a given order")
    _add_system_args(p)
    p.add_argument("--order", help="path to an order JSON document")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("search-order", help="search for a certifying order")
    _add_system_args(p)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--max-states", type=int, default=6)
    p.set_defaults(fn=cmd_search_order)

    p = sub.add_parser("type-c", help="sampled directional-derivative falsifier")
    _add_system_args(p)
    p.add_argument("--order", help="path to an order JSON document")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_type_c)

    p = sub.add_parser("integrate", help="complete-network mean-field trajectory")
    _add_system_args(p)
    p.add_argument("--n0", required=True, help="initial fractions, comma-separated")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--record-every", type=float, default=0.1)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_integrate)

    p = sub.add_parser("integrate-sparse", help="pairwise-approximation link ODE")
    _add_system_args(p)
    p.add_argument("--n0", help="initial node fractions (product-measure links)")
    p.add_argument("--l0", help="initial link fractions, canonical pair order")
    p.add_argument("--mean-degree", type=float, required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--record-every", type=float, default=0.1)
    p.add_argument("--related", choices=sparse.VARIANTS, default=sparse.DEFAULT_VARIANT)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_integrate_sparse)

    p = sub.add_parser("abm", help="agent-based Monte Carlo runs")
    _add_system_args(p)
    p.add_argument("--n0", required=True)
    p.add_argument("--n-agents", type=int, required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--record-every", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-degree", type=float, default=None,
                   help="Erdos-Renyi mean degree; omit for the complete graph")
    p.add_argument("--selection", choices=abm.SELECTIONS, default="edge_first")
    p.add_argument("--related", choices=sparse.VARIANTS, default=sparse.DEFAULT_VARIANT)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_abm)

    p = sub.add_parser("sweep-committed", help="bisect the committed tipping fraction")
    _add_system_args(p)
    p.add_argument("--committed", required=True, help="committed spin label")
    p.add_argument("--q-low", type=float, default=0.0)
    p.add_argument("--q-high", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--t-end", type=float, default=200.0)
    p.add_argument("--target", default=None, help="pushed opinion label")
    p.add_argument("--opposing", default=None, help="opposing consensus label")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_sweep_committed)

    p = sub.add_parser("verify-order", help="empirical order-preservation harness")
    _add_system_args(p)
    p.add_argument("--order")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--checkpoints", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_verify_order)

    p = sub.add_parser("verify-order-sparse", help="link-order preservation harness")
    _add_system_args(p)
    p.add_argument("--order")
    p.add_argument("--mean-degree", type=float, required=True)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--checkpoints", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--related", choices=sparse.VARIANTS, default=sparse.DEFAULT_VARIANT)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_verify_order_sparse)

    p = sub.add_parser("equilibria", help="find and classify equilibria")
    _add_system_args(p)
    p.add_argument("--grid-density", type=int, default=8)
    p.set_defaults(fn=cmd_equilibria)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
