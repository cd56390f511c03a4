"""Command-line surface.

Subcommands: analyze, evaluate, optimize, lp, simulate, reproduce.
Reports are written as versioned JSON (``"schema": 1``) plus CSV tables
(header row, comma-separated, ``.`` decimal, LF endings).  Exit codes:
0 success, 1 input error, 2 solver error, 3 property violation
detected by a verification step.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import countable, criteria, lp, model, optimal
from .chains import cesaro_matrix, decompose, induced_chain
from .errors import (
    AvgMdpError,
    CyclingDetected,
    EnumerationTooLarge,
    NumericalStall,
    SingularSolve,
    TableTooLarge,
)

SCHEMA = 1


class PropertyViolation(Exception):
    """A verification step failed; mapped to exit code 3."""


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _load_mdp(path) -> model.FiniteMdp:
    return model.validate_mdp(_load_json(path))


def _load_policy(path, mdp) -> model.Policy:
    doc = _load_json(path)
    kind = doc.get("kind", "stationary")
    if kind == "stationary":
        return model.Policy.stationary(doc["table"], mdp)
    if kind == "markov":
        return model.Policy.markov(doc["stages"], tail=doc.get("tail"),
                                   cycle=doc.get("cycle"), mdp=mdp)
    raise ValueError(f"unsupported policy kind {kind!r} in {path}")


def _write_json(path: Path, payload: dict):
    payload = {"schema": SCHEMA, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_writer(f):
    return csv.writer(f, lineterminator="\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands --------------------------------------------------------------


def cmd_analyze(args):
    mdp = _load_mdp(args.input)
    policy = (_load_policy(args.policy, mdp) if args.policy
              else model.uniform_stationary(mdp))
    chain = induced_chain(mdp, policy)
    decomp = decompose(chain)
    limit = cesaro_matrix(chain, decomp)
    out = _out_dir(args)
    _write_json(out / "analysis.json", {
        "n_states": mdp.n_states,
        "recurrent_classes": decomp.recurrent_classes,
        "transient": decomp.transient,
        "periods": decomp.periods,
        "stationary_distributions": [[repr(float(v)) for v in pi]
                                     for pi in limit.per_class_stationary],
    })
    with open(out / "p_star.csv", "w", newline="") as f:
        w = _csv_writer(f)
        w.writerow(["state"] + [f"p{j}" for j in range(mdp.n_states)])
        for x in range(mdp.n_states):
            w.writerow([x] + [repr(float(v)) for v in limit.p_star[x]])
    return 0


def cmd_evaluate(args):
    mdp = _load_mdp(args.input)
    policy = _load_policy(args.policy, mdp)
    if policy.is_stationary:
        report = criteria.avg_cost_stationary(mdp, policy)
        path = criteria.pathwise_exact(mdp, policy)
        for key in criteria.PATHWISE_KEYS:
            report.values[key] = path.values[key]
    else:
        report = criteria.avg_cost_markov(mdp, policy, horizon=args.horizon,
                                          tol=args.tol)
    out = _out_dir(args)
    report.to_csv(out / "criteria.csv")
    if args.format == "json":
        _write_json(out / "criteria.json", {
            "method": report.method,
            "values": {k: [repr(float(v)) for v in report.values[k]]
                       for k in criteria.ALL_KEYS},
        })
    return 0


def cmd_optimize(args):
    mdp = _load_mdp(args.input)
    sol = optimal.optimal_gain_pi(mdp)
    ineq = optimal.verify_gain_inequality(mdp, sol.g)
    classes = optimal.connected_classes(mdp)

    x_star = int(np.argmin(sol.g))
    region = [x for x in range(mdp.n_states)
              if optimal.max_reachability(mdp, [x_star])[x] >= 1.0 - args.tol]
    constancy = None
    cond = optimal.check_reachability_condition(mdp, [x_star], region)
    if cond.holds:
        rep = optimal.constancy_report(mdp, sol.g, [x_star], region, tol=args.tol)
        constancy = {
            "ell": rep.ell,
            "support": rep.support,
            "upper_violations": rep.upper_violations,
        }

    out = _out_dir(args)
    _write_json(out / "optimal.json", {
        "g": [repr(float(v)) for v in sol.g],
        "h": [repr(float(v)) for v in sol.h],
        "policy": list(sol.policy.action_indices),
        "method": sol.method,
        "classification": classes.classification,
        "connected_classes": classes.classes,
        "inequality_slacks": [[repr(float(v)) for v in s] for s in ineq.slacks],
        "inequality_verdict": ineq.verdict,
        "constancy": constancy,
    })
    with open(out / "gain.csv", "w", newline="") as f:
        w = _csv_writer(f)
        w.writerow(["state", "g", "h", "action"])
        for x in range(mdp.n_states):
            w.writerow([x, repr(float(sol.g[x])), repr(float(sol.h[x])),
                        sol.policy.action_indices[x]])
    if not ineq.verdict:
        raise PropertyViolation("computed gain violates the one-step inequality")
    if (classes.classification == optimal.WEAKLY_COMMUNICATING
            and float(sol.g.max() - sol.g.min()) > args.tol):
        raise PropertyViolation("weakly communicating MDP with non-constant gain")
    return 0


def cmd_lp(args):
    out = _out_dir(args)
    if args.action == "sweep":
        ks = [int(v) for v in args.Ks.split(",")]
        chain = countable.paper_chain(cost=lambda k: 0 if k == 0 else 1)
        study = lp.truncation_study(chain.to_countable(), ks,
                                    b_scheme=args.b_scheme, mode=args.mode)
        study.to_csv(out / "lp_sweep.csv")
        _write_json(out / "lp_sweep.json", {
            "Ks": ks,
            "min_mass": [repr(m) if m is not None else None
                         for m in study.min_masses()],
            "chain_bound_ok": study.chain_bound_ok,
            "doubling_gaps": [repr(g) for g in study.doubling_gaps],
            "diverges": study.diverges,
        })
        if not study.chain_bound_ok:
            raise PropertyViolation("a feasible solution broke the chained nu bound")
        masses = [m for m in study.min_masses() if m is not None]
        if any(b <= a for a, b in zip(masses, masses[1:])):
            raise PropertyViolation("min nu mass failed to increase across the sweep")
        return 0
    # action == "solve"
    mdp = _load_mdp(args.input)
    policy = (_load_policy(args.policy, mdp) if args.policy
              else model.uniform_stationary(mdp))
    chain = induced_chain(mdp, policy)
    program = lp.build_lp(chain, lp.weight_scheme(args.b_scheme, mdp.n_states))
    outcome = lp.solve_lp(program, mode=args.mode)
    payload = {"status": outcome.status, "pivots": outcome.pivots,
               "mode": outcome.mode}
    if outcome.feasible:
        payload["objective"] = repr(outcome.objective)
        payload["gamma"] = [repr(float(v)) for v in outcome.gamma]
        payload["nu"] = [repr(float(v)) for v in outcome.nu]
    else:
        payload["certificate"] = [repr(float(v)) for v in outcome.certificate]
    _write_json(out / "lp_solution.json", payload)
    return 0


def cmd_simulate(args):
    mdp = _load_mdp(args.input)
    policy = _load_policy(args.policy, mdp)
    result = criteria.simulate_pathwise(mdp, policy, args.x0, args.n_traj,
                                        args.horizon, args.seed)
    out = _out_dir(args)
    with open(out / "simulation.csv", "w", newline="") as f:
        w = _csv_writer(f)
        w.writerow(["key", "mean", "stderr"])
        for key in criteria.PATHWISE_KEYS:
            w.writerow([key, repr(result.mean[key]), repr(result.stderr[key])])
    _write_json(out / "simulation.json", {
        "x0": args.x0, "n_traj": args.n_traj, "horizon": args.horizon,
        "seed": args.seed,
        "mean": {k: repr(v) for k, v in result.mean.items()},
        "stderr": {k: repr(v) for k, v in result.stderr.items()},
        "windows": result.windows,
        "window_gap": repr(result.window_gap),
    })
    return 0


def cmd_reproduce(args):
    out = _out_dir(args)
    name = args.name
    if name == "example-3.2":
        K = args.K
        linear = countable.paper_chain()
        report = countable.example32_report(linear, K, horizon=args.horizon)
        bounded = countable.paper_chain(cost=lambda k: 0 if k == 0 else 1)
        bounded_gain = countable.example32_report(bounded, K).gain
        with open(out / "example32.csv", "w", newline="") as f:
            w = _csv_writer(f)
            w.writerow(["k", "g", "g_bounded_trunc", "survival_K"])
            for k in range(K + 1):
                if k == 0:
                    g = 0
                    surv = 1
                else:
                    row = report.expected_state_cost_row(k, args.horizon)
                    if any(v != row[0] for v in row):
                        raise PropertyViolation(
                            f"stage costs from state {k} are not constant")
                    g = row[0]
                    surv = countable.survival_closed_form(k, K)
                w.writerow([k, g, repr(float(bounded_gain[k])), str(surv)])
        if float(np.max(np.abs(bounded_gain))) > 1.0 / K:
            raise PropertyViolation("bounded-cost truncation gain exceeds 1/K")
        return 0
    if name == "example-3.3":
        ks = [int(v) for v in args.Ks.split(",")]
        chain = countable.paper_chain(cost=lambda k: 0 if k == 0 else 1)
        study = lp.truncation_study(chain.to_countable(), ks, b_scheme=args.b_scheme)
        study.to_csv(out / "lp_sweep.csv")
        masses = [m for m in study.min_masses() if m is not None]
        if any(b <= a for a, b in zip(masses, masses[1:])) or not study.chain_bound_ok:
            raise PropertyViolation("LP sweep lost the divergence signature")
        return 0
    if name == "example-3.4":
        zero = countable.InventoryWalk.two_point()
        drifted = countable.InventoryWalk.two_point(action_drift=1.0)
        rows = []
        for label, walk in (("zero_drift", zero), ("positive_drift", drifted)):
            probe = countable.walk_recurrence_probe(
                walk, (-1.0, 1.0), start=args.start, n_traj=args.n_traj,
                horizon=args.horizon, seed=args.seed)
            rows.append((label, probe.hits, probe.n_traj,
                         repr(probe.estimate), repr(probe.stderr)))
        with open(out / "example34.csv", "w", newline="") as f:
            w = _csv_writer(f)
            w.writerow(["config", "hits", "n_traj", "estimate", "stderr"])
            for row in rows:
                w.writerow(row)
        return 0
    raise ValueError(f"unknown reproduction target {name!r}")


# -- entry point --------------------------------------------------------------


def _build_parser():
    p = argparse.ArgumentParser(prog="avgmdp",
                                description="average-cost MDP toolkit")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="chain structure under a policy")
    a.add_argument("input")
    a.add_argument("--policy")
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_analyze)

    e = sub.add_parser("evaluate", help="criteria report for a policy")
    e.add_argument("input")
    e.add_argument("--policy", required=True)
    e.add_argument("--horizon", type=int, default=10**4)
    e.add_argument("--format", choices=["json", "csv"], default="csv")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_evaluate)

    o = sub.add_parser("optimize", help="optimal gain by policy iteration")
    o.add_argument("input")
    o.add_argument("--out", required=True)
    o.set_defaults(fn=cmd_optimize)

    l = sub.add_parser("lp", help="occupation-measure linear programs")
    l.add_argument("action", choices=["sweep", "solve"])
    l.add_argument("input", nargs="?")
    l.add_argument("--policy")
    l.add_argument("--Ks", default="10,20,40,80")
    l.add_argument("--b-scheme", choices=["geometric", "uniform"],
                   default="geometric")
    l.add_argument("--mode", choices=["float", "exact"], default="float")
    l.add_argument("--out", required=True)
    l.set_defaults(fn=cmd_lp)

    s = sub.add_parser("simulate", help="pathwise criteria by simulation")
    s.add_argument("input")
    s.add_argument("--policy", required=True)
    s.add_argument("--x0", type=int, default=0)
    s.add_argument("--n-traj", type=int, default=100)
    s.add_argument("--horizon", type=int, default=10**4)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_simulate)

    r = sub.add_parser("reproduce", help="rebuild a worked example")
    r.add_argument("name")
    r.add_argument("--K", type=int, default=50)
    r.add_argument("--Ks", default="10,20,40,80")
    r.add_argument("--b-scheme", choices=["geometric", "uniform"],
                   default="geometric")
    r.add_argument("--horizon", type=int, default=100)
    r.add_argument("--start", type=float, default=25.0)
    r.add_argument("--n-traj", type=int, default=100)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PropertyViolation as e:
        print(f"property violation: {e}", file=sys.stderr)
        return 3
    except (SingularSolve, NumericalStall, CyclingDetected,
            EnumerationTooLarge, TableTooLarge) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 2
    except (AvgMdpError, OSError, ValueError, KeyError,
            json.JSONDecodeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
