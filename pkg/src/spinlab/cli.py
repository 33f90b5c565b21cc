"""Command line interface.

Every subcommand writes exactly one report file (JSON for structured
results, CSV for sweep tables, the graph file format for `sample`) and
exits 0 on success, 1 on a verification mismatch, 2 on regime/domain
errors, 3 on budget errors, 64 on usage errors. Failures still produce a
report carrying the error category, so pipelines always find the file.

Figures are opt-in (--plot) and are rendered next to the report; they are
derived artifacts, never the report itself.
"""

import argparse
import csv
import itertools
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import graphs, moments, phases, recursion, reduction
from .errors import (BudgetExceededError, DomainError, InfeasibleError,
                     ModelError, RegimeError, SpinLabError)
from .models import SpinModel, colorings_model, model_from_json, potts_model

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_REGIME = 2
EXIT_BUDGET = 3
EXIT_USAGE = 64

# subcommands whose output depends on drawn randomness; --seed is mandatory
RANDOMIZED = {"fixpoint", "norms", "sample", "gadget-check", "reduce"}


class Parser(argparse.ArgumentParser):
    """argparse with the conventional 64 exit status for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ----------------------------------------------------------------------
# report emission
# ----------------------------------------------------------------------

def _sanitize(obj):
    """Recursively coerce a report to plain JSON types, deterministically."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_report(data, path):
    """Sorted-key, newline-terminated JSON; no timestamps, no versions."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_sanitize(data), sort_keys=True, indent=2)
                    + "\n")
    return path


def write_csv(rows, fieldnames, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _sanitize(row.get(k, "")) for k in fieldnames})
    return Path(path)


def _png_path(out):
    return str(Path(out).with_suffix(".png"))


# ----------------------------------------------------------------------
# model construction from flags
# ----------------------------------------------------------------------

def _build_model(args):
    if getattr(args, "matrix", None):
        with open(args.matrix) as fh:
            return model_from_json(json.load(fh))
    kind = args.model
    if kind == "generic":
        raise DomainError("generic models need --matrix pointing at JSON")
    if kind == "ising":
        return potts_model(2, args.b)
    if args.q is None:
        raise DomainError(f"--q is required for --model {kind}")
    if kind == "colorings":
        return colorings_model(args.q)
    return potts_model(args.q, args.b)


def _model_b(model):
    """Diagonal parameter of a Potts-family model."""
    if model.param is None:
        raise DomainError("this subcommand needs a Potts/colorings/Ising model")
    return float(model.param)


def _dominant_fixpoints(model, delta):
    """Classified dominant-phase fixpoints: q=2 pair or the C(q, q/2) family."""
    b = _model_b(model)
    if model.q == 2:
        _, fp, _ = phases.ising_phases(delta, b)
        swapped = recursion.Fixpoint(R=fp.C.copy(), C=fp.R.copy(),
                                     residual=fp.residual, delta=fp.delta,
                                     certified=fp.certified)
        return [fp, swapped]
    diagram = phases.dominant_phases(model.q, delta, b)
    return [ph.fixpoint for ph in diagram.phases]


def _phase_pairs(model, delta):
    """(alpha, beta) list of the classified dominant phases, flip-closed."""
    b = _model_b(model)
    if model.q == 2:
        _, _, pairs = phases.ising_phases(delta, b)
        return pairs
    diagram = phases.dominant_phases(model.q, delta, b)
    return [(ph.alpha, ph.beta) for ph in diagram.phases]


# ----------------------------------------------------------------------
# subcommand handlers; each returns (report | None, exit status)
# ----------------------------------------------------------------------

def _phase_row(q, delta, b):
    threshold = phases.potts_threshold(q, delta)
    row = {
        "B": b,
        "delta": delta,
        "threshold": threshold,
        "regime": "uniqueness" if b >= threshold else "nonuniqueness",
        "radius": phases.translation_invariant_radius(q, b),
        "psi1_max": moments.max_psi1(potts_model(q, b), delta),
        "x": "",
        "lambda1": "",
        "lambda1_d": "",
        "attractive": "",
    }
    if b < threshold and q % 2 == 0:
        x = (phases.solve_half_half(q, delta, b)[0] if q >= 4
             else phases.ising_phases(delta, b)[0])
        rep = phases.lambda1_half_half(q, delta, b, x)
        row.update(x=x, lambda1=rep["lambda1"],
                   lambda1_d=(delta - 1) * rep["lambda1"],
                   attractive=rep["attractive"])
    return row


def cmd_phase_diagram(args):
    model = _build_model(args)
    b = _model_b(model)
    q, delta = model.q, args.delta
    if args.sweep:
        lo, hi, count = args.sweep
        rows = [_phase_row(q, delta, float(v))
                for v in np.linspace(lo, hi, count)]
        out = args.out or "spinlab-phase-diagram.csv"
        write_csv(rows, ["B", "delta", "threshold", "regime", "radius",
                         "psi1_max", "x", "lambda1", "lambda1_d",
                         "attractive"], out)
        if args.plot:
            from . import plotting
            plotting.plot_phase_sweep(rows, _png_path(out))
        print(out)
        return None, EXIT_OK

    threshold = phases.potts_threshold(q, delta)
    if q == 2 and b < threshold:
        x, fp, pairs = phases.ising_phases(delta, b)
        rep = recursion.jacobian_report(model, fp, delta)
        phase_rows = [{"subset": list(s), "alpha": list(a), "beta": list(be),
                       "psi1": moments.psi1(model, delta, a, be),
                       "attractive": rep.attractive}
                      for s, (a, be) in zip(([0], [1]), pairs)]
        report = {"q": q, "delta": delta, "B": b, "threshold": threshold,
                  "regime": "semi_translation_nonuniqueness",
                  "phases": phase_rows, "num_phases": len(phase_rows)}
    else:
        diagram = phases.potts_diagram(q, delta, b)
        report = {
            "q": q, "delta": delta, "B": b, "threshold": diagram.threshold,
            "regime": diagram.regime,
            "phases": [{
                "subset": list(ph.subset) if ph.subset is not None else None,
                "alpha": list(ph.alpha), "beta": list(ph.beta),
                "psi1": ph.psi1, "attractive": ph.attractive,
            } for ph in diagram.phases],
            "num_phases": len(diagram.phases),
        }
    return report, EXIT_OK


def cmd_fixpoint(args):
    model = _build_model(args)
    fps = recursion.find_fixpoints_multistart(model, args.delta,
                                              n_starts=args.starts,
                                              seed=args.seed)
    rows = []
    for fp in fps:
        alpha, beta = recursion.fixpoint_to_phase(fp)
        rep = recursion.jacobian_report(model, fp, args.delta)
        row = fp.to_json()
        row.update(alpha=list(alpha), beta=list(beta),
                   psi1=moments.psi1(model, args.delta, alpha, beta),
                   restricted_radius=rep.restricted_radius,
                   attractive=rep.attractive)
        rows.append(row)
    report = {"model": model.to_json(), "delta": args.delta,
              "starts": args.starts, "seed": args.seed,
              "fixpoints": rows, "count": len(rows)}
    return report, EXIT_OK


def cmd_norms(args):
    model = _build_model(args)
    rep = moments.verify_tensor_identity(model, args.delta,
                                         n_starts=args.starts, seed=args.seed)
    norm = rep["norm"]
    report = {
        "model": model.to_json(), "delta": args.delta,
        "p": args.delta / (args.delta - 1),
        "norm": norm,
        "log_norm": math.log(norm),
        "max_psi1": args.delta * math.log(norm),
        "tensor_ratio_deviation": rep["ratio_deviation"],
    }
    return report, EXIT_OK


def _moment_average(model, delta, n, second):
    """Exhaustive per-footprint average of Z (or Z^2) over all graphs."""
    if math.factorial(n) ** delta * model.q ** (2 * n) > graphs.ENUMERATION_BUDGET:
        raise BudgetExceededError("exhaustive graph average exceeds the budget")
    acc = {}
    total = 0
    for g in graphs.all_graphs(n, delta):
        total += 1
        for fp, z in graphs.partition_by_footprint(g, model).items():
            acc[fp] = acc.get(fp, 0) + (z * z if second else z)
    return acc, total


def _verify_moment(model, delta, n, second):
    formula = (graphs.expected_Z2_formula if second
               else graphs.expected_Z_formula)
    acc, total = _moment_average(model, delta, n, second)
    q = model.q
    cases = 0
    mismatches = []
    for a_counts in graphs._compositions(n, (n,) * q):
        alpha = tuple(Fraction(c, n) for c in a_counts)
        for b_counts in graphs._compositions(n, (n,) * q):
            beta = tuple(Fraction(c, n) for c in b_counts)
            expected = formula(model, delta, n, alpha, beta)
            average = Fraction(acc.get(graphs.Footprint(alpha, beta), 0), total)
            cases += 1
            if expected != average:
                mismatches.append({"alpha": alpha, "beta": beta,
                                   "expected": expected, "average": average})
    return {"cases": cases, "graphs": total, "mismatches": mismatches,
            "status": "exact-match" if not mismatches else "mismatch"}


def cmd_verify_moments(args):
    model = _build_model(args)
    report = {"what": "moments", "q": model.q, "delta": args.delta,
              "n": args.n,
              "first_moment": _verify_moment(model, args.delta, args.n,
                                             second=False)}
    status = EXIT_OK if report["first_moment"]["status"] == "exact-match" \
        else EXIT_MISMATCH
    if args.second is not None:
        report["n2"] = args.second
        report["second_moment"] = _verify_moment(model, args.delta,
                                                 args.second, second=True)
        if report["second_moment"]["status"] != "exact-match":
            status = EXIT_MISMATCH
    return report, status


def cmd_verify_tensor(args):
    model = _build_model(args)
    rep = moments.verify_tensor_identity(model, args.delta,
                                         n_starts=args.starts, seed=args.seed)
    rep.update(what="tensor", delta=args.delta, tolerance=args.tol,
               status="match" if rep["ratio_deviation"] <= args.tol
               else "mismatch")
    return rep, EXIT_OK if rep["status"] == "match" else EXIT_MISMATCH


def cmd_verify_connection(args):
    model = _build_model(args)
    fps = recursion.find_fixpoints_multistart(model, args.delta,
                                              n_starts=args.starts,
                                              seed=args.seed)
    rows = []
    agree = True
    for fp in fps:
        alpha, beta = recursion.fixpoint_to_phase(fp)
        jac = recursion.jacobian_report(model, fp, args.delta)
        row = {"alpha": list(alpha), "beta": list(beta),
               "restricted_radius": jac.restricted_radius,
               "jacobian_attractive": jac.attractive}
        try:
            hess = moments.psi1_hessian_attractive(model, args.delta,
                                                   alpha, beta)
        except DomainError as exc:
            row["hessian"] = f"skipped: {exc}"
        else:
            row.update(hessian_max_eigenvalue=hess["max_eigenvalue"],
                       hessian_local_max=hess["local_max"],
                       agree=hess["local_max"] == jac.attractive)
            agree = agree and row["agree"]
        rows.append(row)
    report = {"what": "connection", "delta": args.delta,
              "fixpoints": rows, "count": len(rows), "all_agree": agree}
    return report, EXIT_OK if agree else EXIT_MISMATCH


def cmd_sample(args):
    g = graphs.sample_graph(args.n, args.r, args.delta, args.seed)
    out = args.out or "graph.txt"
    graphs.write_graph(g, out)
    print(out)
    return None, EXIT_OK


def cmd_exact(args):
    model = _build_model(args)
    g = graphs.read_graph(args.graph)
    z = graphs.exact_partition(g, model)
    report = {"Z": z, "rational": isinstance(z, Fraction),
              "num_vertices": g.num_vertices, "n": g.n, "r": g.r,
              "delta": g.delta}
    if args.footprints:
        table = graphs.partition_by_footprint(g, model)
        report["footprints"] = [
            {"alpha": list(fp.alpha), "beta": list(fp.beta), "Z": w}
            for fp, w in sorted(table.items(),
                                key=lambda kv: (kv[0].alpha, kv[0].beta))]
    return report, EXIT_OK


def cmd_gadget_check(args):
    model = _build_model(args)
    fixpoints = _dominant_fixpoints(model, args.delta)
    g = graphs.sample_graph(args.n, args.r, args.delta, args.seed)
    rep = graphs.gadget_check(g, model, fixpoints)
    rep.update(n=args.n, r=args.r, delta=args.delta, seed=args.seed,
               num_phases=len(fixpoints))
    return rep, EXIT_OK


def cmd_ssc(args):
    model = _build_model(args)
    fp = _dominant_fixpoints(model, args.delta)[0]
    rep = graphs.ssc_constants(model, args.delta, fp, i_max=args.i_max)
    lengths = sorted(rep.mu)
    partials = {}
    running = 0.0
    for i in lengths:
        running += rep.mu[i] * rep.delta[i] ** 2
        partials[i] = running
    log_c = math.log(rep.C)
    report = {
        "delta": args.delta, "i_max": args.i_max,
        "lambdas": list(rep.lambdas),
        "partial_sum": rep.partial_sum,
        "C": rep.C, "ln_C": log_c,
        "gap": abs(rep.partial_sum - log_c),
        "series": [[i, partials[i]] for i in lengths],
    }
    out = args.out or "spinlab-ssc.json"
    if args.plot:
        from . import plotting
        plotting.plot_ssc_convergence(partials, log_c, _png_path(out))
    return report, EXIT_OK


def _read_edge_list(path):
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = (int(t) for t in line.split())
            edges.append((u, v))
    if not edges:
        raise DomainError(f"no edges found in {path}")
    nv = max(max(u, v) for u, v in edges) + 1
    return nv, edges


def _graph_text(graph):
    lines = [f"{graph.n} {graph.r} {graph.delta}"]
    lines += [" ".join(str(i) for i in m) for m in graph.matchings]
    return "\n".join(lines) + "\n"


def cmd_reduce(args):
    model = _build_model(args)
    nv, edges = _read_edge_list(args.maxcut)
    pset = reduction.phase_set(_phase_pairs(model, args.delta))
    negdef = reduction.negdef_certificate(pset, model)
    j1 = reduction.build_J1(pset, model)
    j2 = reduction.build_J2(j1, pset, model)
    result = reduction.reduce_maxcut(nv, edges, j2)
    dp = reduction.dp_max_lwt(result, seed=args.seed)
    hf = reduction.build_HF(result.instance, n=args.n, k=args.k,
                            delta=args.delta, seed=args.seed)
    report = {
        "h": {"num_vertices": nv, "num_edges": len(edges),
              "edges": [list(e) for e in edges], "maxcut": result.maxcut},
        "phase_set": {"size": len(pset), "reps": list(pset.reps),
                      "flip": list(pset.flip)},
        "negdef": {"max_eigenvalue": negdef["max_eigenvalue"],
                   "passes": negdef["passes"]},
        "j1": {"z": j1.z, "counts": list(j1.counts),
               "x_star": list(j1.x_star), "dio_error": j1.dio_error,
               "epsilon1": j1.epsilon1, "certified": j1.certified,
               "same_max": j1.same_max, "diff_max": j1.diff_max,
               "num_vertices": j1.instance.num_vertices},
        "j2": {"t": j2.t, "phase": j2.phase, "A1": j2.A1, "A2": j2.A2,
               "epsilon2": j2.epsilon2, "epsilon3": j2.epsilon3,
               "certified": j2.certified,
               "num_vertices": j2.instance.num_vertices},
        "D3": result.D3,
        "coefficients": result.coefficients,
        "prediction": {"formula": result.predicted, "dp": dp["value"],
                       "dp_exact": dp["exact"],
                       "gap": abs(dp["value"] - result.predicted)},
        "expanded_instance": {
            "vertices": result.instance.num_vertices,
            "num_edges": len(result.instance.edges),
            "edges": [{"u": u, "v": v, "kind": kind}
                      for u, v, kind in result.instance.edges]},
        "final_graph": {
            "num_vertices": hf.num_vertices, "delta": hf.delta,
            "num_edges": len(hf.edges), "checks": reduction.check_hf(hf),
            "edges": [list(e) for e in hf.edges],
            "gadget_files": [_graph_text(g) for g in hf.gadgets]},
    }
    return report, EXIT_OK


# ----------------------------------------------------------------------
# parser assembly
# ----------------------------------------------------------------------

def _add_model_flags(p):
    p.add_argument("--model", default="colorings",
                   choices=["potts", "colorings", "ising", "generic"],
                   help="model family (default: colorings)")
    p.add_argument("--q", type=int, help="number of spins")
    p.add_argument("--b", "--B", type=float, default=0.0, dest="b",
                   help="Potts diagonal (default 0.0)")
    p.add_argument("--matrix", help="JSON file with an explicit model")


def _add_common(p, seed_required=False):
    p.add_argument("--out", help="report path (default: spinlab-<cmd>.json)")
    p.add_argument("--workers", type=int,
                   help="worker count (SPINLAB_WORKERS overrides)")
    p.add_argument("--seed", type=int, required=seed_required,
                   default=None if seed_required else 0,
                   help="seed for all drawn randomness"
                        + (" (required)" if seed_required else ""))


def _sweep(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected START:STOP:COUNT")
    return float(parts[0]), float(parts[1]), int(parts[2])


def build_parser():
    parser = Parser(prog="spinlab",
                    description="Phases, moments, and hardness gadgets of "
                                "antiferromagnetic spin systems on random "
                                "regular bipartite graphs.")
    sub = parser.add_subparsers(dest="cmd", required=True,
                                parser_class=Parser)

    p = sub.add_parser("phase-diagram", help="classified Potts phases")
    _add_model_flags(p)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--sweep", type=_sweep, metavar="START:STOP:COUNT",
                   help="CSV sweep over B instead of a single diagram")
    p.add_argument("--plot", action="store_true",
                   help="render a PNG next to the sweep CSV")
    _add_common(p)
    p.set_defaults(handler=cmd_phase_diagram)

    p = sub.add_parser("fixpoint", help="multistart tree-recursion fixpoints")
    _add_model_flags(p)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--starts", type=int, default=50)
    _add_common(p, seed_required=True)
    p.set_defaults(handler=cmd_fixpoint)

    p = sub.add_parser("norms", help="induced p->Delta matrix norm")
    _add_model_flags(p)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--starts", type=int, default=64)
    _add_common(p, seed_required=True)
    p.set_defaults(handler=cmd_norms)

    p = sub.add_parser("verify", help="independent cross-checks")
    what = p.add_subparsers(dest="what", required=True, parser_class=Parser)

    v = what.add_parser("moments", help="formula vs exhaustive average")
    _add_model_flags(v)
    v.add_argument("--delta", type=int, required=True)
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--second", type=int, metavar="N2",
                   help="also check the second moment at side size N2")
    _add_common(v)
    v.set_defaults(handler=cmd_verify_moments)

    v = what.add_parser("tensor", help="norm of the Kronecker square")
    _add_model_flags(v)
    v.add_argument("--delta", type=int, required=True)
    v.add_argument("--starts", type=int, default=64)
    v.add_argument("--tol", type=float, default=1e-7)
    _add_common(v)
    v.set_defaults(handler=cmd_verify_tensor)

    v = what.add_parser("connection",
                        help="Jacobian vs constrained-Hessian attractiveness")
    _add_model_flags(v)
    v.add_argument("--delta", type=int, required=True)
    v.add_argument("--starts", type=int, default=50)
    _add_common(v)
    v.set_defaults(handler=cmd_verify_connection)

    p = sub.add_parser("sample", help="draw a random gadget graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--delta", type=int, required=True)
    _add_common(p, seed_required=True)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("exact", help="exact partition function of a graph file")
    _add_model_flags(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--footprints", action="store_true",
                   help="include the per-footprint table")
    _add_common(p)
    p.set_defaults(handler=cmd_exact)

    p = sub.add_parser("gadget-check", help="phase-mass and nu-product screen")
    _add_model_flags(p)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    _add_common(p, seed_required=True)
    p.set_defaults(handler=cmd_gadget_check)

    p = sub.add_parser("ssc", help="small-subgraph-conditioning constants")
    _add_model_flags(p)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--i-max", type=int, default=400)
    p.add_argument("--plot", action="store_true",
                   help="render the convergence PNG next to the report")
    _add_common(p)
    p.set_defaults(handler=cmd_ssc)

    p = sub.add_parser("reduce", help="Max-Cut to phase-labeling reduction")
    _add_model_flags(p)
    p.add_argument("--maxcut", required=True, metavar="H.txt",
                   help="edge list of the cubic source graph")
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _add_common(p, seed_required=True)
    p.set_defaults(handler=cmd_reduce)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is not None and "SPINLAB_WORKERS" not in os.environ:
        os.environ["SPINLAB_WORKERS"] = str(args.workers)
    name = args.cmd if args.cmd != "verify" else f"verify-{args.what}"
    out = args.out or f"spinlab-{name}.json"
    try:
        report, status = args.handler(args)
    except BudgetExceededError as exc:
        write_report({"error": {"category": "budget", "message": str(exc)}},
                     out)
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (RegimeError, DomainError, InfeasibleError, ModelError) as exc:
        write_report({"error": {"category": "regime_or_domain",
                                "message": str(exc)}}, out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except SpinLabError as exc:
        write_report({"error": {"category": "internal",
                                "message": str(exc)}}, out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    if report is not None:
        write_report(report, out)
        print(out)
    return status


if __name__ == "__main__":
    sys.exit(main())
