"""Command-line front end: ``kmslab analyze | state | verify | example torus``.

Exit codes: 0 pass, 1 invariant failure, 2 input error, 3 domain error
(subcritical beta, sinks, no cycle).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import ToeplitzElement
from .errors import (DimensionCapError, EnumerationCapError, GraphFormatError, KmsLabError,
                     NoCycleError, PreconditionError, ResolutionError, SinkError,
                     SubcriticalTemperature)
from .graph import BUNDLED, DirectedMultigraph, Word, is_hereditary, scc_decompose, vertex_matrix
from .measures import (CylinderMeasure, check_subinvariance, extend_vertex_measure, f_beta,
                       resolvent_measure)
from .spectral import DEFAULT_N_MAX, analyze, growth_bound_check, has_cycle

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DOMAIN = 0, 1, 2, 3
DEFAULT_TOL = 1e-9


class InputError(KmsLabError):
    pass


# ---- input parsing ------------------------------------------------------------------

def load_graph(arg: str) -> DirectedMultigraph:
    """A graph JSON file, or a bundled name such as ``dumbbell``, ``dumbbell:2,3``, ``full_shift:3``."""
    name, _, args = arg.partition(":")
    if name in BUNDLED and not Path(arg).exists():
        try:
            params = [int(x) for x in args.split(",") if x]
        except ValueError:
            raise InputError(f"bad parameters in {arg!r}") from None
        return BUNDLED[name](*params)
    try:
        text = Path(arg).read_text()
    except OSError as exc:
        raise InputError(f"cannot read graph file: {exc}") from None
    return DirectedMultigraph.from_json(text)


_LN = re.compile(r"^\s*ln\s*\(?\s*([0-9.eE+-]+(?:/[0-9]+)?)\s*\)?\s*$")


def parse_beta(text: str) -> float:
    """A real number or ``ln(X)`` / ``lnX``."""
    m = _LN.match(text)
    try:
        if m:
            num, _, den = m.group(1).partition("/")
            return math.log(float(num) / (float(den) if den else 1.0))
        return float(text)
    except ValueError:
        raise InputError(f"cannot parse beta {text!r}") from None


def parse_epsilon(g: DirectedMultigraph, arg: str, depth: int) -> CylinderMeasure:
    """``uniform``, ``point:VERTEX`` or a JSON file (a measure, or {"vertex_masses": {...}})."""
    n = g.n_vertices
    if arg == "uniform":
        vec = np.array([1.0 if v in g.live else 0.0 for v in range(n)])
        return extend_vertex_measure(g, vec, depth)
    if arg.startswith("point:"):
        vid = arg[len("point:"):]
        if vid not in g.vertices:
            raise InputError(f"unknown vertex {vid!r}")
        vec = np.zeros(n)
        vec[g.vertex_index(vid)] = 1.0
        return extend_vertex_measure(g, vec, depth)
    try:
        obj = json.loads(Path(arg).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read epsilon file: {exc}") from None
    if "vertex_masses" in obj:
        vec = np.zeros(n)
        for vid, m in obj["vertex_masses"].items():
            if vid not in g.vertices:
                raise InputError(f"unknown vertex {vid!r}")
            vec[g.vertex_index(vid)] = float(m)
        return extend_vertex_measure(g, vec, depth)
    try:
        return CylinderMeasure.from_json(g, obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed measure JSON: {exc}") from None


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _clean(x):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def make_report(command: str, inputs: dict, results: dict, tolerances: dict, verdicts: dict) -> dict:
    return _clean({
        "command": command,
        "version": __version__,
        "inputs": inputs,
        "inputs_digest": _digest(_clean(inputs)),
        "results": results,
        "tolerances": tolerances,
        "verdicts": verdicts,
        "passed": all(verdicts.values()),
    })


def emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


# ---- analyze -------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    g = load_graph(args.graph)
    A = vertex_matrix(g)
    dec = scc_decompose(g)
    comps = [{"vertices": [g.vertices[v] for v in c], "nontrivial": nt,
              "hereditary": is_hereditary(g, c)}
             for c, nt in zip(dec.components, dec.nontrivial)]
    warnings = []
    results = {"vertices": list(g.vertices), "n_edges": g.n_edges, "components": comps,
               "sinks": g.sinks(), "sources": g.sources(), "vertex_matrix": A.tolist()}
    if g.has_sinks():
        warnings.append("graph has sinks: the shift is not surjective and beta_l is undefined")
    if not has_cycle(A):
        results.update({"rho": 0.0, "acyclic": True, "beta_c": None, "beta_l": None})
        warnings.append("graph is acyclic: rho(A) = 0 and there are no infinite paths")
    else:
        rep = analyze(A, args.n_max)
        _, growth_ok, _ = growth_bound_check(A, args.n_max)
        results.update({"acyclic": False, "rho": rep.rho, "beta_c": rep.beta_c,
                        "beta_c_sequence": rep.beta_c_sequence,
                        "beta_l": None if g.has_sinks() else rep.beta_l,
                        "beta_l_sequence": [] if g.has_sinks() else rep.beta_l_sequence,
                        "growth_constant": rep.growth_constant, "growth_bounded": growth_ok,
                        "achieving_components": [comps[i]["vertices"] for i in rep.achieving_components]})
    results["warnings"] = warnings
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    emit(make_report("analyze", {"graph": g.to_json(), "n_max": args.n_max}, results,
                     {}, {}), args.json)
    return EXIT_OK


# ---- state ---------------------------------------------------------------------------------

def _element_key(rows) -> str:
    return _digest(rows)[:16]


def cmd_state(args) -> int:
    from .kms import KmsState, cp_gaps, factors_through_cp, restrict_to_tck
    g = load_graph(args.graph)
    beta = parse_beta(args.beta)
    eps = parse_epsilon(g, args.epsilon, args.depth)
    st = KmsState(g, beta, eps, normalize=True)
    notes = []
    if abs(st.normalization_factor - 1.0) > 1e-12:
        notes.append(f"epsilon rescaled by {st.normalization_factor!r} so that the integral of f_beta is 1")
    results = {
        "beta": beta,
        "normalization_factor": st.normalization_factor,
        "epsilon_vertex": dict(zip(g.vertices, st.epsilon.vertex_marginal())),
        "y": dict(zip(g.vertices, st.y)),
        "y_dot_eps": float(st.y @ st.epsilon.vertex_marginal()),
        "m_vec": dict(zip(g.vertices, st.m_vec)),
        "mu_vertex": {g.vertices[v]: float(st.mu_mass(Word(v, ()))) for v in range(g.n_vertices)},
        "cp_gap": dict(zip(g.vertices, cp_gaps(st))),
        "factors_through_cp": factors_through_cp(st),
        "notes": notes,
    }
    if args.elements:
        try:
            elements = json.loads(Path(args.elements).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read element file: {exc}") from None
        if elements and isinstance(elements[0], dict):
            elements = [elements]
        table = {}
        for rows in elements:
            t = ToeplitzElement.from_json(g, rows)
            table[_element_key(rows)] = {"element": rows, "value": float(st.evaluate(t))}
        results["evaluations"] = table
    else:
        tck = restrict_to_tck(st, args.word_length)
        results["tck_table"] = {f"{g.format_word(a)}|{g.format_word(b)}": v
                                for (a, b), v in tck.table.items() if v != 0.0}
    inputs = {"graph": g.to_json(), "beta": beta, "epsilon": args.epsilon, "depth": args.depth}
    emit(make_report("state", inputs, results, {}, {}), args.json)
    return EXIT_OK


# ---- verify ----------------------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KMSLAB_THREADS", "1")))
    except ValueError:
        raise InputError("KMSLAB_THREADS must be an integer") from None


def _verdict(name, passed, worst, tol, witness=None, **extra) -> dict:
    out = {"check": name, "passed": bool(passed), "worst": worst, "tol": tol}
    if witness is not None:
        out["witness"] = witness
    out.update(extra)
    return out


def _check_f_beta(ctx, rng) -> dict:
    A = vertex_matrix(ctx["g"])
    fb = f_beta(A, ctx["beta"])
    res = float(np.max(np.abs(fb.y - math.exp(-ctx["beta"]) * A.T @ fb.y - 1)))
    return _verdict("f_beta_identity", res <= ctx["tol"], res, ctx["tol"])


def _check_resolvent(ctx, rng) -> dict:
    eps = ctx["state"].epsilon
    d = min(eps.depth, 4)
    mu = resolvent_measure(eps.restrict(d), ctx["beta"])
    rep = check_subinvariance(mu, ctx["beta"])
    worst = 0.0
    for w in ctx["g"].words_up_to(d):
        worst = max(worst, abs(rep.recovered.mass(w) - eps.mass(w)))
    return _verdict("resolvent_round_trip", worst <= ctx["tol"] and rep.passed, worst, ctx["tol"])


def _check_kms(ctx, rng) -> dict:
    from .kms import kms_check
    from .sampling import random_kms_pair
    g, st, tol = ctx["g"], ctx["state"], ctx["tol"]
    worst, nonzero = 0.0, 0
    for _ in range(ctx["samples"]):
        b, c = random_kms_pair(g, rng, max_excess=ctx["excess"])
        rep = kms_check(st, b, c, tol)
        worst = max(worst, rep.residual)
        nonzero += abs(rep.lhs) > 1e-12
        if not rep.passed:
            return _verdict("kms_condition", False, worst, tol,
                            witness={"b": b.to_json(), "c": c.to_json(), "lhs": rep.lhs, "rhs": rep.rhs})
    return _verdict("kms_condition", True, worst, tol, nonzero_pairs=nonzero)


def _check_positivity(ctx, rng) -> dict:
    from .kms import gram_matrix
    from .sampling import random_element
    g, st, tol = ctx["g"], ctx["state"], ctx["tol"]
    worst = 0.0
    for _ in range(max(1, ctx["samples"] // 20)):
        els = [random_element(g, rng, 2, max_excess=ctx["excess"]) for _ in range(5)]
        ev = float(np.linalg.eigvalsh(gram_matrix(st, els)).min())
        worst = min(worst, ev)
        if ev < -tol:
            return _verdict("positivity", False, ev, tol, witness=[e.to_json() for e in els])
    return _verdict("positivity", True, worst, tol)


def _check_tck(ctx, rng) -> dict:
    from .kms import cp_gaps
    g, st, tol = ctx["g"], ctx["state"], ctx["tol"]
    S = [ToeplitzElement.S_edge(g, e) for e in range(g.n_edges)]
    for e in range(g.n_edges):
        for f in range(g.n_edges):
            prod = S[e].adjoint() * S[f]
            expect = ToeplitzElement.P(g, g.s[e]) if e == f else ToeplitzElement.zero(g)
            if not prod.close_to(expect, 1e-12):
                return _verdict("tck_relations", False, None, tol,
                                witness={"e": g.edges[e].id, "f": g.edges[f].id})
    gaps = cp_gaps(st)
    ev = st.epsilon.vertex_marginal()
    worst = float(np.max(np.abs(gaps - ev)))
    ok = worst <= 1e-10 and bool(np.all(gaps >= -tol))
    return _verdict("tck_relations_and_cp_gap", ok, worst, 1e-10)


def _check_fock(ctx, rng) -> dict:
    from .fock import build_truncation, state_via_partitions
    from .sampling import random_element
    g, st, tol = ctx["g"], ctx["state"], ctx["tol"]
    ft = build_truncation(g, st.epsilon, ctx["beta"], ctx["levels"], ctx["depth"])
    worst = 0.0
    for _ in range(max(1, ctx["samples"] // 5)):
        t = random_element(g, rng, 3, max_excess=ctx["excess"])
        pe = state_via_partitions(ft, t)
        gap = abs(pe.value - float(st.evaluate(t)))
        worst = max(worst, gap - pe.tail)
        if gap > pe.tail + tol:
            return _verdict("fock_oracle", False, gap, tol, witness={"element": t.to_json(), "tail": pe.tail})
    return _verdict("fock_oracle", True, worst, tol)


def _check_fock_positivity(ctx, rng) -> dict:
    from .fock import build_truncation, verify_positivity
    from .sampling import random_cylinder_function
    g, st = ctx["g"], ctx["state"]
    ft = build_truncation(g, st.epsilon, ctx["beta"], ctx["levels"], ctx["depth"])
    worst_eig, worst_res = 0.0, 0.0
    for _ in range(5):
        a = random_cylinder_function(g, rng, max_depth=ctx["excess"])
        rep = verify_positivity(ft, a)
        worst_eig = min(worst_eig, rep.min_eigenvalue)
        worst_res = max(worst_res, rep.higher_residual, rep.level0_residual)
    ok = worst_eig >= -1e-10 and worst_res <= 1e-10
    return _verdict("fock_positivity", ok, worst_eig, 1e-10, higher_level_residual=worst_res)


CHECKS = [_check_f_beta, _check_resolvent, _check_kms, _check_positivity, _check_tck,
          _check_fock, _check_fock_positivity]


def cmd_verify(args) -> int:
    from .kms import KmsState
    g = load_graph(args.graph)
    beta = parse_beta(args.beta)
    if args.levels > args.depth:
        raise InputError("--levels must not exceed --depth")
    eps = parse_epsilon(g, args.epsilon, args.depth)
    st = KmsState(g, beta, eps, normalize=True)
    ctx = {"g": g, "beta": beta, "state": st, "tol": args.tol, "samples": args.samples,
           "levels": args.levels, "depth": args.depth,
           "excess": max(0, min(2, args.depth - args.levels))}
    seeds = np.random.SeedSequence(args.seed).spawn(len(CHECKS))

    def run(i):
        out = CHECKS[i](ctx, np.random.default_rng(seeds[i]))
        print(json.dumps(_clean(out), sort_keys=True), file=sys.stderr, flush=True)
        return out

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        verdicts = list(pool.map(run, range(len(CHECKS))))
    inputs = {"graph": g.to_json(), "beta": beta, "epsilon": args.epsilon, "depth": args.depth,
              "levels": args.levels, "seed": args.seed, "samples": args.samples}
    report = make_report("verify", inputs, {"checks": verdicts}, {"tol": args.tol},
                         {v["check"]: v["passed"] for v in verdicts})
    emit(report, args.json)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---- example torus -----------------------------------------------------------------------------

def _parse_matrix(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        raise InputError(f"cannot parse matrix {text!r}") from None
    if isinstance(obj, int):
        obj = [[obj]]
    if not (isinstance(obj, list) and obj and all(isinstance(r, list) for r in obj)):
        raise InputError("matrix must be an integer or a JSON list of rows")
    return obj


def cmd_example_torus(args) -> int:
    from itertools import product
    from .torus import MonomialElement, TorusSystem, evaluate_monomial, f_beta_const
    sys_ = TorusSystem(_parse_matrix(args.matrix))
    beta = parse_beta(args.beta)
    rows = []
    rng = range(-args.max_shift, args.max_shift + 1)
    zero = (0,) * sys_.d
    for k in range(args.max_k + 1):
        for r in product(rng, repeat=sys_.d):
            el = MonomialElement(tuple(r), k, k, zero)
            val = evaluate_monomial(sys_, beta, el)
            rows.append({"m": list(r), "n": list(zero), "k": k, "l": k,
                         "value": float(np.real(val.value)), "tail": val.tail})
    results = {"N": sys_.N, "d": sys_.d, "beta_c": sys_.beta_c,
               "f_beta": f_beta_const(sys_, beta), "monomials": rows}
    emit(make_report("example torus", {"matrix": [list(r) for r in sys_.A], "beta": beta,
                                       "max_k": args.max_k, "max_shift": args.max_shift},
                     results, {}, {}), args.json)
    return EXIT_OK


# ---- entry point ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kmslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kmslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, state=True):
        sp.add_argument("--graph", required=True, help="graph JSON file or bundled name (e.g. dumbbell:2,3)")
        sp.add_argument("--json", metavar="OUT", help="also write the report to OUT")
        if state:
            sp.add_argument("--beta", required=True, help="inverse temperature (REAL or ln(X))")
            sp.add_argument("--epsilon", default="uniform", help="FILE | point:VERTEX | uniform")
            sp.add_argument("--depth", type=int, default=6, help="cylinder depth of epsilon")

    a = sub.add_parser("analyze", help="components, rho(A), beta_c, beta_l, growth constant")
    common(a, state=False)
    a.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("state", help="evaluate the KMS state of a measure")
    common(s)
    s.add_argument("--elements", metavar="FILE", help="JSON list of Toeplitz elements to evaluate")
    s.add_argument("--word-length", type=int, default=2, help="word length for the default table")
    s.set_defaults(func=cmd_state)

    v = sub.add_parser("verify", help="run the invariant suite")
    common(v)
    v.add_argument("--levels", type=int, default=4, help="Fock truncation level cap N")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--tol", type=float, default=DEFAULT_TOL)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("example", help="worked examples")
    esub = e.add_subparsers(dest="example", required=True)
    t = esub.add_parser("torus", help="monomial values for z -> z^A on the torus")
    t.add_argument("--matrix", required=True, help="integer or JSON list of rows, e.g. '[[2,1],[0,2]]'")
    t.add_argument("--beta", required=True)
    t.add_argument("--max-k", type=int, default=2)
    t.add_argument("--max-shift", type=int, default=4)
    t.add_argument("--json", metavar="OUT")
    t.set_defaults(func=cmd_example_torus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (SubcriticalTemperature, SinkError, NoCycleError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (InputError, GraphFormatError, PreconditionError, ResolutionError,
            EnumerationCapError, DimensionCapError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    # wall time goes to stderr so reports stay byte-identical across runs
    print(f"wall time: {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
