"""Command-line front end.

Every command prints one JSON report. The only non-deterministic field is
``header.timestamp``; everything else is a pure function of the inputs.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 identity
violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .errors import FredflowError, IdentityViolation, InputError, NumericalError
from .grassmann import delta1, pair_index
from .invariant import stable_space_graph, stable_space_limit_report, unstable_space
from .linalg import as_matrix
from .presets import PRESETS, PathSpec, battery_member, preset_spec

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_IDENTITY = 0, 2, 3, 4


def _version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    return x


def _matrix(M):
    M = np.asarray(M)
    return _jsonable(M)


def _report(command, body):
    header = {"tool": "fredflow", "version": _version(),
              "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    return json.dumps(_jsonable({"header": header, "command": command, **body}), sort_keys=True, indent=2)


def _load_spec(args):
    if args.spec is not None:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read spec file: {exc}") from exc
        return PathSpec.from_json(text)
    if args.preset is None:
        raise InputError("give a spec file or --preset")
    params = {}
    if args.preset == "random-battery":
        params = {"seed": args.seed, "count": args.count}
    elif args.preset == "rotation":
        params = {"angle": args.angle}
    elif args.preset == "scalar-tanh" and args.reversed:
        params = {"reversed": True}
    elif args.preset == "patch":
        if args.dim is None:
            raise InputError("the patch preset needs --dim")
        params = {"x": json.loads(args.x or "[]"), "y": json.loads(args.y or "[]")}
        return preset_spec("patch", dim=args.dim, **params)
    return preset_spec(args.preset, **params)


def _paths(args):
    spec = _load_spec(args)
    return spec, spec.paths()


def _write_csv(fname, header, rows):
    with open(fname, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


# -- commands ---------------------------------------------------------------


def cmd_projector(args):
    from .spectral import spectral_projectors

    if args.matrix is not None:
        mats = {"matrix": as_matrix(json.loads(args.matrix))}
    else:
        _, paths = _paths(args)
        p = paths[0]
        mats = {"limit_minus": p.limit_minus, "limit_plus": p.limit_plus}
    out = {}
    for key, A in mats.items():
        if A is None:
            raise InputError(f"path has no {key}")
        sp = spectral_projectors(A)
        out[key] = {"p_plus": _matrix(sp.p_plus.matrix), "p_minus": _matrix(sp.p_minus.matrix),
                    "rank_plus": sp.rank_plus, "rank_minus": sp.rank_minus, "margin": sp.margin,
                    "idempotency_residual": sp.p_plus.residual, "nodes": sp.nodes}
    return {"result": out}, EXIT_OK


def _stable_one(p, args):
    rep = stable_space_limit_report(p, args.horizon, args.ode_tol)
    Ws = rep["subspace"]
    Wu = unstable_space(p, args.horizon, args.ode_tol)
    res = {"name": p.name, "dim": p.n,
           "stable": {"dim": Ws.dim, "basis": _matrix(Ws.basis), "horizon_used": rep["T"],
                      "cauchy_delta": rep["delta"], "decay_rate": rep["rate"]},
           "unstable": {"dim": Wu.dim, "basis": _matrix(Wu.basis)}}
    try:
        Wg, g, d = stable_space_graph(p)
        res["graph"] = {"tau": d.tau, "certificate": d.certificate, "c": d.c, "lambda": d.lam,
                        "nu": d.nu, "S": _matrix(g.S), "norm": g.norm, "envelope": g.norm_bound,
                        "delta1_vs_limit": delta1(Wg, Ws) if Wg.dim == Ws.dim else None}
    except NumericalError as exc:
        res["graph"] = {"error": str(exc), "diagnostics": exc.diagnostics}
    return res, Ws


def cmd_stable(args):
    _, paths = _paths(args)
    results = []
    for p in paths:
        res, Ws = _stable_one(p, args)
        results.append(res)
        if args.csv and len(paths) == 1:
            from .invariant import UnitTransitions

            tr = UnitTransitions(p)
            T = int(min(args.horizon, 30))
            _, gs = tr.push_forward(Ws.basis, T) if Ws.dim else (None, [0.0] * (T + 1))
            Vc = Ws.complement()
            _, gc = tr.push_forward(Vc.basis, T) if Vc.dim else (None, [0.0] * (T + 1))
            _write_csv(args.csv, ["t", "gain_stable", "gain_complement"],
                       [(t, gs[t], gc[t]) for t in range(T + 1)])
    return {"result": results[0] if len(results) == 1 else results}, EXIT_OK


def _index_one(p, args):
    from .operator import assemble, numeric_index

    op = assemble(p, args.window, args.grid_step, args.tail_tol)
    rep = numeric_index(op, args.rank_tol, True, args.horizon, args.ode_tol)
    return op, rep


def cmd_index(args):
    _, paths = _paths(args)
    results = []
    for p in paths:
        op, rep = _index_one(p, args)
        d = rep.to_dict()
        d["name"] = p.name
        results.append(d)
        if args.csv and len(paths) == 1 and rep.kernel_basis is not None:
            K = rep.kernel_basis
            head = ["t"] + [f"u{j}_{i}" for j in range(K.shape[0]) for i in range(p.n)]
            rows = [[t] + [K[j, s, i] for j in range(K.shape[0]) for i in range(p.n)]
                    for s, t in enumerate(op.times)]
            _write_csv(args.csv, head, rows)
    return {"result": results[0] if len(results) == 1 else results}, EXIT_OK


def cmd_sf(args):
    from .flow import spectral_flow_asymptotic

    _, paths = _paths(args)
    results = []
    for p in paths:
        r = spectral_flow_asymptotic(p, tail_tol=args.tail_tol)
        d = r.to_dict()
        d["name"] = p.name
        results.append(d)
        if args.csv and len(paths) == 1:
            ts = np.linspace(-2 * r.delta, 2 * r.delta, 401)
            rows = [[t] + sorted(np.linalg.eigvals(p(t)).real) for t in ts]
            _write_csv(args.csv, ["t"] + [f"re_lambda_{i}" for i in range(p.n)], rows)
    return {"result": results[0] if len(results) == 1 else results}, EXIT_OK


def _verify_path(p, opts):
    from .flow import verify_identity

    try:
        rep = verify_identity(p, raise_on_violation=False, T=opts["window"], h=opts["grid_step"],
                              rank_tol=opts["rank_tol"], horizon=opts["horizon"],
                              ode_tol=opts["ode_tol"], tail_tol=opts["tail_tol"])
        d = rep.to_dict()
    except FredflowError as exc:
        d = {"holds": False, "error": type(exc).__name__, "message": str(exc)}
    d["name"] = p.name
    return d


def _verify_member(job):
    seed, index, opts = job
    return _verify_path(battery_member(seed, index), opts)


def cmd_verify(args):
    spec, _ = _paths(args) if args.spec is not None or args.preset != "random-battery" else (None, None)
    opts = {"window": args.window, "grid_step": args.grid_step, "rank_tol": args.rank_tol,
            "horizon": args.horizon, "ode_tol": args.ode_tol, "tail_tol": args.tail_tol}
    if spec is None:
        jobs = [(args.seed, i, opts) for i in range(args.count)]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as ex:
                results = list(ex.map(_verify_member, jobs))
        else:
            results = [_verify_member(j) for j in jobs]
    else:
        results = [_verify_path(p, opts) for p in spec.paths()]
    for i, r in enumerate(results):
        r["id"] = i
    passes = sum(bool(r["holds"]) for r in results)
    body = {"result": {"paths": results, "passes": passes, "total": len(results),
                       "summary": f"{passes}/{len(results)} identity passes"}}
    return body, EXIT_OK if passes == len(results) else EXIT_IDENTITY


def cmd_demo(args):
    from .flow import patch_path, spectral_flow_asymptotic
    from .grassmann import Subspace
    from .operator import assemble, numeric_index
    from .presets import scalar_tanh, tanh_diag
    from .propagator import OperatorPath

    checks = []

    def record(name, got, expected):
        checks.append({"example": name, "value": got, "expected": expected, "ok": got == expected})

    td = tanh_diag()
    rep = stable_space_limit_report(td)
    record("tanh-diag stable space is span{e2}",
           bool(rep["subspace"].equals(Subspace.coordinate(2, [1]), 1e-8)), True)
    record("tanh-diag unstable space is span{e2}",
           bool(unstable_space(td).equals(Subspace.coordinate(2, [1]), 1e-8)), True)
    const = OperatorPath.constant(np.diag([-1.0, 1.0]), (-40, 40))
    record("constant diag(-1, 1) stable space is span{e1}",
           bool(stable_space_limit_report(const)["subspace"].equals(Subspace.coordinate(2, [0]))), True)
    for name, p, expect in (("scalar tanh", scalar_tanh(), (0, 1, -1, 1)),
                            ("reversed scalar tanh", scalar_tanh(True), (1, 0, 1, -1)),
                            ("tanh-diag", td, (1, 1, 0, 0))):
        r = numeric_index(assemble(p))
        sf = spectral_flow_asymptotic(p).sf
        record(f"{name}: (ker, coker, index, sf)", [r.ker_dim, r.coker_dim, r.index, sf], list(expect))
    X = Subspace.span(np.array([[1.0], [1.0]]))
    Y = Subspace.coordinate(2, [1])
    pp = patch_path(X, Y)
    Ws = stable_space_limit_report(pp)["subspace"]
    Wu = unstable_space(pp)
    record("patch path recovers (X, Y)", bool(delta1(Ws, X) < 1e-6 and delta1(Wu, Y) < 1e-6), True)
    record("patch path pair index", pair_index(Ws, Wu).index, 0)
    ok = all(c["ok"] for c in checks)
    return {"result": {"examples": checks, "all_ok": ok}}, EXIT_OK if ok else EXIT_IDENTITY


COMMANDS = {"projector": cmd_projector, "stable": cmd_stable, "index": cmd_index,
            "sf": cmd_sf, "verify": cmd_verify, "demo": cmd_demo}


def build_parser():
    ap = argparse.ArgumentParser(prog="fredflow", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("spec", nargs="?", help="JSON path spec file")
    ap.add_argument("--preset", choices=PRESETS)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--dim", type=int)
    ap.add_argument("--angle", type=float, default=1.0)
    ap.add_argument("--reversed", action="store_true", help="scalar-tanh: use -tanh t")
    ap.add_argument("--x", help="patch preset: JSON list of vectors spanning X")
    ap.add_argument("--y", help="patch preset: JSON list of vectors spanning Y")
    ap.add_argument("--matrix", help="projector: JSON matrix instead of a path")
    ap.add_argument("--rank-tol", type=float, default=1e-8)
    ap.add_argument("--ode-tol", type=float, default=1e-10)
    ap.add_argument("--tail-tol", type=float, default=1e-6)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--grid-step", type=float, default=None)
    ap.add_argument("--window", type=float, default=None, help="half-width T of the grid window")
    ap.add_argument("--jobs", type=int, default=1, help="verify: worker processes for batteries")
    ap.add_argument("--out", help="write the JSON report here instead of stdout")
    ap.add_argument("--csv", help="optional CSV time-series dump")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        body, code = COMMANDS[args.command](args)
    except IdentityViolation as exc:
        body, code = {"error": {"type": "IdentityViolation", "message": str(exc), "report": exc.report}}, EXIT_IDENTITY
    except InputError as exc:
        diag = getattr(exc, "diagnostics", {})
        body, code = {"error": {"type": type(exc).__name__, "message": str(exc), "diagnostics": diag}}, EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        diag = getattr(exc, "diagnostics", {})
        body, code = {"error": {"type": type(exc).__name__, "message": str(exc), "diagnostics": diag}}, EXIT_NUMERICAL
    except (ValueError, json.JSONDecodeError) as exc:
        body, code = {"error": {"type": "InputError", "message": str(exc), "diagnostics": {}}}, EXIT_INPUT
    text = _report(args.command, body)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
