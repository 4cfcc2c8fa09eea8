"""Config-driven experiment runner.

``relent <kind> --config run.yaml --out results/`` runs one experiment and
writes ``report.json``, one or more CSV tables and ``run.meta.json`` (the
only file holding timestamps).  ``relent verify --report results/report.json``
re-hashes the recorded inputs.

Exit codes: 0 success, 2 invalid input, 3 nonconvergence or a void
certificate.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io, rng
from .errors import ComputationError, RelentError, ValidationError

log = logging.getLogger("relent")

KINDS = ("sft-info", "mmre", "orthogonality", "pqs-gain", "xi", "truncation", "product-coding",
         "standardmap-certify", "standardmap-shadow", "standardmap-lyapunov")

_POS_INT = {"type": "integer", "minimum": 1}
_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_OMEGA = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_MAP = {"k": {"type": "number", "minimum": 0},
        "f_choice": {"enum": ["zero", "omega1", "eps_sin", "mixed"]},
        "eps": {"type": "number"},
        "omega": _OMEGA}
_JOIN_INPUTS = (("code", "mu1", "mu2"), ("nu",))

# kind -> (required inputs, optional inputs, param properties, required params)
SPECS = {
    "sft-info": (("graph",), (), {}, ()),
    "mmre": (("problem",), (), {"tol": _POS_NUM, "m_max": _POS_INT}, ()),
    "orthogonality": (*_JOIN_INPUTS, {"w": _POS_INT, "n_samples": _POS_INT}, ("n_samples",)),
    "xi": (*_JOIN_INPUTS, {"w": {"type": "integer", "minimum": 8}, "n_samples": _POS_INT},
           ("n_samples",)),
    "pqs-gain": (*_JOIN_INPUTS, {"w": {"type": "integer", "minimum": 8}, "length": _POS_INT,
                                 "block_length": _POS_INT, "n_xi": _POS_INT},
                 ("length", "block_length", "n_xi")),
    "truncation": (("code", "measure"), (), {"block_length": _POS_INT}, ("block_length",)),
    "product-coding": (("base", "fiber"), (), {
        "overlap": {"type": "array", "items": {"type": "array", "items": {"type": "string"},
                                               "minItems": 2, "maxItems": 2}},
        "seed_symbol": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
    }, ("overlap",)),
    "standardmap-certify": ((), (), {**_MAP, "depth": _POS_INT,
                                     "n_random_omega": {"type": "integer", "minimum": 0}},
                            ("k", "depth")),
    "standardmap-shadow": ((), (), {**_MAP, "itinerary": {"type": "array", "minItems": 1,
                                                          "items": {"enum": [1, 2]}},
                                    "length": _POS_INT}, ("k",)),
    "standardmap-lyapunov": ((), (), {**_MAP, "steps": {"type": "integer", "minimum": 1000},
                                      "x": _OMEGA, "chi": {"type": "number", "minimum": 0}},
                             ("k", "steps")),
}


def config_schema(kind: str) -> dict:
    req_in, opt_in, props, req_par = SPECS[kind]
    return {
        "type": "object",
        "properties": {
            "experiment": {"const": kind},
            "seed": {"type": "integer", "minimum": 0},
            "inputs": {"type": "object",
                       "properties": {k: {"type": "string"} for k in req_in + opt_in},
                       "required": list(req_in), "additionalProperties": False},
            "params": {"type": "object", "properties": props, "required": list(req_par),
                       "additionalProperties": False},
        },
        "required": ["seed"] + (["inputs"] if req_in else []) + (["params"] if req_par else []),
        "additionalProperties": False,
    }


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


class Run:
    """State shared by one experiment: loader, output tables and exit status."""

    def __init__(self, kind, config, base_dir, out_dir, threads):
        self.kind = kind
        self.config = config
        self.base = Path(base_dir)
        self.out = Path(out_dir)
        self.threads = threads
        self.loader = io.Loader()
        self.tables: dict = {}
        self.extra_files: dict = {}
        self.status = 0

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def params(self) -> dict:
        return self.config.get("params", {})

    def input_path(self, name):
        return self.config.get("inputs", {}).get(name)

    def load(self, what, name):
        ref = self.input_path(name)
        return getattr(self.loader, what)(ref, self.base)

    def table(self, name, header, rows):
        self.tables[name] = (header, rows)


# -- experiments ------------------------------------------------------------------------

def _sft_info(run: Run) -> dict:
    from .measures import entropy_rate
    from .shift import (is_irreducible, parry_measure, perron, restrict_to_component,
                        strongly_connected_components, topological_entropy)
    sft = run.load("graph", "graph")
    comps = strongly_connected_components(sft)
    rows = []
    for cid, members in enumerate(comps.members):
        h = 0.0
        if comps.nontrivial[cid]:
            h = perron(restrict_to_component(sft, cid, comps)).entropy
        rows.append((cid, len(members), bool(comps.nontrivial[cid]), h,
                     " ".join(str(s) for s in members)))
    run.table("components", ("component", "size", "nontrivial", "entropy", "members"), rows)
    out = {"n_symbols": sft.n_symbols, "n_edges": sft.n_edges,
           "pruned": [str(s) for s in sft.pruned], "irreducible": is_irreducible(sft),
           "topological_entropy": topological_entropy(sft)}
    if out["irreducible"]:
        pd = perron(sft)
        mu = parry_measure(sft)
        out.update(perron_value=pd.value, parry_stationarity_residual=mu.stationarity_residual,
                   parry_entropy=entropy_rate(mu))
    return out


def _mmre(run: Run) -> dict:
    from .mmre import build_lift_constraints, solve_mmre
    code, nu, order = run.load("problem", "problem")
    tol = float(run.params.get("tol", 1e-8))
    m_max = int(run.params.get("m_max", order))
    rows = []
    last = None
    best = -math.inf
    for m in range(order, max(order, m_max) + 1):
        sol = solve_mmre(build_lift_constraints(code, nu, m), tol=tol)
        rows.append((m, sol.h_rel, sol.objective, sol.upper_bound, sol.feasibility_residual,
                     sol.iterations, sol.converged))
        if sol.h_rel < best - 2 * tol:
            run.status = 3
        best = max(best, sol.h_rel)
        last = sol
        if not sol.converged:
            run.status = 3
    run.table("mmre", ("order", "h_rel", "entropy", "upper_bound", "residual", "iterations",
                       "converged"), rows)
    run.extra_files["solution.yaml"] = {
        "problem_sha256": run.loader.hashes,
        "order": rows[-1][0],
        "block_symbols": [str(s) for s in last.measure.host.symbols],
        "edge_freq": [float(q) for q in last.measure.edge_freq],
        "h_rel": last.h_rel,
        "converged": last.converged,
    }
    return {"h_rel": last.h_rel, "entropy": last.objective, "upper_bound": last.upper_bound,
            "feasibility_residual": last.feasibility_residual, "converged": last.converged,
            "iterations": last.iterations, "sweep": [[r[0], r[1]] for r in rows]}


def _joining(run: Run, w_default: int):
    from .joining import JoiningSampler
    code = run.load("code", "code")
    mu1 = run.load("measure", "mu1")
    mu2 = run.load("measure", "mu2")
    nu = run.load("measure", "nu") if run.input_path("nu") else None
    w = int(run.params.get("w", w_default))
    return JoiningSampler(mu1, mu2, code, w=w, seed=run.seed, nu=nu), w


def _estimate_rows(run, w, n, items):
    run.table("estimates", ("experiment", "quantity", "seed", "w", "n", "estimate", "std_error"),
              [(run.kind, name, run.seed, w, n, est, se) for name, est, se in items])


def _orthogonality(run: Run) -> dict:
    from .joining import coincidence_probability, conditional_equality_gap
    js, w = _joining(run, 64)
    n = int(run.params["n_samples"])
    est = coincidence_probability(js, n)
    gap = conditional_equality_gap(js, n)
    _estimate_rows(run, w, n, [("coincidence", est.value, est.std_error),
                               ("conditional_gap", gap.max_gap, gap.std_error)])
    return {"coincidence": est.value, "coincidence_std_error": est.std_error,
            "relatively_orthogonal_evidence": est.value <= 3 * est.std_error,
            "conditional_gap": gap.max_gap, "gap_std_error": gap.std_error,
            "worst_symbol": str(gap.worst_symbol), "n_in_s": gap.n_in_s}


def _xi(run: Run) -> dict:
    from .joining import xi_estimate
    js, w = _joining(run, 64)
    n = int(run.params["n_samples"])
    xi = xi_estimate(js, n)
    _estimate_rows(run, w, n, [("xi_integral", xi.integral, xi.std_error)])
    return {"xi_integral": xi.integral, "std_error": xi.std_error, "mean_on_s": xi.mean_on_s,
            "s_mass": xi.s_mass, "n_in_s": xi.n_in_s, "min_xi": xi.min_xi}


def _pqs_gain(run: Run) -> dict:
    from .joining import SwitchSampler, pqs_entropy_gain
    js, w = _joining(run, 64)
    p = run.params
    gain = pqs_entropy_gain(SwitchSampler(js), int(p["length"]), int(p["block_length"]),
                            int(p["n_xi"]))
    if gain.violations:
        run.status = 3
    _estimate_rows(run, w, int(p["length"]), [
        ("switched_entropy", gain.switched.value, gain.switched.std_error),
        ("entropy_margin", gain.margin, gain.combined_std),
        ("xi_integral", gain.xi.integral, gain.xi.std_error)])
    return {"h1": gain.h1, "h2": gain.h2, "switched_entropy": gain.switched.value,
            "margin": gain.margin, "xi_integral": gain.xi.integral,
            "combined_std": gain.combined_std, "violations": gain.violations,
            "margin_covers_xi": gain.margin >= gain.xi.integral - 3 * gain.combined_std}


def _truncation(run: Run) -> dict:
    from .codes import truncate_alphabet
    from .measures import entropy_rate, hidden_entropy_bounds
    code = run.load("code", "code")
    mu = run.load("measure", "measure")
    if mu.host != code.source:
        raise ValidationError("measure does not live on the code source")
    b = int(run.params["block_length"])
    rows = []
    exact = True
    for n in range(code.source.n_symbols + 1):
        _, proj, pin = truncate_alphabet(code, n)
        exact &= all(pin.mapping[proj.mapping[s]] == code.mapping[s] for s in code.source.symbols)
        lo, hi = hidden_entropy_bounds(mu, proj, b)
        rows.append((n, lo, hi))
    run.table("truncation", ("level", "lower", "upper"), rows)
    return {"entropy_rate": entropy_rate(mu), "factorization_exact": exact,
            "levels": [[r[0], r[1], r[2]] for r in rows]}


def _product_coding(run: Run) -> dict:
    from .codes import build_product_coding_graph, irreducible_core
    base = run.load("graph", "base")
    fiber = run.load("graph", "fiber")
    pairs = {tuple(p) for p in run.params["overlap"]}
    pcg = build_product_coding_graph(base, fiber, pairs)
    out = pcg.report()
    shown = pcg
    if "seed_symbol" in run.params:
        shown = irreducible_core(pcg, tuple(run.params["seed_symbol"]))
        out["core"] = shown.report()
    run.table("product_edges", ("source_base", "source_fiber", "target_base", "target_fiber"),
              [(a[0], a[1], b[0], b[1]) for a, b in shown.product.edges])
    return out


def _system(run: Run):
    from .standard_map import SkewStandardSystem
    p = run.params
    return SkewStandardSystem(float(p["k"]), p.get("f_choice", "omega1"), float(p.get("eps", 0.0)))


def _certify(run: Run) -> dict:
    from .standard_map import certify_relative_entropy
    p = run.params
    cert = certify_relative_entropy(_system(run), int(p["depth"]), tuple(p.get("omega", (0.0, 0.0))),
                                    int(p.get("n_random_omega", 8)), run.seed, run.threads)
    run.extra_files["certificate.txt"] = "\n".join(cert.transcript) + "\n"
    run.table("certificate", ("omega1", "omega2", "max_final_width", "max_contraction", "forward_ok"),
              list(cert.per_omega))
    if not cert.valid:
        run.status = 3
    return cert.to_dict()


def _itinerary(run: Run, default_length: int):
    p = run.params
    if "itinerary" in p:
        return np.asarray(p["itinerary"], dtype=np.int64)
    n = int(p.get("length", default_length))
    return 1 + (rng.uniforms(run.seed, rng.STREAM_ITINERARY, 0, n) < 0.5).astype(np.int64)


def _shadow(run: Run) -> dict:
    from .standard_map import find_strips, shadow
    system = _system(run)
    strips = find_strips(system.k)
    r = _itinerary(run, 13)
    omega = tuple(run.params.get("omega", (0.0, 0.0)))
    res = shadow(system, omega, r, strips)
    rows = [(ell, x1, x2, int(r[ell])) for ell, (x1, x2) in enumerate(res.orbit)]
    run.table("orbit", ("step", "x1", "x2", "strip"), rows)
    return {"t0": res.t0, "width": res.width, "horizon": res.horizon,
            "widths": list(res.widths), "itinerary": list(res.itinerary), "forward_ok": res.forward_ok}


def _lyapunov(run: Run) -> dict:
    from .standard_map import (base_lyapunov, fiber_lyapunov, horseshoe_lyapunov,
                               hyperbolicity_verdict)
    system = _system(run)
    p = run.params
    omega = tuple(p.get("omega", (0.0, 0.0)))
    steps = int(p["steps"])
    if "x" in p:
        fib = fiber_lyapunov(system, omega, tuple(p["x"]), steps)
        orbit = "forward"
    else:
        fib = horseshoe_lyapunov(system, omega, _itinerary(run, steps)[:steps])
        orbit = "horseshoe"
    base = base_lyapunov(system)
    verdict = hyperbolicity_verdict(fib, base, float(p.get("chi", 0.0)))
    run.table("exponents", ("quantity", "value"),
              [("fiber_plus", fib.plus), ("fiber_minus", fib.minus),
               ("base_plus", base[0]), ("base_minus", base[1])])
    return {"orbit": orbit, "steps": fib.steps, "fiber_plus": fib.plus, "fiber_minus": fib.minus,
            "fiber_sum": fib.plus + fib.minus, "base": list(base), **verdict}


RUNNERS = {
    "sft-info": _sft_info, "mmre": _mmre, "orthogonality": _orthogonality, "xi": _xi,
    "pqs-gain": _pqs_gain, "truncation": _truncation, "product-coding": _product_coding,
    "standardmap-certify": _certify, "standardmap-shadow": _shadow,
    "standardmap-lyapunov": _lyapunov,
}


# -- driver ---------------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def run_experiment(kind: str, config_path, out_dir, threads: int = 1, seed: int | None = None) -> int:
    """Run one experiment and write its outputs; returns the exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    code = 0
    try:
        config = io.load_document(config_path)
        if seed is not None:
            config = copy.deepcopy(config)
            config["seed"] = int(seed)
        io.check_schema(config, config_schema(kind), "config")
        run = Run(kind, config, Path(config_path).parent, out, threads)
        results = RUNNERS[kind](run)
        report = {
            "experiment": kind,
            "artifact_version": artifact_version(),
            "config_hash": io.config_hash(config),
            "config": config,
            "config_dir": str(Path(config_path).parent.resolve()),
            "input_hashes": dict(sorted(run.loader.hashes.items())),
            "status": "ok" if run.status == 0 else "failed",
            "results": results,
        }
        _write_json(out / "report.json", report)
        for name, (header, rows) in run.tables.items():
            io.write_csv(out / f"{name}.csv", header, rows)
        for name, body in run.extra_files.items():
            if isinstance(body, str):
                (out / name).write_text(body)
            else:
                io.dump_yaml(_jsonable(body), out / name)
        code = run.status
    except RelentError as exc:
        code = 3 if isinstance(exc, ComputationError) else 2
        _write_json(out / "error.json", {"reason": exc.reason, "message": str(exc),
                                         "error": type(exc).__name__, "details": exc.details})
        log.error("%s: %s", type(exc).__name__, exc)
    _write_json(out / "run.meta.json", {
        "started": started.isoformat(), "finished": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - t0, "exit_code": code,
    })
    return code


def verify_report(report_path) -> int:
    """0 if every recorded input still hashes to its recorded value, else 2."""
    report = json.loads(Path(report_path).read_text())
    base = Path(report.get("config_dir", "."))
    bad = []
    for name, digest in report.get("input_hashes", {}).items():
        path = Path(name) if Path(name).is_absolute() else base / name
        if not path.exists():
            path = Path(name)
        try:
            now = io.sha256_file(path)
        except OSError:
            now = None
        if now != digest:
            bad.append(name)
    if io.config_hash(report["config"]) != report["config_hash"]:
        bad.append("<config>")
    for name in bad:
        print(f"tampered or missing: {name}")
    if not bad:
        print("all input hashes match")
    return 2 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("verify")
    p.add_argument("--report", required=True, type=Path)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return verify_report(args.report)
    if args.threads < 1:
        print("--threads must be positive", file=sys.stderr)
        return 2
    return run_experiment(args.command, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
