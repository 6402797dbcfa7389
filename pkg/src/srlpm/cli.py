"""Command-line entry point: dense, solve, eval, sweep, spectrum.

Every run writes a JSON manifest next to its outputs recording the
effective arguments and a content hash of the inputs, so runs can be
reproduced byte-for-byte (modulo recorded wall time).
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import altmin as altmin_mod
from . import fileio, metrics
from . import quadmin as quadmin_mod
from . import rsvd as rsvd_mod
from .dense import singular_spectrum, solve_fixed_point, truncated_svd_error
from .graph_io import EdgeListParseError, load_graph_file
from .limits import DenseCapExceeded, SparsityGuardError, ensure_dense_ok

_log = logging.getLogger(__name__)

SOLVERS = ("altmin", "quadmin", "rsvd")


class UsageError(ValueError):
    """Bad arguments beyond what argparse can check."""


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path, obj) -> None:
    fileio.atomic_write_bytes(path, json.dumps(obj, indent=2).encode() + b"\n")


def _write_manifest(out_path, subcommand, args_ns, outputs, extra=None) -> dict:
    params = {k: v for k, v in vars(args_ns).items() if k != "func"}
    manifest = {
        "subcommand": subcommand,
        "dataset": params.get("graph"),
        "params": params,
        "outputs": [str(p) for p in outputs],
        "input_sha256": {},
    }
    for key in ("graph", "reference", "factors", "dense"):
        path = params.get(key)
        if path:
            manifest["input_sha256"][key] = _sha256_file(path)
    if extra:
        manifest.update(extra)
    _write_json(f"{out_path}.manifest.json", manifest)
    return manifest


def _write_trace_csv(path, rows, columns) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, restval="")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    fileio.atomic_write_bytes(path, buf.getvalue().encode())


def _load_graph(ns):
    el, adj = load_graph_file(
        ns.graph, symmetrize=ns.symmetrize, drop_self_loops=ns.drop_self_loops
    )
    return el, adj


def _parse_int_list(text: str, what: str) -> list[int]:
    items = [tok for tok in text.replace(",", " ").split() if tok]
    if not items:
        raise UsageError(f"empty {what} list")
    try:
        return [int(tok) for tok in items]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None


def cmd_dense(ns) -> int:
    el, adj = _load_graph(ns)
    ensure_dense_ok(adj.n, "dense solve")
    sim = solve_fixed_point(adj, ns.c, tol=ns.tol, max_iter=ns.max_iter)
    fileio.write_dense(ns.out, sim)
    _write_json(f"{ns.out}.idmap.json", {str(k): v for k, v in el.id_map.items()})
    _write_manifest(
        ns.out, "dense", ns,
        [ns.out, f"{ns.out}.idmap.json"],
        extra={"iterations": sim.iterations, "final_step": sim.residual_c,
               "converged": sim.converged, "n": adj.n},
    )
    print(f"n={adj.n} iterations={sim.iterations} "
          f"final_step={sim.residual_c:.3e} converged={sim.converged}")
    return 0


def _run_solver(solver, adj, ns, trace_rows):
    t0 = time.perf_counter()
    if solver == "altmin":
        cfg = altmin_mod.AltMinConfig(
            rank=ns.rank, outer_iters=ns.outer, inner_iters=ns.inner,
            seed=ns.seed, stop_tol=ns.stop_tol, c=ns.c,
        )
        factor = altmin_mod.run_altmin(adj, cfg, callback=trace_rows.append)
        columns = ["iter", "du_rel", "dv_rel"]
    elif solver == "quadmin":
        cfg = quadmin_mod.QuadMinConfig(
            rank=ns.rank, newton_iters=ns.newton_iters, gmres_iters=ns.gmres_iters,
            gmres_tol=ns.gmres_tol, seed=ns.seed, init_scale=ns.init_scale,
            c=ns.c, residual_mode=ns.residual_mode,
        )
        factor = quadmin_mod.run_quadmin(adj, cfg, callback=trace_rows.append)
        columns = ["iter", "grad_norm", "step_norm", "gmres_residual", "f_exact"]
    else:
        factor = rsvd_mod.run_rsvd(
            adj, ns.c, ns.rank, p=ns.oversample, k_max=ns.max_iter,
            seed=ns.seed, stop_tol=ns.tol, callback=trace_rows.append,
        )
        columns = ["iter", "sigma_top", "sigma_change"]
    return factor, columns, time.perf_counter() - t0


def cmd_solve(ns) -> int:
    el, adj = _load_graph(ns)
    if ns.rank < 1 or ns.rank > adj.n:
        raise UsageError(f"rank must lie in [1, {adj.n}], got {ns.rank}")
    trace_rows: list[dict] = []
    factor, columns, elapsed = _run_solver(ns.solver, adj, ns, trace_rows)
    fileio.write_factors(ns.out, factor, ns.c)
    trace_path = f"{ns.out}.trace.csv"
    _write_trace_csv(trace_path, trace_rows, columns)
    _write_json(f"{ns.out}.idmap.json", {str(k): v for k, v in el.id_map.items()})
    _write_manifest(
        ns.out, "solve", ns,
        [ns.out, trace_path, f"{ns.out}.idmap.json"],
        extra={"wall_time_s": elapsed, "n": adj.n},
    )
    print(f"solver={ns.solver} n={adj.n} rank={ns.rank} "
          f"iterations={len(trace_rows)} wall_time_s={elapsed:.2f}")
    return 0


def _sidecar_manifest(path) -> dict:
    try:
        with open(f"{path}.manifest.json", "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return {}


def _evaluate(reference_path, factors_path, top_ns) -> metrics.EvalReport:
    sim = fileio.read_dense(reference_path)
    factor, c = fileio.read_factors(factors_path)
    if factor.n != sim.n:
        raise UsageError(
            f"node count mismatch: reference has n={sim.n}, factors have n={factor.n}"
        )
    for n_top in top_ns:
        if n_top < 1 or n_top > sim.n - 1:
            raise UsageError(f"top-N must lie in [1, {sim.n - 1}], got {n_top}")
    side = _sidecar_manifest(factors_path)
    params = side.get("params", {})
    report = metrics.EvalReport(
        chebyshev_error=metrics.chebyshev_error(sim, factor),
        psi={n_top: metrics.psi(sim, factor, n_top) for n_top in top_ns},
        rank=factor.rank,
        solver=params.get("solver", "unknown"),
        dataset=str(side.get("dataset") or ""),
        seed=int(params.get("seed", -1)),
        c=c,
        wall_time_s=float(side.get("wall_time_s", 0.0)),
    )
    return report


def cmd_eval(ns) -> int:
    top_ns = _parse_int_list(ns.top_n, "top-n")
    report = _evaluate(ns.reference, ns.factors, top_ns)
    _write_json(ns.out, report.to_json_dict())
    outputs = [ns.out]
    if ns.csv:
        _append_csv_row(ns.csv, report)
        outputs.append(ns.csv)
    _write_manifest(ns.out, "eval", ns, outputs)
    print(f"chebyshev_error={report.chebyshev_error:.6f} "
          + " ".join(f"psi{n}={v:.4f}" for n, v in report.psi.items()))
    return 0


def _append_csv_row(path, report) -> None:
    new = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(metrics.CSV_FIELDS)
        writer.writerow(report.csv_row())


def _sweep_cell(payload: dict) -> dict:
    """One (rank, seed) cell; isolated so sweeps survive per-cell failures."""
    ns = argparse.Namespace(**payload["ns"])
    ns.rank = payload["rank"]
    ns.seed = payload["seed"]
    ns.out = payload["out"]
    try:
        _, adj = _load_graph(ns)
        if ns.rank < 1 or ns.rank > adj.n:
            raise UsageError(f"rank must lie in [1, {adj.n}], got {ns.rank}")
        trace_rows: list[dict] = []
        factor, columns, elapsed = _run_solver(ns.solver, adj, ns, trace_rows)
        fileio.write_factors(ns.out, factor, ns.c)
        _write_trace_csv(f"{ns.out}.trace.csv", trace_rows, columns)
        sim = fileio.read_dense(ns.reference)
        if factor.n != sim.n:
            raise UsageError(f"reference n={sim.n} != graph n={factor.n}")
        report = metrics.EvalReport(
            chebyshev_error=metrics.chebyshev_error(sim, factor),
            psi={10: metrics.psi(sim, factor, 10)},
            rank=ns.rank, solver=ns.solver, dataset=str(ns.graph),
            seed=ns.seed, c=ns.c, wall_time_s=elapsed,
        )
        return {"rank": ns.rank, "seed": ns.seed,
                "chebyshev_error": report.chebyshev_error,
                "psi10": report.psi[10], "wall_time": elapsed, "error": ""}
    except Exception as exc:  # record and keep sweeping
        return {"rank": payload["rank"], "seed": payload["seed"],
                "chebyshev_error": "", "psi10": "", "wall_time": "",
                "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(ns) -> int:
    ranks = _parse_int_list(ns.ranks, "rank")
    seeds = _parse_int_list(ns.seeds, "seed")
    os.makedirs(ns.out_dir, exist_ok=True)
    cells = []
    ns_dict = {k: v for k, v in vars(ns).items() if k != "func"}
    for rank in ranks:
        for seed in seeds:
            out = os.path.join(ns.out_dir, f"{ns.solver}_r{rank}_s{seed}.srlf")
            cells.append({"ns": ns_dict, "rank": rank, "seed": seed, "out": out})
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    agg = os.path.join(ns.out_dir, "sweep.csv")
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["rank", "seed", "chebyshev_error", "psi10", "wall_time", "error"]
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    fileio.atomic_write_bytes(agg, buf.getvalue().encode())
    _write_manifest(agg, "sweep", ns, [agg] + [c["out"] for c in cells])
    failures = [r for r in rows if r["error"]]
    print(f"sweep cells={len(rows)} failures={len(failures)} -> {agg}")
    for row in failures:
        print(f"  rank={row['rank']} seed={row['seed']}: {row['error']}", file=sys.stderr)
    return 0


def cmd_spectrum(ns) -> int:
    sim = fileio.read_dense(ns.dense)
    sig_full = singular_spectrum(sim.values, shift_identity=False)
    sig_shift = singular_spectrum(sim.values, shift_identity=True)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["index", "sigma_S", "sigma_S_minus_I"])
    for i, (a, b) in enumerate(zip(sig_full, sig_shift)):
        writer.writerow([i, a, b])
    fileio.atomic_write_bytes(ns.out, buf.getvalue().encode())
    outputs = [ns.out]
    if ns.svd_ranks:
        ranks = _parse_int_list(ns.svd_ranks, "rank")
        err_path = f"{ns.out}.svd_error.csv"
        buf2 = io.StringIO()
        writer2 = csv.writer(buf2)
        writer2.writerow(["rank", "chebyshev_error"])
        for r in ranks:
            writer2.writerow([r, truncated_svd_error(sim.values, r)])
        fileio.atomic_write_bytes(err_path, buf2.getvalue().encode())
        outputs.append(err_path)
    _write_manifest(ns.out, "spectrum", ns, outputs)
    print(f"n={sim.n} wrote {', '.join(outputs)}")
    return 0


def _add_graph_flags(parser) -> None:
    parser.add_argument("--graph", required=True, help="SNAP edge-list file")
    parser.add_argument("--symmetrize", action=argparse.BooleanOptionalAction,
                        default=False, help="insert reverse edges")
    parser.add_argument("--drop-self-loops", action=argparse.BooleanOptionalAction,
                        default=True, help="remove (i, i) edges")


def _add_solver_flags(parser, with_rank: bool = True) -> None:
    parser.add_argument("--c", type=float, default=0.8, help="decay constant")
    if with_rank:
        parser.add_argument("--rank", type=int, required=True)
    parser.add_argument("--seed", type=int, default=0)
    # altmin
    parser.add_argument("--outer", type=int, default=20, help="altmin outer iterations")
    parser.add_argument("--inner", type=int, default=5, help="altmin inner iterations")
    parser.add_argument("--stop-tol", type=float, default=1e-6,
                        help="altmin relative factor-change stop")
    # quadmin
    parser.add_argument("--newton-iters", type=int, default=30)
    parser.add_argument("--gmres-iters", type=int, default=15)
    parser.add_argument("--gmres-tol", type=float, default=1e-6)
    parser.add_argument("--init-scale", type=float, default=None,
                        help="quadmin init stddev (default 1/sqrt(rank))")
    parser.add_argument("--residual-mode", choices=["none", "exact-dense"],
                        default="none")
    # rsvd
    parser.add_argument("--oversample", type=int, default=10)
    parser.add_argument("--max-iter", type=int, default=50, help="rsvd iteration cap")
    parser.add_argument("--tol", type=float, default=1e-6, help="rsvd sigma-change stop")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlpm",
        description="Low-parametric SimRank approximation toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_dense = sub.add_parser("dense", help="dense fixed-point reference solve")
    _add_graph_flags(p_dense)
    p_dense.add_argument("--c", type=float, default=0.8)
    p_dense.add_argument("--tol", type=float, default=1e-12)
    p_dense.add_argument("--max-iter", type=int, default=500)
    p_dense.add_argument("--out", required=True)
    p_dense.set_defaults(func=cmd_dense)

    p_solve = sub.add_parser("solve", help="run a factored solver")
    p_solve.add_argument("solver", choices=SOLVERS)
    _add_graph_flags(p_solve)
    _add_solver_flags(p_solve)
    p_solve.add_argument("--out", required=True)
    p_solve.set_defaults(func=cmd_solve)

    p_eval = sub.add_parser("eval", help="evaluate factors against a dense reference")
    p_eval.add_argument("--reference", required=True, help="SRDS1 dense file")
    p_eval.add_argument("--factors", required=True, help="SRLF1 factor file")
    p_eval.add_argument("--top-n", default="10", help="comma-separated N values")
    p_eval.add_argument("--out", required=True, help="report JSON path")
    p_eval.add_argument("--csv", default=None, help="append a CSV row here")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="solver x rank x seed grid")
    p_sweep.add_argument("solver", choices=SOLVERS)
    _add_graph_flags(p_sweep)
    _add_solver_flags(p_sweep, with_rank=False)
    p_sweep.add_argument("--reference", required=True, help="SRDS1 dense file")
    p_sweep.add_argument("--ranks", required=True, help="comma-separated ranks")
    p_sweep.add_argument("--seeds", default="0", help="comma-separated seeds")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_spec = sub.add_parser("spectrum", help="singular values and truncated-SVD errors")
    p_spec.add_argument("--dense", required=True, help="SRDS1 dense file")
    p_spec.add_argument("--svd-ranks", default=None)
    p_spec.add_argument("--out", required=True)
    p_spec.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return ns.func(ns)
    except UsageError as exc:
        _emit_error(exc)
        return 2
    except (EdgeListParseError, DenseCapExceeded, SparsityGuardError,
            ValueError, OSError) as exc:
        _emit_error(exc)
        return 1


def _emit_error(exc) -> None:
    print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
