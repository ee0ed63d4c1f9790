"""Scenario runner: every constructor and certifier behind one reproducible CLI.

    loewner-lab <subcommand> --config <path> [--force] [--out <path>] [--seed <u64>]

Configs are JSON or TOML; reports are JSON, sample dumps CSV, and sampled
operations render a PNG figure next to the delimited output.  Exit codes:
0 = pass, 1 = fail (including refusals of theorem preconditions), 2 = error.
Reports are bit-reproducible for a fixed config and seed apart from the
wall_time_s field.  LOEWNER_LAB_THREADS caps the worker count (evaluation
is single-worker; the cap is validated and echoed into the report).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__
from .certify import certify_geraumig, certify_squeezing
from .coeff import (
    coefficient_report,
    functional_L102,
    reachability_bound_check,
)
from .construct import (
    apply_variation,
    chain_from_close_to_identity,
    dilate_chain,
    evolution_to_ball_chain,
    reparam_geraumig,
    sampled_injectivity,
    starlike_truncate,
    variation_epsilon0,
)
from .errors import InputError, LoewnerLabError, PreconditionError
from .evolve import EvolutionFamily, chain_from_field, identity_chain, integrate_evolution
from .fields import (
    BlendedField,
    ComponentwiseField,
    LinearRadialField,
    SlitExampleField,
    check_class_M,
    squeeze_margins,
)
from .linalg import operator_norm_batch
from .maps import CallableMap, PolyMap, identity_map, support_map, support_map_inverse
from .report import (
    render_bound_figure,
    render_margin_figure,
    render_norm_figure,
    write_margin_csv,
    write_report,
)
from .sampling import SamplingPlan, plan_from_config


# ---------------------------------------------------------------------------
# config loading and object construction
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"config file {p} does not exist")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"config {p} is neither valid JSON nor TOML: {exc}") from exc


def _get(cfg: dict, key: str, path: str, required: bool = True, default=None):
    if key not in cfg:
        if required:
            raise InputError(f"config.{path}: missing required field")
        return default
    return cfg[key]


def field_from_config(cfg: dict, path: str = "field"):
    kind = _get(cfg, "kind", f"{path}.kind")
    if kind == "linear-radial":
        return LinearRadialField(int(cfg.get("n", 2)))
    if kind == "componentwise":
        return ComponentwiseField(slices=tuple(_get(cfg, "slices", f"{path}.slices")))
    if kind == "blended":
        g2 = ComponentwiseField(slices=tuple(_get(cfg, "slices", f"{path}.slices")))
        return BlendedField(
            g2=g2,
            t1=float(_get(cfg, "t1", f"{path}.t1")),
            t2=float(_get(cfg, "t2", f"{path}.t2")),
        )
    if kind == "slit":
        return SlitExampleField(
            t1=float(_get(cfg, "t1", f"{path}.t1")),
            t2=float(_get(cfg, "t2", f"{path}.t2")),
        )
    raise InputError(f"config.{path}.kind: unknown field kind {kind!r}")


def map_from_config(cfg: dict, path: str = "map", grid: SamplingPlan | None = None):
    if "poly" in cfg:
        return PolyMap.from_config(cfg["poly"])
    name = cfg.get("name")
    if name == "identity":
        return identity_map(int(cfg.get("n", 2)))
    if name == "support":
        a = cfg.get("a")
        return support_map(complex(a[0], a[1]) if isinstance(a, list) else a) if a is not None else support_map()
    if name == "support-inverse":
        a = cfg.get("a")
        return support_map_inverse(complex(a[0], a[1]) if isinstance(a, list) else a) if a is not None else support_map_inverse()
    if "truncated" in cfg:
        sub = cfg["truncated"]
        if "F" in sub:
            F = map_from_config(sub["F"], f"{path}.truncated.F", grid)
            F_inv = map_from_config(sub["F_inv"], f"{path}.truncated.F_inv", grid)
        else:
            F, F_inv = support_map(), support_map_inverse()
        return starlike_truncate(F, F_inv, float(_get(sub, "N", f"{path}.truncated.N")),
                                 grid=grid or SamplingPlan())
    raise InputError(f"config.{path}: expected 'poly', 'name', or 'truncated'")


def chain_from_config(cfg: dict, grid: SamplingPlan, path: str = "chain"):
    kind = _get(cfg, "kind", f"{path}.kind")
    if kind == "identity":
        horizon = cfg.get("geraumig_horizon")
        return identity_chain(int(cfg.get("n", 2)),
                              geraumig_horizon=float(horizon) if horizon is not None else None)
    if kind == "canonical":
        return chain_from_field(field_from_config(_get(cfg, "field", f"{path}.field"), f"{path}.field"))
    if kind == "close-to-identity":
        f = map_from_config(_get(cfg, "map", f"{path}.map"), f"{path}.map", grid)
        handle, _ = chain_from_close_to_identity(f, float(_get(cfg, "c", f"{path}.c")), grid)
        return handle
    if kind == "reach":
        F = map_from_config(_get(cfg, "F", f"{path}.F"), f"{path}.F", grid)
        F_inv = map_from_config(_get(cfg, "F_inv", f"{path}.F_inv"), f"{path}.F_inv", grid)
        return evolution_to_ball_chain(F, F_inv, float(_get(cfg, "N", f"{path}.N")), grid)
    raise InputError(f"config.{path}.kind: unknown chain kind {kind!r}")


def _interval(cfg: dict) -> tuple[float, float]:
    iv = _get(cfg, "interval", "interval")
    if not isinstance(iv, (list, tuple)) or len(iv) != 2:
        raise InputError("config.interval: expected a pair [t_lo, t_hi]")
    return float(iv[0]), float(iv[1])


# ---------------------------------------------------------------------------
# operation handlers: each returns (verdict, results, rows, figure_spec)
# ---------------------------------------------------------------------------


def _op_evolve(cfg, grid, force):
    field = field_from_config(_get(cfg, "field", "field"))
    params = cfg.get("params", {})
    s = float(_get(params, "s", "params.s"))
    t = float(_get(params, "t", "params.t"))
    fam = EvolutionFamily(field,
                          tol=float(params.get("tol", 1e-9)),
                          max_step=float(params.get("max_step", 0.05)))
    pts = grid.points(field.n)
    out = integrate_evolution(fam, s, t, pts)
    r_in = np.sqrt(np.sum(np.abs(pts) ** 2, axis=1))
    r_out = np.sqrt(np.sum(np.abs(out) ** 2, axis=1))
    rows = [(t, pts[i], float(r_out[i] / r_in[i])) for i in range(pts.shape[0])]
    results = {
        "s": s,
        "t": t,
        "max_norm_ratio": float(np.max(r_out / r_in)),
        "min_norm_ratio": float(np.min(r_out / r_in)),
        "contraction_ok": bool(np.all(r_out <= r_in + 1e-8)),
    }
    verdict = "pass" if results["contraction_ok"] else "fail"
    return verdict, results, rows, ("norms", r_in.tolist(), r_out.tolist())


def _op_check_m(cfg, grid, force):
    field = field_from_config(_get(cfg, "field", "field"))
    rep, rows = check_class_M(field, _interval(cfg), grid, collect_samples=True)
    return rep.verdict, {"membership": rep.to_dict()}, rows, ("margins",)


def _op_certify_squeeze(cfg, grid, force):
    chain = chain_from_config(_get(cfg, "chain", "chain"), grid)
    params = cfg.get("params", {})
    cert = certify_squeezing(
        chain, _interval(cfg), grid,
        a_min_threshold=float(params.get("a_min_threshold", 0.02)),
        collect_samples=True,
    )
    return cert.verdict, {"certificate": cert.to_dict()}, list(cert.samples), ("margins",)


def _op_certify_geraumig(cfg, grid, force):
    chain = chain_from_config(_get(cfg, "chain", "chain"), grid)
    cert = certify_geraumig(chain, _interval(cfg), grid, collect_samples=True)
    return cert.verdict, {"certificate": cert.to_dict()}, list(cert.squeeze.samples), ("margins",)


def _op_reparam(cfg, grid, force):
    chain = chain_from_config(_get(cfg, "chain", "chain"), grid)
    params = cfg.get("params", {})
    t1 = float(_get(params, "t1", "params.t1"))
    t2 = float(_get(params, "t2", "params.t2"))
    A = float(_get(params, "A", "params.A"))
    pre = certify_squeezing(chain, (t1, t2), grid)
    results = {"precondition": pre.to_dict()}
    if not pre.passed and not force:
        results["reason"] = (
            f"base chain is not certified squeezing on [{t1}, {t2}) "
            f"(grid ratio {pre.ratio_a:.4g}); re-run with --force to override"
        )
        return "refused", results, None, None
    g = reparam_geraumig(chain, t1, t2, A, force=force)
    trim = 0.1 * (t2 - t1)
    verify = params.get("verify_interval", [t1 + trim, t2 - trim])
    cert = certify_geraumig(g, (float(verify[0]), float(verify[1])), grid, collect_samples=True)
    results["geraumig"] = cert.to_dict()
    return cert.verdict, results, list(cert.squeeze.samples), ("margins",)


def _op_vary(cfg, grid, force):
    chain = chain_from_config(_get(cfg, "chain", "chain"), grid)
    params = cfg.get("params", {})
    h = PolyMap.from_config(_get(params, "h", "params.h"))
    if chain.geraumig is None:
        horizon = params.get("certify_horizon")
        if horizon is not None:
            certify_geraumig(chain, (0.0, float(horizon)), grid)
    consts = chain.geraumig
    if consts is None:
        for cert in chain.certificates:
            if hasattr(cert, "constants") and cert.passed:
                consts = cert.constants()
    if consts is None and force and "T" in params:
        # exploratory path: take the constants on faith from the config
        from .evolve import GeraumigConstants

        a_user = float(params.get("a", 1.0))
        consts = GeraumigConstants(
            t_start=0.0, t_end=float(params["T"]), a=a_user,
            b=float(params.get("b", 1.0)), ratio=a_user, source="user",
        )
    if consts is None:
        raise PreconditionError(
            "chain carries no geraumig constants on [0, T); supply "
            "chain.geraumig_horizon, params.certify_horizon, or --force with params.T/a/b"
        )
    eps_cfg = _get(params, "eps", "params.eps")
    if eps_cfg == "max":
        eps = variation_epsilon0(min(consts.a, consts.ratio), consts.b, consts.t_end)
    else:
        eps = float(eps_cfg)
    varied, field = apply_variation(chain, h, eps, grid=grid, constants=consts, force=force)
    horizon = consts.t_end if consts is not None else float(params.get("certify_horizon", 1.0))
    interval = params.get("interval", [0.0, horizon + 1.0])
    rep, rows = check_class_M(field, (float(interval[0]), float(interval[1])), grid,
                              collect_samples=True)
    g0 = CallableMap(fn=lambda w: varied.eval(0.0, w), n=varied.n, label="varied-initial")
    results = {
        "eps": eps,
        "eps0": variation_epsilon0(min(consts.a, consts.ratio), consts.b, consts.t_end),
        "constants": consts.to_dict(),
        "membership": rep.to_dict(),
        "sampled_injectivity": sampled_injectivity(g0, grid),
        "initial_element_functional": _c2(functional_L102(g0)) if varied.n == 2 else None,
        "initial_element_coefficients": [
            coefficient_report(g0, idx, comp).to_dict()
            for idx in ((0, 2), (2, 0), (1, 1)) for comp in range(varied.n)
        ] if varied.n == 2 else [],
        "normalization_defect": varied.normalization_defect([0.0, 0.5 * horizon, horizon]),
    }
    verdict = "pass" if rep.passed and results["normalization_defect"] <= 1e-8 else "fail"
    return verdict, results, rows, ("margins",)


def _op_dilate(cfg, grid, force):
    chain = chain_from_config(_get(cfg, "chain", "chain"), grid)
    params = cfg.get("params", {})
    r = float(_get(params, "r", "params.r"))
    d = dilate_chain(chain, r)
    cert = certify_squeezing(d, _interval(cfg), grid, collect_samples=True)
    slice_bound = (1.0 - r) / (1.0 + r)
    meets = cert.ratio_a >= slice_bound - 1e-6
    results = {
        "r": r,
        "slice_bound": slice_bound,
        "meets_slice_bound": bool(meets),
        "certificate": cert.to_dict(),
    }
    verdict = "pass" if cert.passed and meets else "fail"
    return verdict, results, list(cert.samples), ("margins",)


def _op_close_chain(cfg, grid, force):
    params = cfg.get("params", {})
    f = map_from_config(_get(params, "map", "params.map"), "params.map", grid)
    c = float(_get(params, "c", "params.c"))
    handle, field = chain_from_close_to_identity(f, c, grid)
    pts = grid.points(handle.n)
    interval = cfg.get("interval", [0.0, 2.0])
    times = grid.times(float(interval[0]), float(interval[1]))
    e_sup = max(float(np.max(operator_norm_batch(field.e_fn(pts, float(t))))) for t in times)
    r = np.sqrt(np.sum(np.abs(pts) ** 2, axis=1))
    pinch_ok = True
    for t in times:
        re_h = squeeze_margins(field, pts, float(t)) * r**2
        lo = r**2 * (1 - c * r) / (1 + c * r)
        hi = r**2 * (1 + c * r) / (1 - c * r)
        if not (np.all(re_h >= lo - 1e-10) and np.all(re_h <= hi + 1e-10)):
            pinch_ok = False
    cert = certify_squeezing(handle, (float(interval[0]), float(interval[1])), grid,
                             collect_samples=True)
    results = {
        "c": c,
        "e_norm_sup": e_sup,
        "e_bound_ok": bool(e_sup <= c + 1e-12),
        "two_sided_pinch_ok": bool(pinch_ok),
        "certificate": cert.to_dict(),
    }
    verdict = "pass" if results["e_bound_ok"] and pinch_ok and cert.passed else "fail"
    return verdict, results, list(cert.samples), ("margins",)


def _op_starlike(cfg, grid, force):
    params = cfg.get("params", {})
    F = map_from_config(_get(params, "F", "params.F"), "params.F", grid)
    F_inv = map_from_config(_get(params, "F_inv", "params.F_inv"), "params.F_inv", grid)
    N = float(_get(params, "N", "params.N"))
    trunc = starlike_truncate(F, F_inv, N, grid)
    results = {"N": N}
    if trunc.n == 2:
        results["functional"] = _c2(functional_L102(trunc))
        results["coefficient"] = coefficient_report(trunc, (0, 2), 0).to_dict()
    return "pass", results, None, None


def _op_reach_chain(cfg, grid, force):
    params = cfg.get("params", {})
    F = map_from_config(_get(params, "F", "params.F"), "params.F", grid)
    F_inv = map_from_config(_get(params, "F_inv", "params.F_inv"), "params.F_inv", grid)
    N = float(_get(params, "N", "params.N"))
    chain = evolution_to_ball_chain(F, F_inv, N, grid)
    t_switch = float(np.log(N))
    pts = grid.points(chain.n)
    endpoint_dev = float(np.max(np.abs(chain.eval(t_switch, pts) - N * pts)))
    defect = chain.normalization_defect([0.0, 0.5 * t_switch, t_switch, t_switch + 1.0])
    rep, rows = check_class_M(chain.field, (0.0, t_switch + 1.0), grid, collect_samples=True)
    results = {
        "N": N,
        "t_switch": t_switch,
        "endpoint_deviation": endpoint_dev,
        "normalization_defect": defect,
        "membership": rep.to_dict(),
    }
    if chain.n == 2:
        g0 = CallableMap(fn=lambda w: chain.eval(0.0, w), n=2, label="reach-initial")
        results["initial_element_functional"] = _c2(functional_L102(g0))
    ok = rep.passed and endpoint_dev <= 1e-9 * max(1.0, N) and defect <= 1e-8
    return ("pass" if ok else "fail"), results, rows, ("margins",)


def _op_coeff(cfg, grid, force):
    params = cfg.get("params", {})
    f = map_from_config(_get(params, "map", "params.map"), "params.map", grid)
    idx = tuple(int(k) for k in _get(params, "multi_index", "params.multi_index"))
    comp = int(_get(params, "component", "params.component"))
    radius = float(params.get("radius", 0.5))
    rep = coefficient_report(f, idx, comp, radius=radius)
    return "pass", {"coefficient": rep.to_dict()}, None, None


def _op_bound_check(cfg, grid, force):
    params = cfg.get("params", {})
    f = map_from_config(_get(params, "map", "params.map"), "params.map", grid)
    N = float(_get(params, "N", "params.N"))
    verdict = reachability_bound_check(f, N)
    return (
        "pass" if verdict.satisfied else "fail",
        {"bound_check": verdict.to_dict()},
        None,
        ("bound", verdict.coefficient_magnitude, verdict.bound),
    )


def _c2(value: complex) -> list:
    return [float(np.real(value)), float(np.imag(value))]


OPERATIONS = {
    "evolve": (_op_evolve, "integrate transition maps phi_{s,t} over the grid"),
    "check-m": (_op_check_m, "sampled class-M membership of a vector field"),
    "certify-squeeze": (_op_certify_squeeze, "exponential-squeezing certificate"),
    "certify-geraumig": (_op_certify_geraumig, "geraumig certificate"),
    "reparam": (_op_reparam, "reparametrize a squeezing chain into a geraumig one"),
    "vary": (_op_vary, "vary a geraumig chain by a polynomial direction"),
    "dilate": (_op_dilate, "dilate a chain and certify the slice-bound ratio"),
    "close-chain": (_op_close_chain, "embed a close-to-identity map into a chain"),
    "starlike": (_op_starlike, "truncate a starlike map at level N"),
    "reach-chain": (_op_reach_chain, "build the evolution-to-ball chain of a starlike map"),
    "coeff": (_op_coeff, "extract one Taylor coefficient"),
    "bound-check": (_op_bound_check, "check the sharp level-N coefficient bound"),
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _threads_cap() -> int:
    raw = os.environ.get("LOEWNER_LAB_THREADS")
    if raw is None:
        return 1
    try:
        cap = int(raw)
    except ValueError as exc:
        raise InputError(f"LOEWNER_LAB_THREADS = {raw!r} is not an integer") from exc
    if cap < 1:
        raise InputError(f"LOEWNER_LAB_THREADS = {cap} must be >= 1")
    return cap


def run_scenario(operation: str, config: dict, force: bool = False,
                 out: str | None = None, seed: int | None = None) -> tuple[dict, int]:
    """Dispatch one scenario; returns (report, exit_code) and writes files."""
    t0 = time.perf_counter()
    handler, _ = OPERATIONS[operation]
    grid_cfg = dict(config.get("grid", {}))
    if seed is not None:
        grid_cfg["seed"] = int(seed)
    grid = plan_from_config(grid_cfg)
    report = {
        "tool": {"name": "loewner-lab", "version": __version__},
        "operation": operation,
        "config": config,
        "grid": grid.describe(),
        "threads_cap": _threads_cap(),
        "force": bool(force),
    }
    out_path = Path(out or config.get("out") or f"loewner-{operation}-report.json")
    exit_code = 2
    rows = None
    figure_spec = None
    try:
        verdict, results, rows, figure_spec = handler(config, grid, force)
        report["verdict"] = verdict
        report["results"] = results
        exit_code = 0 if verdict == "pass" else 1  # fail and refused both exit 1
    except PreconditionError as exc:
        report["verdict"] = "refused"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        exit_code = 1
    except LoewnerLabError as exc:
        report["verdict"] = "error"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        exit_code = 2

    report["samples_csv"] = None
    report["figure"] = None
    plots = config.get("plots", True)
    if rows:
        csv_path = out_path.with_suffix(".csv")
        write_margin_csv(rows, csv_path)
        report["samples_csv"] = str(csv_path)
    if plots and figure_spec is not None:
        fig_path = out_path.with_suffix(".png")
        title = f"{operation} [{report.get('verdict', '?')}]"
        if figure_spec[0] == "margins" and rows:
            report["figure"] = str(render_margin_figure(rows, fig_path, title))
        elif figure_spec[0] == "norms":
            report["figure"] = str(render_norm_figure(figure_spec[1], figure_spec[2], fig_path, title))
        elif figure_spec[0] == "bound":
            report["figure"] = str(render_bound_figure(figure_spec[1], figure_spec[2], fig_path, title))
    report["exit_code"] = exit_code
    report["wall_time_s"] = time.perf_counter() - t0
    write_report(report, out_path)
    return report, exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loewner-lab",
        description="Numerical laboratory for evolution families and squeezing "
                    "certificates on the unit ball of C^n.",
    )
    sub = parser.add_subparsers(dest="operation", required=True)
    for name, (_, help_text) in OPERATIONS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON or TOML scenario config")
        p.add_argument("--force", action="store_true",
                       help="downgrade certificate preconditions to warnings")
        p.add_argument("--out", help="report path (default loewner-<op>-report.json)")
        p.add_argument("--seed", type=int, help="override the grid seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if not isinstance(config, dict):
            raise InputError("config root must be a table/object")
        report, code = run_scenario(
            args.operation, config, force=args.force, out=args.out, seed=args.seed
        )
        verdict = report.get("verdict", "error")
        msg = report.get("error", {}).get("message", "")
        print(f"[loewner-lab] {args.operation}: {verdict}" + (f" ({msg})" if msg else ""))
        return code
    except LoewnerLabError as exc:
        print(f"[loewner-lab] error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
