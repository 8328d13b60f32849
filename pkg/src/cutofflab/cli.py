"""Batch front-end: load chains and families, compute curves, mixing times,
product bounds, cutoff sweeps, and shortcut-chain envelopes; emit CSV/JSON.

Exit codes: 0 ok, 2 input problem, 3 numeric failure, 4 more than half of a
sweep's indices failed.  Configuration comes from flags or a single JSON
file; flags override the file.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys

import numpy as np

from . import models
from .chains import (
    NoConvergenceError,
    ReducibleError,
    chain_from_dict,
    load_chain,
    validate_chain,
)
from .cutoff import (
    VerdictThresholds,
    cutoff_ratio_diagnostic,
    default_epsilon,
    dn_decomposition,
    mixing_profile,
    r_estimator,
    window_diagnostic,
)
from .chains import EigenFailureError
from .distances import DistanceKind
from .kernel import (
    DEFAULT_PARAMS,
    MAX,
    BudgetExceededError,
    NoUpperBracketError,
    UniformizationParams,
    distance_curve,
    format_float,
    max_distance_at,
    mixing_time,
    write_curve_csv,
)
from .models import LacoinParams, lacoin_bound_envelope, lacoin_chain
from .product import (
    TimeTooSmallError,
    load_product_spec,
    prodmixing_bounds,
    product_hellinger_exact,
    product_tv_bracket,
    product_tv_sandwich,
    tail_bound_hellinger,
    tail_bound_tv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

NUMERIC_ERRORS = (
    NoConvergenceError,
    BudgetExceededError,
    NoUpperBracketError,
    EigenFailureError,
)


def _parse_kind(text: str) -> DistanceKind:
    try:
        return DistanceKind(text)
    except ValueError:
        raise ValueError(f"kind must be tv, hellinger or l2, got {text!r}") from None


def _parse_t_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"t-grid must be a:b:steps, got {text!r}")
    a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1 or b < a:
        raise ValueError(f"empty or inverted t-grid {text!r}")
    return np.linspace(a, b, steps)


def _parse_n_range(text: str) -> list[int]:
    """a:b expands to the doubling sequence a, 2a, 4a, ... capped at b."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"n-range must be a:b, got {text!r}")
    a, b = int(parts[0]), int(parts[1])
    if a < 1 or b < a:
        raise ValueError(f"empty n-range {text!r}")
    out = []
    n = a
    while n <= b:
        out.append(n)
        n *= 2
    return out


def _parse_params(text: str | None) -> dict:
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        if not item:
            continue
        key, _, value = item.partition("=")
        if not _:
            raise ValueError(f"parameter {item!r} is not key=value")
        out[key.strip()] = float(value)
    return out


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        for key, value in config.items():
            attr = key.replace("-", "_")
            if getattr(args, attr, None) is None:
                setattr(args, attr, value)
    return args


@contextlib.contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _resolve_chain(args):
    if getattr(args, "chain", None):
        return load_chain(args.chain)
    if getattr(args, "model", None):
        return models.build_model(args.model, _parse_params(getattr(args, "params", None)))
    raise ValueError("need --chain FILE or --model NAME")


def _resolve_start(text, chain):
    if text is None or text == MAX:
        return MAX
    if text == "stationary":
        return chain.stationary
    return int(text)


def _uniformization(args) -> UniformizationParams:
    tol = getattr(args, "tail_tol", None)
    return DEFAULT_PARAMS if tol is None else UniformizationParams(tail_tol=float(tol))


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError(f"missing --{name.replace('_', '-')}")


def cmd_validate(args) -> int:
    _require(args, "chain")
    with open(args.chain, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    report = validate_chain(np.asarray(data["matrix"], dtype=float), data.get("stationary"))
    if report.ok:
        print(f"ok: {data.get('label', args.chain)}")
        return EXIT_OK
    for v in report.violations:
        print(f"violation: {v.kind} at {v.location} magnitude {v.magnitude:g}", file=sys.stderr)
    return EXIT_INPUT


def cmd_model_emit(args) -> int:
    _require(args, "model")
    chain = models.build_model(args.model, _parse_params(args.params))
    payload = {
        "label": chain.label,
        "matrix": chain.kernel.tolist(),
        "stationary": chain.stationary.tolist(),
    }
    with _open_out(args.out) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_distance_curve(args) -> int:
    _require(args, "t_grid")
    chain = _resolve_chain(args)
    kind = _parse_kind(args.kind or "tv")
    times = _parse_t_grid(args.t_grid)
    start = _resolve_start(args.start, chain)
    if isinstance(start, int):
        from .chains import point_mass

        start = point_mass(chain.n_states, start)
    curve = distance_curve(chain, kind, start, times, _uniformization(args))
    with _open_out(args.out) as fh:
        write_curve_csv(curve, fh)
    return EXIT_OK


def cmd_mix_time(args) -> int:
    chain = _resolve_chain(args)
    kind = _parse_kind(args.kind or "tv")
    epsilon = float(args.epsilon if args.epsilon is not None else default_epsilon(kind))
    start = _resolve_start(args.start, chain)
    if isinstance(start, int):
        from .chains import point_mass

        start = point_mass(chain.n_states, start)
    mt = mixing_time(
        chain, kind, epsilon, start=start, mode=args.mode or "continuous", params=_uniformization(args)
    )
    payload = {
        "value": mt.value,
        "kind": kind.value,
        "epsilon": epsilon,
        "resolution": mt.resolution,
        "mode": args.mode or "continuous",
    }
    with _open_out(args.out) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_product_eval(args) -> int:
    _require(args, "spec", "t_grid")
    spec = load_product_spec(args.spec)
    times = _parse_t_grid(args.t_grid)
    params = _uniformization(args)
    eps_tv = float(args.epsilon) if args.epsilon is not None else 0.25
    eps_hd = float(args.hellinger_epsilon) if args.hellinger_epsilon is not None else 0.25
    header = [
        "t",
        "hellinger",
        "tv_lower",
        "tv_upper",
        "tv_sandwich_lower",
        "tv_sandwich_upper",
        "expsum_lower",
        "expsum_upper",
        "tail_tv",
        "tail_hellinger",
    ]
    rows = []
    for t in times:
        h = product_hellinger_exact(spec, t, MAX, params)
        tv = product_tv_bracket(spec, t, MAX, params)
        sw = product_tv_sandwich(spec, t, MAX, params)
        pm = prodmixing_bounds(spec, t, DistanceKind.TV, MAX, params)
        try:
            tt = format_float(tail_bound_tv(spec, t, eps_tv, params=params))
        except TimeTooSmallError:
            tt = ""
        try:
            th = format_float(tail_bound_hellinger(spec, t, eps_hd, params=params))
        except TimeTooSmallError:
            th = ""
        rows.append(
            [
                format_float(t),
                format_float(h),
                format_float(tv.lower),
                format_float(tv.upper),
                format_float(sw.lower),
                format_float(sw.upper),
                format_float(pm.lower),
                format_float(pm.upper),
                tt,
                th,
            ]
        )
    with _open_out(args.out) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return EXIT_OK


def cmd_cutoff_scan(args) -> int:
    _require(args, "family")
    family = models.build_family(args.family, _parse_params(args.params))
    kind = _parse_kind(args.kind or "tv")
    if args.indices:
        indices = [int(x) for x in args.indices.split(",")]
    elif args.n_range:
        indices = _parse_n_range(args.n_range)
    else:
        raise ValueError("need --indices or --n-range")
    epsilon = float(args.epsilon) if args.epsilon is not None else 0.1
    delta = float(args.delta) if args.delta is not None else 0.9
    thresholds = (
        VerdictThresholds(band=float(args.band)) if args.band is not None else VerdictThresholds()
    )
    params = _uniformization(args)
    ratio_report = cutoff_ratio_diagnostic(
        family, kind, epsilon, delta, indices, thresholds, params
    )
    window_eps = min(epsilon, 1.0 - epsilon)
    if window_eps >= 0.5:
        window_eps = 0.25
    window_report = window_diagnostic(family, kind, window_eps, indices, None, thresholds, params)
    profile = mixing_profile(family, kind, min(epsilon, delta), indices, params)
    d_table = None
    if family.has_weights:
        try:
            d_table = dn_decomposition(family, kind, None, indices, epsilon=min(epsilon, delta))
        except ValueError:
            d_table = None
    s_column = None
    if args.r_c is not None and family.has_weights:
        m_fixed = int(args.r_m) if args.r_m is not None else 1
        diag = r_estimator(family, kind, float(args.r_c), indices, [m_fixed], params)
        s_column = diag.grid[:, 0]
    failures = set(profile.failures) | set(ratio_report.trend_summary["failures"])
    header = ["n", "T", "ratio", "window", "S", "D_n"]
    lines = [",".join(header)]
    for pos, n in enumerate(indices):
        row = [
            str(n),
            format_float(float(profile.times[pos])),
            format_float(float(ratio_report.ratios[pos])),
            format_float(float(window_report.windows[pos])),
            format_float(float(s_column[pos])) if s_column is not None else "",
            format_float(float(d_table.d_values[pos])) if d_table is not None else "",
        ]
        lines.append(",".join(row))
    with _open_out(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    report = {
        "family": family.label,
        "kind": kind.value,
        "epsilon": epsilon,
        "delta": delta,
        "indices": list(indices),
        "ratio_verdict": ratio_report.verdict,
        "window_verdict": window_report.verdict,
        "thresholds": {
            "band": thresholds.band,
            "min_improvement": thresholds.min_improvement,
            "flat_tol": thresholds.flat_tol,
            "away_floor": thresholds.away_floor,
            "min_indices": thresholds.min_indices,
        },
        "ratios": [float(x) for x in ratio_report.ratios],
        "failures": sorted(failures),
    }
    report_path = args.report or (args.out and args.out + ".json")
    if report_path:
        with _open_out(report_path) as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    else:
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    if failures and len(failures) * 2 > len(indices):
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_lacoin_bounds(args) -> int:
    _require(args, "n", "a", "b", "t_grid")
    lp = LacoinParams(
        n=int(args.n),
        a=float(args.a),
        b=float(args.b),
        beta_exp=float(args.beta_exp) if args.beta_exp is not None else 0.0,
    )
    chain = lacoin_chain(lp)
    times = _parse_t_grid(args.t_grid)
    params = _uniformization(args)
    header = ["t", "hd_sq_exact", "tv_exact", "hd_sq_ub_wide", "hd_sq_ub", "hd_sq_lb_mid", "tv_lb_early"]
    lines = [",".join(header)]
    for t in times:
        if t <= 0:
            continue
        env = lacoin_bound_envelope(lp, t)
        hd = max_distance_at(chain, DistanceKind.HELLINGER, t, params)
        tv = max_distance_at(chain, DistanceKind.TV, t, params)
        cells = [format_float(t), format_float(hd * hd), format_float(tv)]
        for value in (env.hd_sq_ub_wide, env.hd_sq_ub, env.hd_sq_lb_mid, env.tv_lb_early):
            cells.append("" if value is None else format_float(value))
        lines.append(",".join(cells))
    with _open_out(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cutofflab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--tail-tol", type=float, help="uniformization tail tolerance")

    p = sub.add_parser("validate", help="validate a chain file")
    p.add_argument("--chain")
    common(p)

    p = sub.add_parser("model-emit", help="write a registry model as a chain file")
    p.add_argument("--model")
    p.add_argument("--params", help="comma-separated key=value model parameters")
    common(p)

    p = sub.add_parser("distance-curve", help="distance-to-stationarity curve as CSV")
    p.add_argument("--chain")
    p.add_argument("--model")
    p.add_argument("--params")
    p.add_argument("--kind", help="tv | hellinger | l2")
    p.add_argument("--start", help="state index, 'max', or 'stationary'")
    p.add_argument("--t-grid", help="a:b:steps")
    common(p)

    p = sub.add_parser("mix-time", help="mixing time at a level")
    p.add_argument("--chain")
    p.add_argument("--model")
    p.add_argument("--params")
    p.add_argument("--kind")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--start")
    p.add_argument("--mode", choices=["continuous", "discrete"])
    common(p)

    p = sub.add_parser("product-eval", help="product distance bounds on a time grid")
    p.add_argument("--spec", help="product spec JSON file")
    p.add_argument("--t-grid")
    p.add_argument("--epsilon", type=float, help="tail-bound level for TV")
    p.add_argument("--hellinger-epsilon", type=float, help="tail-bound level for Hellinger")
    common(p)

    p = sub.add_parser("cutoff-scan", help="family sweep with ratio/window verdicts")
    p.add_argument("--family")
    p.add_argument("--params")
    p.add_argument("--kind")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--n-range", help="a:b, doubling sequence")
    p.add_argument("--indices", help="explicit comma-separated index list")
    p.add_argument("--band", type=float, help="verdict band around ratio 1")
    p.add_argument("--r-c", type=float, help="evaluate S(n, m, c) at this c")
    p.add_argument("--r-m", type=int, help="m for the S column (default 1)")
    p.add_argument("--report", help="JSON report path")
    common(p)

    p = sub.add_parser("lacoin-bounds", help="shortcut-chain envelopes vs exact distances")
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--beta-exp", type=float)
    p.add_argument("--t-grid")
    common(p)

    return parser


COMMANDS = {
    "validate": cmd_validate,
    "model-emit": cmd_model_emit,
    "distance-curve": cmd_distance_curve,
    "mix-time": cmd_mix_time,
    "product-eval": cmd_product_eval,
    "cutoff-scan": cmd_cutoff_scan,
    "lacoin-bounds": cmd_lacoin_bounds,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return COMMANDS[args.command](args)
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
