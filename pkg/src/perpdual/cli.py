"""Command line front end.

Subcommands mirror the library layers: price, boundary, dualize,
verify, calibrate, example.  Configuration comes from a JSON file
(--config), flags, or both, with flags winning.  CSV output carries a
header row and 17 significant digits; structured reports are JSON.
Everything is computed before anything is written, so a failed run
leaves no partial files.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure (the message names the invariant or
condition that failed).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .boundary import call_boundary_curve, put_boundary_curve
from .calibration import PriceCurve, calibrate
from .duality import (AnalyticExampleParams, DualPair, analytic_pair_gamma,
                      analytic_pair_psi, build_dual_pair, dual_vol_for,
                      verify_duality)
from .calibration import recover_primal_vol
from .errors import AdmissibilityError, ConfigError, NumericalError
from .estimators import PerpetualOptionPricer
from .fundamental import (exponent_a, exponent_b, solve_log_derivative_f,
                          solve_log_derivative_g)
from .market import MarketParams
from .payoff import (AffinePowerMap, CallPut, ExpMap, Payoff, PowerGamma,
                     PowerMap, PowerPair, PsiDifference)
from .pricing import FDGrid, perpetual_call_price, perpetual_put_price
from .volatility import ClampWarning, ConstantVol, TabulatedVol, VolCurve

WINDOW_MARGIN = 100.0


# ---------------------------------------------------------------------------
# Output formatting.
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit_json(obj, path: str | None) -> None:
    _emit(json.dumps(obj, indent=2, sort_keys=True) + "\n", path)


# ---------------------------------------------------------------------------
# Config parsing.
# ---------------------------------------------------------------------------


def _config_of(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON config {path}: {e}") from e
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = loaded
    for k, v in vars(args).items():
        if k in ("config", "func", "command") or v is None:
            continue
        cfg[k] = v
    return cfg


def _market(cfg: dict) -> MarketParams:
    sub = cfg.get("market") or {}
    r = float(cfg.get("r", sub.get("r", 0.05)))
    delta = float(cfg.get("delta", sub.get("delta", 0.0)))
    return MarketParams(r=r, delta=delta)


def _parse_map(d) -> PowerMap | AffinePowerMap | ExpMap:
    if not isinstance(d, dict):
        raise ConfigError(f"psi map descriptor must be an object, got {d!r}")
    kind = str(d.get("map", "power")).replace("-", "_")
    if kind == "power":
        return PowerMap(coeff=float(d.get("coeff", 1.0)),
                        power=float(d.get("power", 1.0)))
    if kind == "affine_power":
        return AffinePowerMap(coeff=float(d.get("coeff", 1.0)),
                              shift=float(d.get("shift", 0.0)),
                              power=float(d.get("power", 1.0)))
    if kind == "exp":
        return ExpMap(rate=float(d.get("rate", 1.0)))
    raise ConfigError(
        f"unknown psi map kind {kind!r}; supported: power, affine_power, exp")


UNSUPPORTED_FAMILY = (
    "unknown payoff family {fam!r}; supported families: callput, "
    "power_gamma (the gamma-power duality), and power_pair / "
    "psi_difference (the psi-power duality)")


def _parse_payoff(cfg: dict) -> Payoff:
    desc = cfg.get("payoff", "callput")
    if isinstance(desc, str):
        s = desc.strip()
        if s.startswith("{"):
            try:
                desc = json.loads(s)
            except json.JSONDecodeError as e:
                raise ConfigError(f"malformed payoff JSON: {e}") from e
        else:
            desc = {"family": s}
    if not isinstance(desc, dict):
        raise ConfigError("payoff descriptor must be a string or object")
    fam = str(desc.get("family", "callput")).replace("-", "_")
    # flat flags override the descriptor's parameters
    get = lambda key, default: float(cfg.get(key, desc.get(key, default)))
    if fam == "callput":
        return CallPut()
    if fam in ("power_gamma", "gamma_power"):
        return PowerGamma(gamma=get("gamma", 1.0))
    if fam == "power_pair":
        return PowerPair(alpha=get("alpha", 1.0), gamma=get("gamma", 1.0),
                         gamma_p=get("gamma_p", 1.0))
    if fam in ("psi_difference", "psi_power"):
        if "psi_x" not in desc or "psi_y" not in desc:
            raise ConfigError(
                "psi_difference payoff needs psi_x and psi_y map descriptors")
        return PsiDifference(psi_x=_parse_map(desc["psi_x"]),
                             psi_y=_parse_map(desc["psi_y"]))
    raise ConfigError(UNSUPPORTED_FAMILY.format(fam=fam))


def _vol_from_csv(path: str) -> TabulatedVol:
    xs, vs = _read_two_column_csv(path, "volatility")
    return TabulatedVol(xs, vs)


def _parse_vol(cfg: dict, key: str = "vol") -> VolCurve:
    desc = cfg.get(key)
    if desc is None:
        raise ConfigError(f"no {key!r} descriptor given")
    if isinstance(desc, str):
        s = desc.strip()
        if s.startswith("{"):
            try:
                desc = json.loads(s)
            except json.JSONDecodeError as e:
                raise ConfigError(f"malformed volatility JSON: {e}") from e
        elif s.startswith("const:"):
            return ConstantVol(float(s[len("const:"):]))
        elif s.startswith("csv:"):
            return _vol_from_csv(s[len("csv:"):])
        else:
            raise ConfigError(
                f"cannot parse volatility descriptor {s!r}; use const:LEVEL, "
                "csv:PATH, or a JSON object")
    if not isinstance(desc, dict):
        raise ConfigError("volatility descriptor must be a string or object")
    kind = str(desc.get("kind", "constant")).replace("-", "_")
    if kind == "constant":
        if "level" not in desc:
            raise ConfigError("constant volatility descriptor needs 'level'")
        return ConstantVol(float(desc["level"]))
    if kind == "tabulated":
        if "path" in desc:
            return _vol_from_csv(str(desc["path"]))
        if "x" in desc and "values" in desc:
            return TabulatedVol(np.asarray(desc["x"], dtype=float),
                                np.asarray(desc["values"], dtype=float))
        raise ConfigError(
            "tabulated volatility descriptor needs 'path' or 'x' + 'values'")
    raise ConfigError(
        f"unknown volatility kind {kind!r}; supported: constant, tabulated")


def _read_two_column_csv(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {what} file {path}: {e}") from e
    first, second = [], []
    for row in csv.reader(text.splitlines()):
        if not row or not row[0].strip():
            continue
        try:
            a, b = float(row[0]), float(row[1])
        except (ValueError, IndexError):
            if not first:
                continue  # header row
            raise ConfigError(f"bad row in {what} file {path}: {row!r}")
        first.append(a)
        second.append(b)
    if not first:
        raise ConfigError(f"no numeric rows in {what} file {path}")
    return np.asarray(first), np.asarray(second)


def _parse_span(cfg: dict, default=(0.1, 10.0)):
    raw = cfg.get("span", default)
    if isinstance(raw, str):
        parts = raw.split(":")
        if len(parts) != 2:
            raise ConfigError(f"span must be LO:HI, got {raw!r}")
        raw = parts
    try:
        lo, hi = float(raw[0]), float(raw[1])
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"span must be two numbers, got {raw!r}")
    if not (0.0 < lo < hi):
        raise ConfigError(f"span must satisfy 0 < lo < hi, got {lo}, {hi}")
    return lo, hi


def _parse_floats(raw) -> np.ndarray:
    if raw is None:
        return np.empty(0)
    if isinstance(raw, str):
        raw = [t for t in raw.split(",") if t.strip()]
    return np.asarray([float(t) for t in np.atleast_1d(raw)], dtype=float)


def _threads() -> int:
    raw = os.environ.get("PERP_DUALITY_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap > 0:
        return cap
    return min(4, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Shared computation helpers.
# ---------------------------------------------------------------------------


def _call_window(p: Payoff, vol: VolCurve, m: MarketParams, xs: np.ndarray):
    b_bar = float(exponent_b(vol.upper_bound, m))
    beta = b_bar / (b_bar - 1.0)
    edges = np.asarray(p.edge_y(xs), dtype=float)
    edges = edges[np.isfinite(edges) & (edges > 0.0)]
    if edges.size == 0:
        raise ConfigError("payoff support edge vanishes on the span")
    return (float(np.min(edges)) / WINDOW_MARGIN,
            beta * float(np.max(edges)) * WINDOW_MARGIN)


def _put_window(p: Payoff, vol: VolCurve, m: MarketParams, ys: np.ndarray):
    a_bar = float(exponent_a(vol.upper_bound, m))
    alpha = a_bar / (a_bar - 1.0)
    edges = np.asarray(p.edge_x(ys), dtype=float)
    edges = edges[np.isfinite(edges) & (edges > 0.0)]
    if edges.size == 0:
        raise ConfigError("payoff support edge vanishes on the span")
    return (alpha * float(np.min(edges)) / WINDOW_MARGIN,
            float(np.max(edges)) * WINDOW_MARGIN)


def _pair_rows(pair: DualPair):
    """Zip the four curves of a pair onto aligned rows.

    x runs over the call-side knots, y over the put-side ones; the two
    grids have equal length by construction.
    """
    xs = np.asarray(pair.y_star.knots, dtype=float)
    ys = np.asarray(pair.x_star.knots, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        sig = np.asarray(pair.sigma.value(xs), dtype=float)
        eta = np.asarray(pair.eta.value(ys), dtype=float)
    return zip(xs, sig, ys, eta, pair.x_star.values, pair.y_star.values)


def _margins_obj(conditions, **extra) -> dict:
    obj = {"conditions": [
        {"condition": c.condition, "min_margin": c.min_margin,
         "location": c.location} for c in conditions]}
    obj.update(extra)
    return obj


def _fail(msg: str) -> int:
    print(f"numerical failure: {msg}", file=sys.stderr)
    return 3


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def cmd_price(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    m = _market(cfg)
    p = _parse_payoff(cfg)
    vol = _parse_vol(cfg)
    side = str(cfg.get("side", "put"))
    if "points" in cfg:
        xs, ys = _read_two_column_csv(str(cfg["points"]), "points")
        rows_xy = np.column_stack([xs, ys])
    else:
        xv = _parse_floats(cfg.get("x"))
        yv = _parse_floats(cfg.get("y"))
        if xv.size == 0 or yv.size == 0:
            raise ConfigError("give --x and --y values, or a --points file")
        rows_xy = np.array([(x, y) for x in xv for y in yv])
    # the spot column is x on the put side and y on the call side
    X = rows_xy if side == "put" else rows_xy[:, ::-1]

    est = PerpetualOptionPricer(payoff=p, vol=vol, r=m.r, delta=m.delta,
                                side=side).fit(X)
    n = _threads()
    if n > 1 and len(X) >= 4:
        chunks = np.array_split(np.arange(len(X)), n)
        with ThreadPoolExecutor(max_workers=n) as pool:
            parts = pool.map(lambda idx: est.quotes(X[idx]), chunks)
            quotes = [q for part in parts for q in part]
    else:
        quotes = est.quotes(X)

    rows = [(x, y, q.price, q.boundary_point, q.in_exercise_region)
            for (x, y), q in zip(rows_xy, quotes)]
    _emit(_csv_text(("x", "y", "price", "boundary", "in_exercise_region"),
                    rows), cfg.get("out"))
    return 0


def cmd_boundary(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    m = _market(cfg)
    p = _parse_payoff(cfg)
    vol = _parse_vol(cfg)
    side = str(cfg.get("side", "put"))
    lo, hi = _parse_span(cfg)
    num = int(cfg.get("num", 257))
    knots = np.geomspace(lo, hi, num)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        if side == "put":
            u = solve_log_derivative_f(vol, m, _put_window(p, vol, m, knots))
            curve = put_boundary_curve(knots, p, u)
            header = ("y", "x_star")
        elif side == "call":
            v = solve_log_derivative_g(vol, m, _call_window(p, vol, m, knots))
            curve = call_boundary_curve(knots, p, v)
            header = ("x", "y_star")
        else:
            raise ConfigError(f"side must be 'put' or 'call', got {side!r}")
    if curve.clip_note:
        print(f"note: {curve.clip_note}", file=sys.stderr)
    _emit(_csv_text(header, zip(curve.knots, curve.values)), cfg.get("out"))
    return 0


def cmd_dualize(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    m = _market(cfg)
    p = _parse_payoff(cfg)
    vol = _parse_vol(cfg)
    span = _parse_span(cfg)
    num = int(cfg.get("num", 513))
    direction = str(cfg.get("direction", "forward"))

    if direction == "forward":
        try:
            pair = build_dual_pair(vol, p, m, span, num)
        except AdmissibilityError:
            # partial violation: report the longest valid run instead
            res = dual_vol_for(vol, p, m, span, num)
            if res.vol is None:
                worst = min(res.conditions, key=lambda c: c.min_margin)
                return _fail(
                    "no dual volatility exists on the requested span; "
                    f"condition {worst.condition} reaches "
                    f"{worst.min_margin:.3e} at {worst.location:.6g}")
            obj = _margins_obj(
                res.conditions,
                valid_span=[float(res.vol.x[0]), float(res.vol.x[-1])],
                violations={"count": int(res.violations.size),
                            "interval": [float(np.min(res.violations)),
                                         float(np.max(res.violations))]},
                truncated=True)
            _emit(_csv_text(("y", "eta"), zip(res.vol.x, res.vol.values)),
                  cfg.get("out"))
            _emit_json(obj, cfg.get("margins"))
            return 0
        obj = _margins_obj(
            pair.condition_report,
            valid_span=[float(pair.x_star.knots[0]),
                        float(pair.x_star.knots[-1])],
            violations={"count": 0, "interval": []},
            truncated=False,
            reciprocity_max_rel=pair.reciprocity_residual())
        _emit(_csv_text(("x", "sigma", "y", "eta", "x_star", "y_star"),
                        _pair_rows(pair)), cfg.get("out"))
        _emit_json(obj, cfg.get("margins"))
        return 0

    if direction != "inverse":
        raise ConfigError(
            f"direction must be 'forward' or 'inverse', got {direction!r}")
    xs = np.geomspace(span[0], span[1], num)
    diag: dict = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        v = solve_log_derivative_g(vol, m, _call_window(p, vol, m, xs))
        y_star = call_boundary_curve(xs, p, v)
    try:
        sigma = recover_primal_vol(y_star, vol, p, m, num=num,
                                   diagnostics=diag)
    except AdmissibilityError as e:
        return _fail(str(e))
    margins = diag.get("inverse_condition_margins", {})
    obj = {"conditions": [
        {"condition": name, "min_margin": mm, "location": loc}
        for name, (mm, loc) in sorted(margins.items())],
        "violations": {"count": diag.get("inverse_condition_violations", 0)},
        "valid_span": [float(sigma.x[0]), float(sigma.x[-1])]
        if isinstance(sigma, TabulatedVol) else list(span)}
    _emit(_csv_text(("x", "sigma"), zip(sigma.x, sigma.values)),
          cfg.get("out"))
    _emit_json(obj, cfg.get("margins"))
    return 0


_EXAMPLE_DEFAULTS = {
    "gamma-power": dict(a=1.5, b=5.0 / 9.0, c=1.0, gamma=0.75, alpha=None),
    "psi-power": dict(a=1.5, b=5.0 / 9.0, c=1.0, gamma=4.0, alpha=0.97),
}


def _example_pair(cfg: dict, m: MarketParams):
    name = str(cfg.get("name", "gamma-power")).replace("_", "-")
    if name not in _EXAMPLE_DEFAULTS:
        raise ConfigError(
            f"unknown example {name!r}; supported: gamma-power, psi-power")
    d = dict(_EXAMPLE_DEFAULTS[name])
    for key in ("a", "b", "c", "gamma", "alpha"):
        if cfg.get(key) is not None:
            d[key] = float(cfg[key])
    q = AnalyticExampleParams(a=d["a"], b=d["b"], c=d["c"], family=name,
                              gamma=d["gamma"], alpha=d["alpha"])
    span = _parse_span(cfg, default=(0.05, 50.0))
    num = int(cfg.get("num", 513))
    if name == "gamma-power":
        pair = analytic_pair_gamma(q, m, span, num)
        payoff: Payoff = PowerGamma(gamma=d["gamma"])
    else:
        pair = analytic_pair_psi(q, m, span, num)
        payoff = PowerPair(alpha=d["alpha"], gamma=d["gamma"], gamma_p=1.0)
    return pair, payoff


def cmd_example(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    sub = cfg.get("market") or {}
    # defaults match the worked rational-boundary example
    cfg.setdefault("r", sub.get("r", 0.2))
    cfg.setdefault("delta", sub.get("delta", 0.1))
    m = _market(cfg)
    pair, _ = _example_pair(cfg, m)
    obj = _margins_obj(pair.condition_report,
                       reciprocity_max_rel=pair.reciprocity_residual())
    _emit(_csv_text(("x", "sigma", "y", "eta", "x_star", "y_star"),
                    _pair_rows(pair)), cfg.get("out"))
    _emit_json(obj, cfg.get("margins"))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    if cfg.get("name") is not None:
        sub = cfg.get("market") or {}
        cfg.setdefault("r", sub.get("r", 0.2))
        cfg.setdefault("delta", sub.get("delta", 0.1))
        m = _market(cfg)
        pair, p = _example_pair(cfg, m)
    else:
        m = _market(cfg)
        p = _parse_payoff(cfg)
        vol = _parse_vol(cfg)
        span = _parse_span(cfg)
        pair = build_dual_pair(vol, p, m, span, int(cfg.get("num", 513)))

    maturities = _parse_floats(cfg.get("maturities"))
    point = cfg.get("point")
    fd_point = None
    if point is not None:
        pv = _parse_floats(point)
        if pv.size != 2:
            raise ConfigError(f"point must be X,Y, got {point!r}")
        fd_point = (float(pv[0]), float(pv[1]))
    grid = FDGrid(num_nodes=int(cfg.get("num_nodes", 801)),
                  num_steps=(int(cfg["num_steps"])
                             if cfg.get("num_steps") is not None else None))

    report = verify_duality(
        pair, p, m, maturities=maturities if maturities.size else None,
        fd_point=fd_point, fd_grid=grid)
    rows = list(report.fd_rows)
    if not rows:
        # no maturities: compare the perpetual prices themselves
        if fd_point is None:
            xq = float(np.sqrt(pair.y_star.knots[0] * pair.y_star.knots[-1]))
            yq = float(np.sqrt(pair.x_star.knots[0] * pair.x_star.knots[-1]))
        else:
            xq, yq = fd_point
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            u = solve_log_derivative_f(
                pair.sigma, m, _put_window(p, pair.sigma, m,
                                           np.asarray([yq])))
            v = solve_log_derivative_g(
                pair.eta, m, _call_window(p, pair.eta, m, np.asarray([xq])))
            P = perpetual_put_price(xq, yq, p, u).price
            c = perpetual_call_price(yq, xq, p, v).price
        rows = [(float("inf"), P, c, abs(P - c))]
    _emit(_csv_text(("T", "P", "c", "gap"), rows), cfg.get("out"))
    if cfg.get("report") is not None:
        _emit_json({
            "reciprocity_max_rel": report.reciprocity_max,
            "perpetual_gap_max_rel": report.perpetual_gap_max,
            "grid_shape": list(report.grid_shape),
        }, cfg.get("report"))
    print(report.summary())
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _config_of(args)
    m = _market(cfg)
    p = _parse_payoff(cfg)
    if "prices" not in cfg:
        raise ConfigError("give --prices CSV with (strike, price) rows")
    strikes, prices = _read_two_column_csv(str(cfg["prices"]), "price")
    x0 = float(cfg.get("x0", 1.0))
    pc = PriceCurve(strikes=strikes, prices=prices, x0=x0)
    x_end = float(cfg["x_end"]) if cfg.get("x_end") is not None else None

    result = calibrate(pc, p, m, smooth=bool(cfg.get("smooth", False)),
                       x_end=x_end)
    diag = dict(result.diagnostics)
    diag["exercise_strike"] = result.Y
    if cfg.get("reference_vol") is not None:
        ref = _parse_vol(cfg, "reference_vol")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            xs = np.asarray(result.sigma.x, dtype=float)
            got = np.asarray(result.sigma.value(xs), dtype=float)
            want = np.asarray(ref.value(xs), dtype=float)
        diag["reference_max_rel_err"] = float(np.max(np.abs(got / want - 1.0)))
    _emit(_csv_text(("x", "sigma"), zip(result.sigma.x, result.sigma.values)),
          cfg.get("out"))
    _emit_json(_jsonable(diag), cfg.get("diagnostics"))
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# Argument parser.
# ---------------------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override it")
    sp.add_argument("--r", type=float, help="interest rate")
    sp.add_argument("--delta", type=float, help="dividend rate")
    sp.add_argument("--payoff",
                    help="payoff family name or JSON descriptor")
    sp.add_argument("--gamma", type=float, help="payoff exponent")
    sp.add_argument("--gamma-p", dest="gamma_p", type=float,
                    help="y-side payoff exponent")
    sp.add_argument("--alpha", type=float, help="y-side payoff scale")
    sp.add_argument("--out", help="output CSV path (default: stdout)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="perpdual",
        description="Perpetual option pricing, exercise boundaries, dual "
                    "volatility pairs, and calibration from perpetual prices.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("price", help="perpetual prices on a point grid")
    _add_common(sp)
    sp.add_argument("--vol", help="volatility: const:LEVEL, csv:PATH, or JSON")
    sp.add_argument("--side", choices=("put", "call"))
    sp.add_argument("--x", help="comma-separated x values")
    sp.add_argument("--y", help="comma-separated y values")
    sp.add_argument("--points", help="CSV of (x, y) rows")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("boundary", help="exercise boundary curve")
    _add_common(sp)
    sp.add_argument("--vol", help="volatility: const:LEVEL, csv:PATH, or JSON")
    sp.add_argument("--side", choices=("put", "call"))
    sp.add_argument("--span", help="knot span LO:HI")
    sp.add_argument("--num", type=int, help="number of knots")
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("dualize",
                        help="dual volatility curve and condition margins")
    _add_common(sp)
    sp.add_argument("--vol", help="input volatility curve")
    sp.add_argument("--span", help="knot span LO:HI")
    sp.add_argument("--num", type=int, help="number of knots")
    sp.add_argument("--direction", choices=("forward", "inverse"))
    sp.add_argument("--margins", help="margins report JSON path")
    sp.set_defaults(func=cmd_dualize)

    sp = sub.add_parser("verify",
                        help="two-route duality check, optionally with "
                             "finite-maturity rows")
    _add_common(sp)
    sp.add_argument("--vol", help="input volatility curve")
    sp.add_argument("--span", help="knot span LO:HI")
    sp.add_argument("--num", type=int, help="number of knots")
    sp.add_argument("--name", choices=("gamma-power", "psi-power"),
                    help="verify a named analytic pair instead of --vol")
    sp.add_argument("--a", type=float, help="example coefficient a")
    sp.add_argument("--b", type=float, help="example coefficient b")
    sp.add_argument("--c", type=float, help="example coefficient c")
    sp.add_argument("--maturities", help="comma-separated maturities")
    sp.add_argument("--point", help="evaluation point X,Y")
    sp.add_argument("--num-nodes", dest="num_nodes", type=int,
                    help="spatial nodes for the finite-difference check")
    sp.add_argument("--num-steps", dest="num_steps", type=int,
                    help="time steps for the finite-difference check")
    sp.add_argument("--report", help="summary report JSON path")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("calibrate",
                        help="recover the volatility from perpetual prices")
    _add_common(sp)
    sp.add_argument("--prices", help="CSV of (strike, price) rows")
    sp.add_argument("--x0", type=float, help="spot the prices were quoted at")
    sp.add_argument("--smooth", action="store_true", default=None,
                    help="monotone-spline derivatives instead of differences")
    sp.add_argument("--x-end", dest="x_end", type=float,
                    help="lower end of the boundary sweep")
    sp.add_argument("--diagnostics", help="diagnostics JSON path")
    sp.add_argument("--reference-vol", dest="reference_vol",
                    help="known volatility to report recovery error against")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("example",
                        help="emit a named closed-form dual pair")
    _add_common(sp)
    sp.add_argument("--name", choices=("gamma-power", "psi-power"))
    sp.add_argument("--a", type=float, help="example coefficient a")
    sp.add_argument("--b", type=float, help="example coefficient b")
    sp.add_argument("--c", type=float, help="example coefficient c")
    sp.add_argument("--span", help="knot span LO:HI")
    sp.add_argument("--num", type=int, help="number of knots")
    sp.add_argument("--margins", help="margins report JSON path")
    sp.set_defaults(func=cmd_example)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
