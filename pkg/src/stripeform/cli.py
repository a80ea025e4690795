"""Command-line interface.

Option values come from flags, then from a ``key = value`` config file given
with ``--config``, then from built-in defaults.  Exit status is 0 on success,
1 when a verification check fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import setgeom, stripedist, verify
from .functional import QuadratureSpec, decomposed_energy, direct_energy
from .kernel import ModelParams
from .stripe1d import c_series, d2e_tau, de_tau, h_box, h_star

DEFAULTS = {
    "dim": 1, "p": None, "tau": 0.01, "box": None, "grid_n": 64, "tol": 1e-9,
    "eta": None, "delta": 0.1, "cube_l": None, "resolution": None, "seed": 0,
    "out": None, "format": None,
}


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(r.get(h)) for h in header) + "\n")
    return buf.getvalue()


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS and key not in ("taus", "lengths"):
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="plain-text 'key = value' file")
    common.add_argument("--dim", type=int, help="dimension d (default 1)")
    common.add_argument("--p", type=float, help="kernel exponent p >= d+2 (default d+2)")
    common.add_argument("--tau", type=float, help="tau > 0 (default 0.01)")
    common.add_argument("--box", type=float, help="box side L")
    common.add_argument("--grid-n", type=int, dest="grid_n", help="grid resolution (default 64)")
    common.add_argument("--tol", type=float, help="quadrature tolerance (default 1e-9)")
    common.add_argument("--eta", type=float, help="minimal interface distance for D_eta")
    common.add_argument("--delta", type=float, help="distance threshold (default 0.1)")
    common.add_argument("--cube-l", type=float, dest="cube_l", help="cube side l")
    common.add_argument("--resolution", type=int, help="profile bins per cube")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    parser = argparse.ArgumentParser(prog="stripeform", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    pt = sub.add_parser("period-table", parents=[common],
                        help="optimal widths and energies over tau and L")
    pt.add_argument("--taus", type=_float_list, default=None,
                    help="list of tau values (default: --tau)")
    pt.add_argument("--lengths", type=_float_list, default=None,
                    help="list of box sides (default: --box or 2 h*)")
    en = sub.add_parser("energy", parents=[common], help="direct and decomposed energy of a set file")
    en.add_argument("set_file")
    ve = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ve.add_argument("suite", help="one of: " + ", ".join(verify.SUITES))
    cl = sub.add_parser("classify", parents=[common], help="label cubes of a set file")
    cl.add_argument("set_file")
    sub.add_parser("compare", parents=[common], help="rank stripes against competitors (d=2)")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        for key, value in read_config(args.config).items():
            cfg[key] = value
    for key in list(DEFAULTS) + ["taus", "lengths"]:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    conv = {"dim": int, "p": float, "tau": float, "box": float, "grid_n": int, "tol": float,
            "eta": float, "delta": float, "cube_l": float, "resolution": int, "seed": int}
    for key, f in conv.items():
        if cfg.get(key) is not None:
            cfg[key] = f(cfg[key])
    for key in ("taus", "lengths"):
        if isinstance(cfg.get(key), str):
            cfg[key] = _float_list(cfg[key])
    return cfg


def _p(cfg, d: int) -> float:
    return cfg["p"] if cfg["p"] is not None else d + 2.0


def _quad(cfg) -> QuadratureSpec:
    return QuadratureSpec(grid_n=cfg["grid_n"], tol=cfg["tol"])


def cmd_period_table(cfg) -> tuple[str, int]:
    taus = cfg.get("taus") or [cfg["tau"]]
    rows = []
    for tau in taus:
        params = ModelParams(cfg["dim"], _p(cfg, cfg["dim"]), tau)
        try:
            hs = h_star(params)
            lengths = cfg.get("lengths") or ([cfg["box"]] if cfg["box"] else [2 * hs.h])
        except (ArithmeticError, ValueError) as exc:
            rows.append({"tau": tau, "error": str(exc)})
            continue
        e_err = c_series(params.sigma / hs.h, params).tail_bound / hs.h ** (params.q - 1)
        h_err = abs(hs.derivative) / d2e_tau(hs.h, params) + 4 * np.finfo(float).eps * hs.h
        for L in lengths:
            row = {"tau": tau, "L": L, "h_star": hs.h, "h_star_err": h_err,
                   "e_h_star": hs.energy, "e_h_star_err": e_err}
            try:
                hb = h_box(L, params)
                row.update({"h_box": hb.h, "e_h_box": hb.energy,
                            "e_h_box_err": c_series(params.sigma / hb.h, params).tail_bound
                            / hb.h ** (params.q - 1),
                            "drift_L": abs(hb.h - hs.h) * L, "drift_L_err": h_err * L,
                            "de_h_box": de_tau(hb.h, params), "error": ""})
            except (ArithmeticError, ValueError) as exc:
                row["error"] = str(exc)
            rows.append(row)
    header = ["tau", "L", "h_star", "h_star_err", "h_box", "e_h_star", "e_h_star_err",
              "e_h_box", "e_h_box_err", "drift_L", "drift_L_err", "de_h_box", "error"]
    return csv_text(header, rows), 0


def cmd_energy(cfg, set_file) -> tuple[str, int]:
    E = setgeom.read_set(set_file)
    params = ModelParams(E.dim, _p(cfg, E.dim), cfg["tau"])
    quad = _quad(cfg)
    a = direct_energy(E, params, quad)
    b = decomposed_energy(E, params, quad)
    out = {"direct": a.to_dict(), "decomposed": b.to_dict(), "gap": a.total - b.total,
           "gap_error_bound": a.error_bound + b.error_bound}
    return json.dumps(out, sort_keys=True, indent=1) + "\n", 0


def cmd_verify(cfg, suite) -> tuple[str, int]:
    outcomes = verify.run_suite(suite, cfg["seed"])
    text = verify.report_json(outcomes) if cfg["format"] == "json" else verify.report_text(outcomes)
    return text + "\n", 0 if all(o.passed for o in outcomes) else 1


def cmd_classify(cfg, set_file) -> tuple[str, int]:
    E = setgeom.read_set(set_file)
    params = ModelParams(E.dim, _p(cfg, E.dim), cfg["tau"])
    l = cfg["cube_l"] or E.period / 4
    if cfg["eta"] is not None:
        eta = cfg["eta"]
    else:
        eta = h_star(params).h / 2
    # bins resolve eta, and one bin of boundary misplacement stays well below delta
    res = cfg["resolution"] or max(8, int(math.ceil(4 * l / eta)), int(math.ceil(8 / cfg["delta"])))
    labels = stripedist.classify_cubes(E, l, eta, cfg["delta"], res)
    return labels.to_csv(), 0


def cmd_compare(cfg) -> tuple[str, int]:
    params = ModelParams(2, _p(cfg, 2), cfg["tau"])
    L = cfg["box"] or float(round(16 * h_star(params).h))
    n = cfg["grid_n"] if cfg["grid_n"] != DEFAULTS["grid_n"] else 240
    rows = verify.compare_patterns(params, L, n)
    for rank, r in enumerate(rows, 1):
        r["rank"] = rank
    header = ["rank", "pattern", "label", "energy", "error_bound", "volume_fraction", "grid_n"]
    return csv_text(header, rows), 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "period-table":
            text, code = cmd_period_table(cfg)
        elif args.command == "energy":
            text, code = cmd_energy(cfg, args.set_file)
        elif args.command == "verify":
            text, code = cmd_verify(cfg, args.suite)
        elif args.command == "classify":
            text, code = cmd_classify(cfg, args.set_file)
        else:
            text, code = cmd_compare(cfg)
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"stripeform: error: {msg}", file=sys.stderr)
        return 2
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
