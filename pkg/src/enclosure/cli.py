"""Command line entry point: ``enclosure <command> scene.json [flags]``.

Exit status 0 on success, 2 when the scene or input data is invalid, 3 when
a numerical procedure fails to converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import asymptotics, forward, oracle, reconstruct, stationary
from .errors import ConvergenceError, DegenerateError, SceneError
from .scene import Scene, load_scene

log = logging.getLogger("enclosure")

DEFAULT_FORWARD_GRID = [8.0 + 4.0 * k for k in range(9)]
DEFAULT_ORACLE_GRID = [8.0, 12.0, 16.0, 24.0, 32.0, 40.0]


def parse_tau_grid(text: Optional[str], default) -> list[float]:
    """``"8,12,16"`` or ``"start:stop:step"`` (stop inclusive)."""
    if not text:
        return list(default)
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def _emit(obj: dict, args, name: str) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False, default=_json_default)
    print(text)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _scene(args) -> Scene:
    if not args.scene:
        raise SceneError("a scene file is required for this command")
    return load_scene(args.scene)


def _stationary_report(scene: Scene) -> dict:
    pairs = stationary.find_pairs(scene)
    lengths = stationary.shortest_lengths(pairs, scene)
    nd = [stationary.check_nondegenerate(p) for p in pairs]
    for p in pairs:
        p.amplitude = asymptotics.amplitude_general(p) if p.min_eig_L0 > 0 else None
    return {
        "lengths": lengths.to_dict(),
        "pairs": [dict(p.to_dict(), nondegenerate=r.passed, min_eig=r.min_eig,
                       det_hess_L=float(np.linalg.det(p.hess_L)))
                  for p, r in zip(pairs, nd)],
    }


def cmd_stationary(args) -> int:
    _emit(_stationary_report(_scene(args)), args, "stationary.json")
    return 0


def _asympt(scene: Scene, T: Optional[float]) -> dict:
    pairs = stationary.find_pairs(scene)
    rep = asymptotics.T0(scene, pairs)
    out = rep.to_dict()
    if T is not None:
        out["T"] = T
        out["classification"] = asymptotics.classify_limit(rep, T)
    return out


def cmd_asympt(args) -> int:
    _emit(_asympt(_scene(args), args.T), args, "asympt.json")
    return 0


def cmd_oracle(args) -> int:
    scene = _scene(args)
    taus = parse_tau_grid(args.tau_grid, DEFAULT_ORACLE_GRID)
    grid = oracle.OracleGrid(level=args.grid_level)
    tables = []
    for cav in scene.cavities:
        tab = oracle.compare_to_laplace(cav, scene, taus, grid)
        tables.append({"cavity_id": cav.id, "kind": cav.kind, "exponent": tab.exponent,
                       "rows": tab.rows()})
    _emit({"tables": tables}, args, "oracle.json")
    return 0


def _forward_series(scene: Scene, args) -> reconstruct.LogSeries:
    taus = parse_tau_grid(args.tau_grid, DEFAULT_FORWARD_GRID)
    return forward.indicator_series(scene, taus, truncation_T=getattr(args, "truncation_T", None),
                                    n_max=args.n_max)


def cmd_forward(args) -> int:
    series = _forward_series(_scene(args), args)
    text = series.to_csv()
    sys.stdout.write(text)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "forward.csv").write_text(text)
    return 0


def _reconstruct(series: reconstruct.LogSeries, model: str, T: Optional[float]) -> dict:
    fit = reconstruct.fit_shortest_length(series, model)
    out = fit.to_dict()
    if T is not None:
        out["T"] = T
        out["classification"] = reconstruct.classify_sign(series, T, fit)
    return out


def cmd_reconstruct(args) -> int:
    if args.input:
        gamma0 = load_scene(args.scene).gamma0 if args.scene else args.gamma0
        series = reconstruct.LogSeries.from_csv(args.input, gamma0)
    else:
        series = _forward_series(_scene(args), args)
    _emit(_reconstruct(series, args.model, args.T), args, "reconstruct.json")
    return 0


def cmd_report(args) -> int:
    scene = _scene(args)
    series = _forward_series(scene, args)
    rec = _reconstruct(series, args.model, args.T)
    asy = _asympt(scene, args.T)
    l0 = asy["l0"]
    out = {
        "reconstruction": rec,
        "asymptotics": asy,
        "l0": l0,
        "l0_relative_error": abs(rec["l0_hat"] - l0) / l0,
        "sign_consistent": (rec["sign_class"] == "minus") == (asy["T0"] < 0),
        "forward_approximate": series.meta.get("approximate_superposition", False),
    }
    if args.output_dir:
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
        series.to_csv(Path(args.output_dir) / "forward.csv")
    _emit(out, args, "report.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="enclosure",
                                description="Enclosure-method indicator asymptotics lab.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scene_required=True):
        sp.add_argument("scene", nargs=None if scene_required else "?",
                        help="scene JSON file")
        sp.add_argument("--output-dir", help="also write results here")
        sp.add_argument("--tau-grid", help="'8,12,16' or 'start:stop:step'")
        sp.add_argument("--T", type=float, help="observation time for the limit class")
        sp.add_argument("--n-max", type=int, help="initial Legendre cutoff (forward)")
        sp.add_argument("--grid-level", type=int, default=0, help="oracle grid refinement level")
        sp.add_argument("--model", choices=reconstruct.MODELS, default="slope_plus_log")
        sp.add_argument("--truncation-T", type=float, dest="truncation_T",
                        help="add the synthetic tau^-1 exp(-tau T) term to forward samples")
        return sp

    common(sub.add_parser("stationary", help="stationary pairs and shortest lengths")) \
        .set_defaults(func=cmd_stationary)
    common(sub.add_parser("asympt", help="T0, per-pair table and limit class")) \
        .set_defaults(func=cmd_asympt)
    common(sub.add_parser("oracle", help="quadrature vs top term ratio tables")) \
        .set_defaults(func=cmd_oracle)
    common(sub.add_parser("forward", help="exact indicator series as CSV")) \
        .set_defaults(func=cmd_forward)
    rp = common(sub.add_parser("reconstruct", help="l0 and sign class from a series"),
                scene_required=False)
    rp.add_argument("--input", help="CSV with header tau,sign,log_mag")
    rp.add_argument("--gamma0", type=float, default=1.0, help="used when no scene is given")
    rp.set_defaults(func=cmd_reconstruct)
    common(sub.add_parser("report", help="forward -> reconstruct -> compare")) \
        .set_defaults(func=cmd_report)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SceneError, DegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
