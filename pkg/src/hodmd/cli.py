"""Command-line front end: ``hodmd {decompose,synth,calibrate,compare}``.

Exit codes: 0 ok, 1 tolerance/convergence (or numerical stage) failure,
2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import os
import sys
import time
import warnings
from contextlib import nullcontext
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .frames import (
    CropRect,
    FormatError,
    load_sequence,
    read_hodt,
    render_mode,
    tensor_to_matrix,
    to_bpm,
    write_hodt,
)
from .hodmd import HODMDConfig, calibrate_d, default_d, default_d_candidates, run_hodmd
from .multidim import run_multidim_hodmd
from .synth import ModeSpec, add_noise, match_spectra, synth_matrix, synth_video

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

CSV_COLUMNS = ["index", "omega_rad_s", "omega_bpm", "delta_per_s", "amplitude", "amplitude_ratio"]


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _tolerance(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"tolerance must lie in [0, 1), got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text!r}")
    return value


def _crop(text: str) -> CropRect:
    try:
        return CropRect.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_input(args):
    """Return ``(tensor, dt, descriptor)`` honouring --stride, --crop and --dt."""
    src = Path(args.input)
    if not src.exists() and not glob.glob(str(args.input)):
        raise FileNotFoundError(f"no such input: {args.input}")
    if src.is_file() and src.suffix.lower() == ".hodt":
        T, file_dt = read_hodt(src)
        dt = args.dt if args.dt is not None else file_dt
        if args.crop is not None:
            T = np.stack([args.crop.apply(T[:, :, k]) for k in range(T.shape[2])], axis=2)
        T = T[:, :, :: args.stride]
        descriptor = {"path": str(args.input), "format": "hodt", "sha256": _sha256(src)}
        dt = dt * args.stride
    else:
        dt0 = args.dt if args.dt is not None else 4e-3
        T, meta = load_sequence(args.input, crop=args.crop, stride=args.stride, dt=dt0)
        dt = meta.dt
        descriptor = {"path": str(args.input), "format": "frames", "frames": meta.num_snapshots}
    if T.shape[2] < 2:
        raise UsageError(f"input has {T.shape[2]} snapshot(s) after stride; need at least 2")
    descriptor["shape"] = list(T.shape)
    return T, float(dt), descriptor


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _frequency_rows(expansion):
    reps = expansion.representatives()
    a1 = expansion.amplitudes[reps].max() if reps.size else 0.0
    rows = []
    for i, m in enumerate(reps, start=1):
        a = expansion.amplitudes[m]
        rows.append(
            {
                "index": i,
                "mode": int(m),
                "omega_rad_s": float(expansion.frequencies[m]),
                "omega_bpm": to_bpm(expansion.frequencies[m]),
                "delta_per_s": float(expansion.growth_rates[m]),
                "amplitude": float(a),
                "amplitude_ratio": float(a / a1) if a1 > 0 else 0.0,
            }
        )
    return rows


def _write_frequencies(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r["index"]] + [_fmt(r[c]) for c in CSV_COLUMNS[1:]])


def _read_frequencies(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return SimpleNamespace(
        frequencies=np.array([float(r["omega_rad_s"]) for r in rows]),
        growth_rates=np.array([float(r["delta_per_s"]) for r in rows]),
        amplitudes=np.array([float(r["amplitude"]) for r in rows]),
    )


def _config_from_args(args, K: int, dt: float) -> HODMDConfig:
    d = args.d if args.d is not None else default_d(K)
    cfg = HODMDConfig(d=d, eps_svd=args.eps_svd, eps_dmd=args.eps_dmd, dt=dt, max_rank=args.max_rank)
    try:
        cfg.validate(K)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def cmd_decompose(args) -> int:
    started = time.time()
    T, dt, descriptor = _load_input(args)
    I1, I2, K = T.shape
    cfg = _config_from_args(args, K, dt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    trace = None
    if args.multidim:
        if K < cfg.d + 2:
            raise UsageError(f"multidimensional mode needs K >= d + 2 (K={K}, d={cfg.d})")
        texp, trace = run_multidim_hodmd(
            T, cfg, eps_spatial=args.eps_spatial, max_iters=args.max_iters, zero_growth=args.zero_growth
        )
        expansion = texp.as_matrix_expansion()
        last = trace.records[-1]
        report = {
            "rrmse": last.rrmse,
            "retained_spatial_rank": list(last.ranks),
            "retained_temporal_rank": last.temporal_rank,
            "num_modes": last.num_modes,
        }
    else:
        expansion, rep = run_hodmd(tensor_to_matrix(T), cfg, zero_growth=args.zero_growth)
        report = {
            "rrmse": rep.rrmse,
            "retained_spatial_rank": rep.retained_spatial_rank,
            "retained_temporal_rank": rep.retained_temporal_rank,
            "num_modes": rep.num_modes,
        }

    rows = _frequency_rows(expansion)
    outputs = ["frequencies.csv", "report.json"]
    _write_frequencies(out / "frequencies.csv", rows)
    for r in rows:
        name = f"mode_{r['index']:03d}.pgm"
        render_mode(expansion.modes[:, r["mode"]], (I1, I2), out / name)
        outputs.append(name)

    manifest = {
        "tool": "hodmd",
        "version": __version__,
        "command": "decompose",
        "input": descriptor,
        "config": {
            "d": cfg.d,
            "eps_svd": cfg.eps_svd,
            "eps_dmd": cfg.eps_dmd,
            "dt": cfg.dt,
            "max_rank": cfg.max_rank,
            "t1": cfg.t1,
        },
        "options": {
            "stride": args.stride,
            "crop": None if args.crop is None else [args.crop.x0, args.crop.y0, args.crop.width, args.crop.height],
            "multidim": args.multidim,
            "eps_spatial": args.eps_spatial,
            "max_iters": args.max_iters,
            "zero_growth": args.zero_growth,
        },
        "seed": args.seed,
        "outputs": outputs,
    }
    payload = {"manifest": manifest, "report": report}
    if trace is not None:
        payload["iterations"] = [
            {"ranks": list(r.ranks), "temporal_rank": r.temporal_rank, "num_modes": r.num_modes, "rrmse": r.rrmse}
            for r in trace.records
        ]
        payload["converged"] = trace.converged
    _write_json(out / "report.json", payload)
    # Wall-clock data lives outside report.json so reruns stay byte-identical.
    _write_json(out / "timing.json", {"started": started, "finished": time.time()})

    print(f"RRMSE={_fmt(report['rrmse'])}")
    if trace is not None and not trace.converged:
        print(f"error: no convergence within {args.max_iters} iterations", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _parse_mode(text: str) -> ModeSpec:
    try:
        parts = [float(p) for p in text.split(",")]
        if not 1 <= len(parts) <= 4:
            raise ValueError
        return ModeSpec(*parts)
    except (ValueError, TypeError):
        raise UsageError(f"mode must be amplitude[,omega[,delta[,phase]]] with amplitude >= 0, got {text!r}") from None


def _parse_shape(text: str):
    try:
        dims = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise UsageError(f"shape must be J or I1xI2, got {text!r}") from None
    if len(dims) not in (1, 2) or min(dims) < 1:
        raise UsageError(f"shape must be J or I1xI2, got {text!r}")
    return dims


def cmd_synth(args) -> int:
    specs = [_parse_mode(m) for m in args.mode]
    dims = _parse_shape(args.shape)
    if len(dims) == 1:
        try:
            X = synth_matrix(specs, dims[0], args.K, args.dt, seed=args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        T = X[:, None, :]
        kind = "matrix"
    else:
        T = synth_video(specs, dims[0], dims[1], args.K, args.dt, seed=args.seed)
        kind = "video"
    peak = float(np.abs(T).max())
    sigma_abs = args.sigma * peak
    T = add_noise(T, sigma_abs, seed=args.seed + 1)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_hodt(out / "data.hodt", T, args.dt)
    _write_json(
        out / "truth.json",
        {
            "kind": kind,
            "shape": list(T.shape),
            "dt": args.dt,
            "K": args.K,
            "sigma_rel": args.sigma,
            "sigma_abs": sigma_abs,
            "seed": args.seed,
            "modes": [s.to_dict() for s in specs],
        },
    )
    print(f"wrote {out / 'data.hodt'} and {out / 'truth.json'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    T, dt, _ = _load_input(args)
    K = T.shape[2]
    if args.d_values:
        candidates = [int(v) for v in args.d_values.split(",")]
    elif args.d_min is not None or args.d_max is not None:
        lo = args.d_min if args.d_min is not None else default_d(K)
        hi = args.d_max if args.d_max is not None else K - 1
        candidates = list(range(lo, hi + 1, args.d_step))
    else:
        candidates = default_d_candidates(K)
    kept = [d for d in candidates if 1 <= d < K]
    if len(kept) < len(candidates):
        dropped = sorted(set(candidates) - set(kept))
        print(f"warning: dropping delays outside [1, {K - 1}]: {dropped}", file=sys.stderr)
    if not kept:
        raise UsageError("no valid delay candidates")
    cfg = HODMDConfig(d=kept[0], eps_svd=args.eps_svd, eps_dmd=args.eps_dmd, dt=dt, max_rank=args.max_rank)
    best, rows = calibrate_d(tensor_to_matrix(T), cfg, kept)

    print("d,N,N_prime,M,rrmse")
    for r in rows:
        print(f"{r.d},{r.spatial_rank},{r.temporal_rank},{r.num_modes},{_fmt(r.rrmse)}")
    print(f"best_d={best}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "calibration.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "N", "N_prime", "M", "rrmse"])
        for r in rows:
            w.writerow([r.d, r.spatial_rank, r.temporal_rank, r.num_modes, _fmt(r.rrmse)])
    return EXIT_OK


def cmd_compare(args) -> int:
    truth = json.loads(Path(args.truth).read_text(encoding="utf-8"))
    specs = [ModeSpec.from_dict(m) for m in truth["modes"]]
    recovered = _read_frequencies(Path(args.report_dir) / "frequencies.csv")
    rep = match_spectra(specs, recovered, args.tol_omega, floor=args.floor)
    ok = rep.all_matched
    for s, ri, dw, dd, ra in sorted(rep.pairs, key=lambda p: p[0].frequency):
        bad = (args.tol_delta is not None and dd > args.tol_delta) or (
            args.tol_amplitude is not None and ra > args.tol_amplitude
        )
        ok = ok and not bad
        print(
            f"{'FAIL' if bad else 'ok  '} omega={_fmt(s.frequency)} -> {_fmt(recovered.frequencies[ri])} "
            f"|d_omega|={dw:.3e} |d_delta|={dd:.3e} amp_rel_err={ra:.3e}"
        )
    for s in rep.unmatched_truth:
        print(f"FAIL omega={_fmt(s.frequency)} unmatched")
    print(f"matched {len(rep.pairs)}/{len(specs)}; extra recovered {len(rep.unmatched_recovered)}; "
          f"noise floor {len(rep.noise_floor)}")
    return EXIT_OK if ok else EXIT_FAIL


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="HODT tensor file, frame directory or glob pattern")
    p.add_argument("--d", type=_positive_int, default=None, help="delay index (default: round(K/10))")
    p.add_argument("--eps-svd", type=_tolerance, default=5e-4)
    p.add_argument("--eps-dmd", type=_tolerance, default=5e-4)
    p.add_argument("--dt", type=_positive_float, default=None,
                   help="time step in s (default: stored value for HODT, else 4e-3)")
    p.add_argument("--max-rank", type=_positive_int, default=None)
    p.add_argument("--stride", type=_positive_int, default=1)
    p.add_argument("--crop", type=_crop, default=None, metavar="x0,y0,w,h")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hodmd", description="Higher order dynamic mode decomposition")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="run HODMD and write frequencies, modes and a report")
    _add_engine_flags(p)
    p.add_argument("--multidim", action="store_true", help="iterative HOSVD-based variant")
    p.add_argument("--eps-spatial", type=_tolerance, default=5e-4)
    p.add_argument("--max-iters", type=_positive_int, default=20)
    p.add_argument("--zero-growth", action="store_true", help="set growth rates to 0 when reconstructing")
    p.add_argument("--out", default="hodmd_out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("synth", help="write a synthetic HODT tensor and its ground truth")
    p.add_argument("--mode", action="append", required=True, metavar="a,omega[,delta[,phase]]")
    p.add_argument("--shape", default="64", help="J (matrix) or I1xI2 (video)")
    p.add_argument("--K", type=_positive_int, default=100)
    p.add_argument("--dt", type=_positive_float, default=4e-3)
    p.add_argument("--sigma", type=float, default=0.0, help="noise std relative to max |data|")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth_out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="sweep the delay index and report RRMSE")
    _add_engine_flags(p)
    p.add_argument("--d-min", type=_positive_int, default=None)
    p.add_argument("--d-max", type=_positive_int, default=None)
    p.add_argument("--d-step", type=_positive_int, default=5)
    p.add_argument("--d-values", default=None, help="comma separated delays")
    p.add_argument("--out", default="hodmd_out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare", help="match a run's frequencies against truth.json")
    p.add_argument("truth")
    p.add_argument("report_dir")
    p.add_argument("--tol-omega", type=_positive_float, default=1e-6)
    p.add_argument("--tol-delta", type=float, default=None)
    p.add_argument("--tol-amplitude", type=float, default=None)
    p.add_argument("--floor", type=float, default=1e-3)
    p.set_defaults(func=cmd_compare)
    return ap


def _thread_limit():
    value = os.environ.get("HODMD_THREADS")
    if not value:
        return nullcontext()
    try:
        limit = int(value)
    except ValueError:
        raise UsageError(f"HODMD_THREADS must be a positive integer, got {value!r}") from None
    if limit < 1:
        raise UsageError(f"HODMD_THREADS must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=limit)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if getattr(args, "command", None) == "synth" and args.sigma < 0:
        print(f"{parser.prog} synth: error: --sigma must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            with _thread_limit():
                code = args.func(args)
        except UsageError as exc:
            print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
            code = EXIT_USAGE
        except (OSError, FormatError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_IO
        except (ValueError, np.linalg.LinAlgError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_FAIL
    seen = set()
    for w in caught:
        msg = str(w.message)
        if msg not in seen:
            seen.add(msg)
            print(f"warning: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
