"""Command-line interface: ``grf gen | refine | validate | spectrum | bench | replay``.

Exit codes: 0 success, 1 computational failure, 2 usage error.
Environment: ``GRF_THREADS`` caps worker threads, ``GRF_SEED`` is the
default seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import CovarianceModel, Kernel1D, KernelKind
from .errors import GRFError
from .formats import (TAG_FIELD, TAG_NOISE, atomic_write, payload_checksum, read_grid,
                      read_json, write_grid, write_json)
from .multiscale import NOISE_MODES, RefinementState, refine
from .oracle import (build_cov_matrix, cmd_sample, covariance_profile, flop_estimate,
                     stepwise_cmd_sample, target_profile)
from .sampler import FieldGrid, NoiseGrid, design_filters, generate
from .spectral import design_filter

MANIFEST_FORMAT = "grf-manifest"
FILTER_FORMAT = "grf-filter"
# keys of a command's parameters that name output files
OUTPUT_KEYS = ("out", "noise_out", "manifest", "out_prefix", "plot", "text")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# flag parsing helpers

def _floats(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}")


def _ints(text, name):
    try:
        return [int(v) for v in str(text).split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated integers, got {text!r}")


def _per_dim(values, dims, name, allow_scalar=True):
    if len(values) == dims:
        return list(values)
    if allow_scalar and len(values) == 1:
        return list(values) * dims
    raise UsageError(f"--{name} has {len(values)} entries, expected {dims}")


def _read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"--config: {exc}")
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _merge_config(args):
    cfg = getattr(args, "config", None)
    if not cfg:
        return
    for key, val in _read_config(cfg).items():
        if not hasattr(args, key):
            raise UsageError(f"{cfg}: unknown key {key!r}")
        if getattr(args, key) is None:
            setattr(args, key, val)


def _resolve_seed(args):
    if args.seed is None:
        env = os.environ.get("GRF_SEED")
        args.seed = env if env is not None else 0
    try:
        args.seed = int(args.seed)
    except ValueError:
        raise UsageError(f"seed must be an integer, got {args.seed!r}")
    if not 0 <= args.seed < 2 ** 64:
        raise UsageError("seed must be in [0, 2**64)")


def _model(args, dims) -> CovarianceModel:
    """Build the model from --cov/--alpha/--sigma2/--T (and --seq)."""
    if args.T is None:
        raise UsageError("--T is required")
    T = _per_dim(_floats(args.T, "T"), dims, "T", allow_scalar=False)
    covs = _per_dim(str(args.cov or "exp").split(","), dims, "cov")
    s2 = _floats(args.sigma2, "sigma2") if args.sigma2 is not None else [1.0]
    if len(s2) == 1:
        s2 = s2 + [1.0] * (dims - 1)  # a single value is the field variance
    s2 = _per_dim(s2, dims, "sigma2")
    alpha = None
    kernels = []
    for j, kind in enumerate(covs):
        kind = kind.strip()
        if kind in ("exp", "gauss"):
            if alpha is None:
                if args.alpha is None:
                    raise UsageError("--alpha is required for exp/gauss kernels")
                alpha = _per_dim(_floats(args.alpha, "alpha"), dims, "alpha", allow_scalar=False)
            kernels.append(Kernel1D(KernelKind(kind), s2[j], alpha[j]))
        elif kind == "custom":
            if getattr(args, "seq", None) is None:
                raise UsageError("--cov custom needs --seq")
            kernels.append(Kernel1D.custom(_floats(args.seq, "seq")))
        else:
            raise UsageError(f"--cov: unknown kernel {kind!r} (exp, gauss, custom)")
    return CovarianceModel(tuple(kernels), tuple(T))


def _filter_opts(args, dims):
    b = _floats(args.b, "b") if args.b is not None else None
    m = None
    if args.m is not None:
        ms = _per_dim(_ints(args.m, "m"), dims, "m")
        m = ms
    thr = float(args.threshold) if args.threshold is not None else 1e-3
    return b, m, thr


def _params(args) -> dict:
    skip = {"func", "command", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _manifest(args, outputs: dict, extra: dict = None, parent=None) -> dict:
    doc = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "tool": f"grf {__version__}",
        "command": args.command,
        "argv": list(sys.argv[1:]),
        "params": _params(args),
        "outputs": outputs,
        "parent": parent,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        doc.update(extra)
    return doc


def _say(msg):
    print(msg, flush=True)


# --------------------------------------------------------------------------
# commands

def cmd_gen(args):
    _merge_config(args)
    _resolve_seed(args)
    if args.N is None:
        raise UsageError("--N is required")
    N = _ints(args.N, "N")
    if not N or any(n < 1 for n in N):
        raise UsageError("--N must list positive extents")
    dims = len(N)
    model = _model(args, dims)
    b, m, thr = _filter_opts(args, dims)
    beta = float(args.beta if args.beta is not None else 0.1)
    burn = _ints(args.burn_in, "burn-in") if args.burn_in is not None else None
    if burn is not None:
        burn = _per_dim(burn, dims, "burn-in")
    t0 = time.perf_counter()
    designs = design_filters(model, b=b, m=m, threshold=thr)
    t1 = time.perf_counter()
    field, noise = generate(model, N, args.seed, beta, filters=[d.filter for d in designs],
                            min_burn_in=int(args.min_burn_in), burn_in=burn,
                            threads=args.threads)
    t2 = time.perf_counter()
    man = args.manifest or f"{args.out}.json"
    rel = lambda p: os.path.relpath(p, Path(man).parent)
    outputs = {"field": rel(args.out)}
    checksum = write_grid(args.out, field.data, field.T, TAG_FIELD)
    if args.noise_out:
        write_grid(args.noise_out, noise.data, noise.T, TAG_NOISE)
        outputs["noise"] = rel(args.noise_out)
    doc = _manifest(args, outputs, {
        "model": model.to_dict(), "N": list(N), "M": list(noise.N), "seed": args.seed,
        "beta": beta, "scale_level": 0,
        "filters": [d.to_dict() for d in designs],
        "filter_orders": [[d.filter.m, d.filter.n] for d in designs],
        "checksum": {"field": checksum},
        "timing": {"filters": t1 - t0, "realization": t2 - t1},
    })
    write_json(man, doc)
    _say(f"field {tuple(N)} written to {args.out} (manifest {man})")
    _say(f"orders {[(d.filter.m, d.filter.n) for d in designs]}, padded grid {noise.N}")
    _say(f"filters {t1 - t0:.3f} s, realization {t2 - t1:.3f} s")
    _say(f"sha256 {checksum}")
    return 0


def _load_state(path):
    doc = read_json(path)
    if doc.get("format") != MANIFEST_FORMAT:
        raise UsageError(f"{path} is not a run manifest")
    base = Path(path).parent
    outs = doc.get("outputs", {})
    if "field" not in outs:
        raise UsageError(f"{path} names no field file")
    fpath = base / outs["field"] if not Path(outs["field"]).is_absolute() else Path(outs["field"])
    if "noise" not in outs:
        raise GRFError(
            f"{path} has no noise file; rerun generation with --noise-out, e.g. "
            f"'grf replay --manifest {path}' after adding noise_out to it, or "
            f"'grf gen ... --seed {doc.get('seed')} --noise-out NOISE.grf'")
    npath = base / outs["noise"] if not Path(outs["noise"]).is_absolute() else Path(outs["noise"])
    if not npath.exists():
        raise GRFError(
            f"noise file {npath} is missing; regenerate it with "
            f"'grf replay --manifest {path}' (seed {doc.get('seed')})")
    if not fpath.exists():
        raise GRFError(f"field file {fpath} is missing; regenerate it with "
                       f"'grf replay --manifest {path}'")
    fdata, fT, ftag = read_grid(fpath)
    ndata, nT, ntag = read_grid(npath)
    if ftag != TAG_FIELD or ntag != TAG_NOISE:
        raise GRFError("state files have the wrong payload tags")
    model = CovarianceModel.from_dict(doc["model"])
    level = int(doc.get("scale_level", 0))
    meta = {"seed": doc.get("seed"), "scale_level": level}
    state = RefinementState(FieldGrid(fdata, fT, meta), NoiseGrid(ndata, doc.get("seed"), nT),
                            model, level=level)
    return state, doc


def cmd_refine(args):
    _merge_config(args)
    _resolve_seed(args)
    levels = int(args.levels)
    if levels < 0:
        raise UsageError("--levels must be non-negative")
    if levels == 0:
        _say("0 levels requested; nothing to do")
        return 0
    state, doc = _load_state(args.state)
    if not args.out_prefix:
        stem = Path(args.state).with_suffix("")
        if stem.suffix == ".grf":
            stem = stem.with_suffix("")
        args.out_prefix = str(stem) + "_fine"
    prefix = args.out_prefix
    parent = str(args.state)
    for lv in range(1, levels + 1):
        seed = args.seed + lv - 1
        t0 = time.perf_counter()
        field, state = refine(state, seed, mode=args.mode)
        dt = time.perf_counter() - t0
        fpath, npath, mpath = f"{prefix}_L{lv}.grf", f"{prefix}_L{lv}.noise.grf", f"{prefix}_L{lv}.json"
        checksum = write_grid(fpath, field.data, field.T, TAG_FIELD)
        write_grid(npath, state.coarse_noise.data, state.coarse_noise.T, TAG_NOISE)
        err = field.meta["interp_error"]
        out_base = Path(mpath).parent
        rel = lambda p: os.path.relpath(p, out_base)
        man = _manifest(args, {"field": rel(fpath), "noise": rel(npath)}, {
            "model": state.model.to_dict(), "N": list(field.N), "seed": seed,
            "scale_level": state.level, "noise_mode": args.mode,
            "interp_error": err, "checksum": {"field": checksum},
            "filter_orders": [[1, 0]] * state.model.dims,
            "timing": {"refine": dt},
        }, parent=parent)
        write_json(mpath, man)
        parent = mpath
        _say(f"level {lv}: {field.N} -> {fpath}, interpolation error {err:.3e}, {dt:.3f} s")
        if not err <= 1e-9:
            raise GRFError(f"interpolation error {err:.3e} above 1e-9 at level {lv}")
    return 0


def _profiles_from_fields(fields, dirs, max_lag):
    acc = {}
    for y in fields:
        for d in dirs:
            p = covariance_profile(y, d, max_lag.get(d))
            acc[d] = acc.get(d, 0) + p / len(fields)
    return acc


def cmd_validate(args):
    _merge_config(args)
    _resolve_seed(args)
    if args.inputs:
        fields = []
        for p in args.inputs:
            data, T, tag = read_grid(p)
            fields.append(data)
        dims = fields[0].ndim
        if any(f.shape != fields[0].shape for f in fields):
            raise UsageError("all --in fields must have the same extents")
        if args.T is None:
            args.T = ",".join(repr(t) for t in T)
        model = _model(args, dims)
        N = fields[0].shape
    else:
        if args.N is None:
            raise UsageError("validate needs --in files or --N with model flags")
        N = tuple(_ints(args.N, "N"))
        dims = len(N)
        model = _model(args, dims)
        b, m, thr = _filter_opts(args, dims)
        filters = [d.filter for d in design_filters(model, b=b, m=m, threshold=thr)]
        beta = float(args.beta if args.beta is not None else 0.1)
        fields = (generate(model, N, args.seed + t, beta, filters=filters,
                           threads=args.threads)[0].data for t in range(int(args.trials)))
    if args.dirs is None:
        dirs = list("xyz"[:dims]) + (["diag"] if dims > 1 else [])
    else:
        dirs = [d.strip() for d in args.dirs.split(",") if d.strip()]
    for d in dirs:
        if d not in ("x", "y", "z", "diag") or (d != "diag" and "xyz".index(d) >= dims):
            raise UsageError(f"direction {d!r} invalid for a {dims}-d field")
    limit = {d: (min(N) if d == "diag" else N["xyz".index(d)]) - 1 for d in dirs}
    if args.max_lag is not None:
        limit = {d: min(v, int(args.max_lag)) for d, v in limit.items()}
    fields = list(fields) if args.inputs else fields
    n_used = len(fields) if args.inputs else int(args.trials)
    prof = _profiles_from_fields(list(fields), dirs, limit)
    s2 = model.sigma2
    prefix = args.out or "profile"
    summary = {}
    csvs = {}
    for d in dirs:
        target, dist = target_profile(model, d, limit[d])
        sample = prof[d]
        mask = target >= 0.05 * s2
        dev = float(np.max(np.abs(sample - target)[mask])) if mask.any() else 0.0
        summary[d] = dev
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", "distance", "sample_cov", "target_cov"])
        for k in range(limit[d] + 1):
            w.writerow([k, repr(float(dist[k])), repr(float(sample[k])), repr(float(target[k]))])
        path = f"{prefix}_{d}.csv"
        atomic_write(path, buf.getvalue().encode())
        csvs[d] = path
    if args.plot:
        atomic_write(args.plot, plot_script(csvs).encode())
    write_json(f"{prefix}_summary.json", _manifest(args, {"csv": csvs, "plot": args.plot}, {
        "trials": n_used, "max_abs_deviation": summary, "sigma2": s2}))
    for d in dirs:
        _say(f"{d}: max |sample - target| over lags with target >= 0.05 sigma2: "
             f"{summary[d]:.4f} ({summary[d] / s2:.4f} sigma2)")
    return 0


def plot_script(csvs: dict) -> str:
    """Gnuplot script overlaying sample and target profiles."""
    lines = ["set datafile separator ','", "set key top right",
             "set xlabel 'distance'", "set ylabel 'covariance'", "plot \\"]
    parts = []
    for i, (d, path) in enumerate(csvs.items()):
        parts.append(f"  '{path}' using 2:3 every ::1 with points pt 7 lc {i + 1} "
                     f"title '{d} sample'")
        parts.append(f"  '{path}' using 2:4 every ::1 with lines lc {i + 1} title '{d} target'")
    lines.append(", \\\n".join(parts))
    return "\n".join(lines) + "\n"


def cmd_spectrum(args):
    _merge_config(args)
    model = _model(args, 1)
    b, m, thr = _filter_opts(args, 1)
    kern = model.kernels[0]
    t0 = time.perf_counter()
    des = design_filter(kern, model.T[0], b=b, m=None if m is None else m[0], threshold=thr)
    dt = time.perf_counter() - t0
    doc = {"format": FILTER_FORMAT, "version": 1, "tool": f"grf {__version__}",
           "kernel": kern.to_dict(), "T": model.T[0], "seconds": dt}
    doc.update(des.to_dict())
    doc["orders"] = {"m": des.filter.m, "n": des.filter.n}
    if des.report is not None:
        doc["moment_residuals"] = des.report.moment_residuals.tolist()
        doc["dual_iterations"] = des.report.iterations
    else:
        doc["moment_residuals"] = [0.0, 0.0]
        doc["dual_iterations"] = 0
    write_json(args.out, doc)
    if args.text:
        atomic_write(args.text, des.filter.to_text().encode())
    _say(f"filter ARMA({des.filter.m},{des.filter.n}) written to {args.out}")
    if des.report is not None:
        _say(f"dual iterations {des.report.iterations}, max |moment residual| "
             f"{np.max(np.abs(des.report.moment_residuals)):.3e}")
    for note in des.notes:
        _say(f"note: {note}")
    return 0


def _parse_sizes(text):
    sizes = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            if "x" in item:
                sizes.append(tuple(int(v) for v in item.split("x")))
            else:
                sizes.append((int(item),) * 3)
        except ValueError:
            raise UsageError(f"--sizes: bad size {item!r}")
    if not sizes:
        raise UsageError("--sizes is empty")
    return sizes


def bench_model(dims: int) -> CovarianceModel:
    T = (1 / 12, 1 / 10, 1 / 8, 1 / 6)[:dims] if dims <= 4 else (0.1,) * dims
    return CovarianceModel(tuple(Kernel1D.exponential(1.0, 1.0) for _ in range(dims)), T)


def cmd_bench(args):
    sizes = _parse_sizes(args.sizes)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("realization", "stepwise", "cmd"):
            raise UsageError(f"--methods: unknown method {m!r}")
    reps = int(args.repeats)
    rows = []
    for method in methods:
        prev = None
        for N in sizes:
            n = int(np.prod(N))
            model = bench_model(len(N))
            note = ""
            times = []
            if method == "cmd" and n > args.cmd_cap:
                note = f"skipped: {n} unknowns above cmd cap {args.cmd_cap}"
            elif method == "stepwise" and max(N) > args.stepwise_cap:
                note = f"skipped: extent above stepwise cap {args.stepwise_cap}"
            else:
                filters = [d.filter for d in design_filters(model)]
                for r in range(reps):
                    t0 = time.perf_counter()
                    if method == "realization":
                        generate(model, N, r, args.beta, filters=filters,
                                 min_burn_in=args.min_burn_in, threads=args.threads)
                    elif method == "stepwise":
                        stepwise_cmd_sample(model, N, r)
                    else:
                        cmd_sample(build_cov_matrix(model, N), r)
                    times.append(time.perf_counter() - t0)
            med = float(np.median(times)) if times else float("nan")
            ratio = med / prev if prev and times else float("nan")
            prev = med if times else None
            rows.append([method, "x".join(map(str, N)), n, repr(med), repr(ratio),
                         f"{flop_estimate(method, N):.3e}", note])
            _say(f"{method:12s} {'x'.join(map(str, N)):>12s} median {med:.4f} s"
                 + (f" ratio {ratio:.2f}" if ratio == ratio else "") + (f"  [{note}]" if note else ""))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "N", "samples", "median_seconds", "ratio_to_previous", "flops", "note"])
    w.writerows(rows)
    w.writerow([])
    w.writerow(["table", "N_or_C", "", "", "", "flops", ""])
    for row in flop_table():
        w.writerow(["table", row[1], "", "", "", row[2], row[0]])
    atomic_write(args.out, buf.getvalue().encode())
    for row in flop_table():
        _say(f"{row[0]:12s} {row[1]:>12s} {row[2]}")
    return 0


def flop_table():
    """Leading-order counts at the reference sizes 100^3 (and 512^3 embedding)."""
    N, C = (100, 100, 100), (512, 512, 512)
    return [("cmd", "100x100x100", f"{flop_estimate('cmd', N):.2e}"),
            ("stepwise", "100x100x100", f"{flop_estimate('stepwise', N):.2e}"),
            ("circulant", "512x512x512", f"{flop_estimate('circulant', C=C):.2e}"),
            ("realization", "100x100x100", f"{flop_estimate('realization', N):.2e}")]


def cmd_replay(args):
    doc = read_json(args.manifest)
    if doc.get("format") != MANIFEST_FORMAT:
        raise UsageError(f"{args.manifest} is not a run manifest")
    params = dict(doc["params"])
    if args.out_dir:
        for key in OUTPUT_KEYS:
            if params.get(key):
                params[key] = str(Path(args.out_dir) / Path(params[key]).name)
    handler = COMMANDS[doc["command"]]
    ns = argparse.Namespace(command=doc["command"], config=None, **params)
    return handler(ns)


COMMANDS = {"gen": cmd_gen, "refine": cmd_refine, "validate": cmd_validate,
            "spectrum": cmd_spectrum, "bench": cmd_bench, "replay": cmd_replay}


# --------------------------------------------------------------------------
# parser

def _model_flags(p, with_N=True):
    p.add_argument("--config", help="key=value file supplying defaults for these flags")
    p.add_argument("--cov", help="kernel per axis: exp, gauss or custom (one value or one per axis)")
    p.add_argument("--alpha", help="decay rates, one per axis")
    p.add_argument("--sigma2", help="field variance, or one variance per axis")
    p.add_argument("--T", help="sampling distances, one per axis")
    p.add_argument("--seq", help="covariance table for --cov custom")
    if with_N:
        p.add_argument("--N", help="grid extents; their count sets the dimension")
    p.add_argument("--b", help="ARMA numerator coefficients (default 1)")
    p.add_argument("--m", help="denominator order (default: automatic)")
    p.add_argument("--threshold", help="negligible-covariance threshold for automatic m")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"grf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a realization")
    _model_flags(p)
    p.add_argument("--seed")
    p.add_argument("--beta", type=float, help="relative burn-in (default 0.1)")
    p.add_argument("--burn-in", help="explicit burn-in per axis")
    p.add_argument("--min-burn-in", type=int, default=50)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True, help="field file (GRF1)")
    p.add_argument("--noise-out", help="also write the padded noise grid (needed by refine)")
    p.add_argument("--manifest", help="manifest path (default OUT.json)")

    p = sub.add_parser("refine", help="refine a stored 1-d/2-d exponential realization")
    p.add_argument("--config")
    p.add_argument("--state", required=True, help="manifest of the coarse run")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--seed")
    p.add_argument("--mode", choices=NOISE_MODES, default="conditional",
                   help="fine-noise reconstruction (default conditional)")
    p.add_argument("--out-prefix")

    p = sub.add_parser("validate", help="compare sample and target covariance profiles")
    _model_flags(p)
    p.add_argument("--in", dest="inputs", nargs="+", help="field files to average")
    p.add_argument("--dirs", help="comma-separated subset of x,y,z,diag (default: all axes and diag)")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed")
    p.add_argument("--beta", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--max-lag", type=int)
    p.add_argument("--out", help="CSV prefix (files PREFIX_<dir>.csv)")
    p.add_argument("--plot", help="write a gnuplot script here")

    p = sub.add_parser("spectrum", help="build a 1-d shaping filter")
    _model_flags(p, with_N=False)
    p.add_argument("--out", required=True, help="filter JSON document")
    p.add_argument("--text", help="also write the a:/b: text form")

    p = sub.add_parser("bench", help="time sampling methods")
    p.add_argument("--sizes", default="32,64,128", help="edges (cubes) or AxBxC items")
    p.add_argument("--methods", default="realization")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--min-burn-in", type=int, default=0,
                   help="burn-in floor for the realization path (default 0: proportional)")
    p.add_argument("--cmd-cap", type=int, default=4096, help="largest dense CMD problem")
    p.add_argument("--stepwise-cap", type=int, default=512)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="bench.csv")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", help="write outputs here instead of the recorded paths")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"grf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GRFError, OSError, ValueError) as exc:
        print(f"grf {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if report is not None:
            print(json.dumps(report.to_dict(), indent=2), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
