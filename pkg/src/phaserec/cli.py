"""Command-line interface: generate, solve, verify, bench.

Instances, truths and reports are the text documents defined in
:mod:`phaserec.io`.  Solving writes a report (text or JSON); with
``--emit-curves`` it additionally writes plain-column data files and
renders the matching PNG figures next to them.  Exit status is 0 for
every completed solve, including flagged approximate ones; nonzero is
reserved for usage and I/O errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .engine1d import solve_1d_refined
from .engine2d import ProblemInstance2D, forward_dft_2d, solve_2d_refined
from .io import (
    InstanceDocument,
    fmt,
    read_instance,
    read_report_recovered,
    read_truth,
    render_report_json,
    render_report_text,
    sniff_kind,
    write_instance,
    write_truth_1d,
    write_truth_2d,
)
from .oracle import (
    GENERATOR_KINDS,
    PAPER_H_T_STEP,
    SINC_CONVENTION,
    ErrorMetrics,
    GeneratorSpec,
    gauge_align,
    generate,
    generate_2d,
)
from .spectral import CenteredSpectrum, forward_dft

_KIND_FLAGS = {k.replace("_", "-"): k for k in GENERATOR_KINDS}


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


# -- generate -----------------------------------------------------------------


def _read_custom_coeffs(path: str) -> tuple[np.ndarray, tuple[int, int]]:
    entries = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        idx, re, im = line.split()
        entries[int(idx)] = complex(float(re), float(im))
    if not entries:
        raise ValueError(f"{path}: no coefficients found")
    s0, s1 = min(entries), max(entries)
    window = np.zeros(s1 - s0 + 1, dtype=np.complex128)
    for idx, val in entries.items():
        window[idx - s0] = val
    return window, (s0, s1)


def cmd_generate(args: argparse.Namespace) -> int:
    if args.mode == "2d":
        if not args.out:
            return _fail("--out is required")
        truth, inst = generate_2d(
            order=args.order,
            grid_len=args.grid,
            seed=args.seed,
            min_modulus=args.min_modulus if args.min_modulus is not None else 0.3,
            noise_amplitude=args.noise,
        )
        metadata = {
            "kind": "random-2d",
            "seed": str(args.seed),
            "noise_amplitude": fmt(args.noise),
        }
        write_instance(args.out, inst, metadata)
        if args.truth_out:
            write_truth_2d(args.truth_out, truth, inst.grid_len, metadata)
        return 0

    kind = _KIND_FLAGS.get(args.kind)
    if kind is None:
        return _fail(f"unknown kind {args.kind!r}; choose from {sorted(_KIND_FLAGS)}")
    coeffs = None
    support = None
    if kind == "custom_coeffs":
        if not args.coeffs:
            return _fail("--coeffs FILE is required with --kind custom-coeffs")
        window, support = _read_custom_coeffs(args.coeffs)
        coeffs = tuple(window)
    spec = GeneratorSpec(
        kind=kind,
        size=args.size,
        grid_len=args.grid,
        seed=args.seed,
        noise_amplitude=args.noise,
        min_modulus=args.min_modulus if args.min_modulus is not None else 0.1,
        coeffs=coeffs,
        support=support,
    )
    truth, inst = generate(spec)
    metadata = {
        "kind": args.kind,
        "seed": str(args.seed),
        "noise_amplitude": fmt(args.noise),
        "min_modulus": fmt(spec.min_modulus),
    }
    if kind == "paper_h":
        metadata["sinc"] = SINC_CONVENTION
        metadata["t_start"] = "0"
        metadata["t_step"] = fmt(PAPER_H_T_STEP)
    if not args.out:
        return _fail("--out is required")
    write_instance(args.out, inst, metadata)
    if args.truth_out:
        write_truth_1d(args.truth_out, truth, metadata)
    return 0


# -- solve ----------------------------------------------------------------------


def _load_priors(path: str, mode: str):
    kind = sniff_kind(path)
    if kind == "report":
        rmode, coeffs, info = read_report_recovered(path)
        if rmode != mode:
            raise ValueError(f"priors file {path} is {rmode}, instance is {mode}")
        if mode == "1d":
            s0 = info["support"][0]
            return {
                s0 + i: (v / abs(v)) if abs(v) > 0 else (1.0 + 0.0j)
                for i, v in enumerate(coeffs)
            }
        from .engine2d import priors_from_coeffs_2d

        return priors_from_coeffs_2d(coeffs)
    if kind == "truth":
        doc = read_truth(path)
        if doc.mode != mode:
            raise ValueError(f"priors file {path} is {doc.mode}, instance is {mode}")
        if mode == "1d":
            from .engine1d import priors_from_spectrum

            return priors_from_spectrum(doc.spectrum())
        from .engine2d import priors_from_coeffs_2d

        return priors_from_coeffs_2d(doc.coeffs)
    # bare priors: "index re im" (1d) or "n1 n2 re im" (2d)
    priors = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if mode == "1d":
            if len(parts) != 3:
                raise ValueError(f"{path}: expected 'index re im', got {line!r}")
            priors[int(parts[0])] = complex(float(parts[1]), float(parts[2]))
        else:
            if len(parts) != 4:
                raise ValueError(f"{path}: expected 'n1 n2 re im', got {line!r}")
            priors[(int(parts[0]), int(parts[1]))] = complex(float(parts[2]), float(parts[3]))
    return priors


def _field_axis(doc: InstanceDocument) -> tuple[np.ndarray, str]:
    m = doc.instance.grid_len
    lmin = -(m // 2)
    indices = np.arange(m) + lmin
    if "t_start" in doc.metadata and "t_step" in doc.metadata:
        t0 = float(doc.metadata["t_start"])
        dt = float(doc.metadata["t_step"])
        return t0 + (indices - lmin) * dt, "t"
    return indices.astype(float), "grid index"


def _emit_curves_1d(
    prefix: str,
    doc: InstanceDocument,
    recovered: CenteredSpectrum,
    figures: bool,
) -> list[str]:
    from . import figures as figmod

    inst = doc.instance
    axis, axis_label = _field_axis(doc)
    given = inst.field_magnitude
    rec_mag = np.abs(forward_dft(recovered).values)
    field_path = f"{prefix}_field.txt"
    lines = [f"# {axis_label}  |f_given|  |f_recovered|"]
    lines += [f"{fmt(a)} {fmt(g)} {fmt(r)}" for a, g, r in zip(axis, given, rec_mag)]
    Path(field_path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    spec_path = f"{prefix}_spectrum.txt"
    s0 = recovered.support[0]
    idx = np.arange(inst.coeff_magnitudes.size) + s0
    lines = ["# index  |a|"]
    lines += [f"{i} {fmt(v)}" for i, v in zip(idx, inst.coeff_magnitudes)]
    Path(spec_path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    written = [field_path, spec_path]
    if figures:
        figmod.render_field_comparison(f"{prefix}_field.png", axis, given, rec_mag, axis_label)
        figmod.render_spectrum(f"{prefix}_spectrum.png", idx, inst.coeff_magnitudes)
        written += [f"{prefix}_field.png", f"{prefix}_spectrum.png"]
    return written


def _emit_curves_2d(
    prefix: str,
    inst: ProblemInstance2D,
    recovered: np.ndarray,
    figures: bool,
) -> list[str]:
    from . import figures as figmod

    rec_mag = np.abs(forward_dft_2d(recovered, inst.grid_len))
    m = inst.grid_len
    lmin = -(m // 2)
    field_path = f"{prefix}_field.txt"
    lines = ["# k1 k2  |f_given|  |f_recovered|"]
    for i in range(m):
        for j in range(m):
            lines.append(
                f"{i + lmin} {j + lmin} {fmt(inst.field_magnitude[i, j])} {fmt(rec_mag[i, j])}"
            )
    Path(field_path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    written = [field_path]
    if figures:
        figmod.render_field_comparison_2d(f"{prefix}_field.png", inst.field_magnitude, rec_mag)
        written.append(f"{prefix}_field.png")
    return written


def cmd_solve(args: argparse.Namespace) -> int:
    doc = read_instance(args.instance)
    inst = doc.instance
    overrides = {}
    if args.gauge is not None:
        overrides["gauge_phase"] = complex(np.cos(args.gauge), np.sin(args.gauge))
    if args.priors:
        overrides["priors"] = _load_priors(args.priors, doc.mode)
    if overrides:
        from dataclasses import replace

        inst = replace(inst, **overrides)

    start = time.perf_counter()
    if doc.is_2d:
        report = solve_2d_refined(inst, passes=args.refine_passes, selector=args.selector)
        rec_field_mag = np.abs(forward_dft_2d(report.recovered, inst.grid_len))
    else:
        report = solve_1d_refined(inst, passes=args.refine_passes, selector=args.selector)
        rec_field_mag = np.abs(forward_dft(report.recovered).values)
    elapsed = time.perf_counter() - start

    rms_ref = float(np.sqrt(np.mean(inst.field_magnitude**2)))
    field_err = float(np.sqrt(np.mean((rec_field_mag - inst.field_magnitude) ** 2)))
    field_err /= rms_ref if rms_ref > 0 else 1.0

    spectral = float("nan")
    metric_flags: tuple[str, ...] = ()
    if args.truth:
        tdoc = read_truth(args.truth)
        if tdoc.mode != doc.mode:
            return _fail(f"truth file is {tdoc.mode}, instance is {doc.mode}")
        if doc.is_2d:
            spectral, _, metric_flags = gauge_align(tdoc.coeffs, report.recovered)
        else:
            truth_spec = tdoc.spectrum()
            if truth_spec.support != report.recovered.support:
                # the solver may have trimmed; align on the recovered window
                s0, s1 = report.recovered.support
                t0 = truth_spec.support[0]
                tw = truth_spec.window()[s0 - t0:s1 - t0 + 1]
            else:
                tw = truth_spec.window()
            spectral, _, metric_flags = gauge_align(tw, report.recovered.window())

    metrics = ErrorMetrics(
        spectral_error=spectral,
        field_magnitude_error=field_err,
        residual=report.final_residual,
        flags=metric_flags,
    )
    if args.format == "json":
        text = render_report_json(report, metrics, elapsed, args.refine_passes)
    else:
        text = render_report_text(report, metrics, elapsed, args.refine_passes)
    _write_or_print(text, args.out)

    if args.emit_curves:
        if doc.is_2d:
            _emit_curves_2d(args.emit_curves, inst, report.recovered, not args.no_figures)
        else:
            _emit_curves_1d(args.emit_curves, doc, report.recovered, not args.no_figures)
    return 0


# -- verify ---------------------------------------------------------------------


def _load_candidate(path: str):
    kind = sniff_kind(path)
    if kind == "report":
        return read_report_recovered(path)
    if kind == "truth":
        doc = read_truth(path)
        if doc.mode == "1d":
            return "1d", doc.coeffs, {"grid_len": doc.grid_len, "support": doc.support}
        return "2d", doc.coeffs, {"grid_len": doc.grid_len, "order": doc.order}
    raise ValueError(f"{path}: not a phaserec truth or report file")


def cmd_verify(args: argparse.Namespace) -> int:
    cmode, cand, cinfo = _load_candidate(args.candidate)
    tdoc = read_truth(args.truth)
    if cmode != tdoc.mode:
        return _fail(f"candidate is {cmode}, truth is {tdoc.mode}")

    if cmode == "1d":
        if cinfo["support"] != tdoc.support or cinfo["grid_len"] != tdoc.grid_len:
            # compare over the candidate's (possibly trimmed) window
            s0, s1 = cinfo["support"]
            t0 = tdoc.support[0]
            tw = tdoc.coeffs[s0 - t0:s1 - t0 + 1]
        else:
            tw = tdoc.coeffs
        spectral, _, flags = gauge_align(tw, cand)
        truth_spec = tdoc.spectrum()
        cand_spec = CenteredSpectrum.from_window(cand, cinfo["grid_len"], cinfo["support"])
        mag_t = np.abs(forward_dft(truth_spec).values)
        mag_c = np.abs(forward_dft(cand_spec).values)
        from .spectral import convolve_direct

        residual = float(
            np.sum(np.abs(convolve_direct(cand_spec).coeffs - convolve_direct(truth_spec).coeffs) ** 2)
        ) if cand_spec.grid_len == truth_spec.grid_len else float("nan")
    else:
        spectral, _, flags = gauge_align(tdoc.coeffs, cand)
        m = tdoc.grid_len
        mag_t = np.abs(forward_dft_2d(tdoc.coeffs, m))
        mag_c = np.abs(forward_dft_2d(cand, m))
        from .engine2d import convolve_direct_2d

        residual = float(
            np.sum(np.abs(convolve_direct_2d(cand).coeffs - convolve_direct_2d(tdoc.coeffs).coeffs) ** 2)
        )
    rms_ref = float(np.sqrt(np.mean(mag_t**2)))
    field_err = float(np.sqrt(np.mean((np.abs(mag_c) - mag_t) ** 2))) / (rms_ref or 1.0)

    if args.format == "json":
        import json

        text = json.dumps(
            {
                "spectral_error": spectral,
                "field_magnitude_error": field_err,
                "residual": residual,
                "flags": list(flags),
            },
            indent=2,
            sort_keys=True,
        ) + "\n"
    else:
        text = (
            f"spectral_error = {fmt(spectral)}\n"
            f"field_magnitude_error = {fmt(field_err)}\n"
            f"residual = {fmt(residual)}\n"
            f"flags = {','.join(flags)}\n"
        )
    _write_or_print(text, args.out)
    return 0


# -- bench ----------------------------------------------------------------------


def run_bench(
    sizes: list[int],
    trials: int,
    seed: int = 0,
    kind: str = "random_smooth",
    selector: str = "incremental",
) -> list[dict]:
    """Timed seeded solves per size; returns one row dict per size."""
    rows = []
    for size in sizes:
        times = []
        errors = []
        successes = 0
        for trial in range(trials):
            truth, inst = generate(
                GeneratorSpec(kind=kind, size=size, seed=seed + trial)
            )
            t0 = time.perf_counter()
            report = solve_1d_refined(inst, passes=1, selector=selector)
            times.append(time.perf_counter() - t0)
            err, _, _ = gauge_align(truth.window(), report.recovered.window())
            errors.append(err)
            if err * err <= 1e-10:
                successes += 1
        rows.append(
            {
                "size": size,
                "mean_runtime_s": sum(times) / len(times),
                "mean_spectral_error": sum(errors) / len(errors),
                "success_rate": successes / trials,
            }
        )
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(v) for v in args.sizes.split(",") if v.strip()]
    except ValueError:
        return _fail(f"cannot parse --sizes {args.sizes!r}")
    if not sizes:
        return _fail("--sizes must list at least one size")
    if any(s < 1 for s in sizes) or args.trials < 1:
        return _fail("sizes and trials must be positive")
    kind = _KIND_FLAGS.get(args.kind)
    if kind is None:
        return _fail(f"unknown kind {args.kind!r}")
    rows = run_bench(sizes, args.trials, seed=args.seed, kind=kind, selector=args.selector)
    if args.format == "json":
        import json

        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["size mean_runtime_s mean_spectral_error success_rate"]
        for r in rows:
            lines.append(
                f"{r['size']} {fmt(r['mean_runtime_s'])} "
                f"{fmt(r['mean_spectral_error'])} {fmt(r['success_rate'])}"
            )
        text = "\n".join(lines) + "\n"
    _write_or_print(text, args.out)
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaserec",
        description="Recursive phase retrieval from magnitude data.",
    )
    parser.add_argument("--version", action="version", version=f"phaserec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="forward-generate an instance (and truth)")
    gen.add_argument("--mode", choices=["1d", "2d"], default="1d")
    gen.add_argument("--kind", default="random-smooth",
                     help="1d generator kind: " + ", ".join(sorted(_KIND_FLAGS)))
    gen.add_argument("--size", type=int, default=8, help="support length S (1d)")
    gen.add_argument("--order", type=int, default=1, help="coefficient order N (2d)")
    gen.add_argument("--grid", type=int, default=None, help="grid length M")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float, default=0.0,
                     help="uniform [0,1] noise amplitude added to the field")
    gen.add_argument("--min-modulus", type=float, default=None)
    gen.add_argument("--coeffs", default=None, help="coefficient file for custom-coeffs")
    gen.add_argument("--out", default=None, help="instance file to write")
    gen.add_argument("--truth-out", default=None, help="truth file to write")
    gen.set_defaults(func=cmd_generate)

    sol = sub.add_parser("solve", help="solve an instance file")
    sol.add_argument("instance")
    sol.add_argument("--gauge", type=float, default=None,
                     help="gauge phase in radians (overrides the instance)")
    sol.add_argument("--priors", default=None,
                     help="phase hints: bare file, truth file, or report file")
    sol.add_argument("--selector", choices=["incremental", "full"], default="incremental")
    sol.add_argument("--refine-passes", type=int, default=1,
                     help="re-run feeding recovered phases back as priors")
    sol.add_argument("--truth", default=None, help="truth file for spectral error")
    sol.add_argument("--out", default=None, help="report file (default stdout)")
    sol.add_argument("--format", choices=["text", "json"], default="text")
    sol.add_argument("--emit-curves", default=None, metavar="PREFIX",
                     help="write column data files and PNG figures with this prefix")
    sol.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering when emitting curves")
    sol.set_defaults(func=cmd_solve)

    ver = sub.add_parser("verify", help="compare a recovery (or truth) against a truth")
    ver.add_argument("candidate", help="report file or truth file")
    ver.add_argument("truth", help="truth file")
    ver.add_argument("--format", choices=["text", "json"], default="text")
    ver.add_argument("--out", default=None)
    ver.set_defaults(func=cmd_verify)

    ben = sub.add_parser("bench", help="runtime and success-rate table over sizes")
    ben.add_argument("--sizes", required=True, help="comma-separated support lengths")
    ben.add_argument("--trials", type=int, default=3)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--kind", default="random-smooth")
    ben.add_argument("--selector", choices=["incremental", "full"], default="incremental")
    ben.add_argument("--format", choices=["text", "json"], default="text")
    ben.add_argument("--out", default=None)
    ben.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
