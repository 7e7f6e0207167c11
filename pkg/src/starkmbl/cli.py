"""Command-line entry point: ``starkmbl {spectrum,sweep,collapse,phase-diagram}``."""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from math import comb
from pathlib import Path

import numpy as np

from . import __version__
from .collapse import (
    DEFAULT_W_GRID,
    CollapseInput,
    edge_asymmetry,
    fit_collapse,
    mobility_edge,
    write_report,
    write_rescaled_csv,
)
from .entanglement import half_chain_entropy
from .ensemble import SweepConfig, output_paths, read_results, run_sweep
from .errors import ParameterError, ResourceError, StarkMBLError
from .fock import L_MAX, enumerate_basis
from .model import LatticeParams, build_hamiltonian, sample_disorder
from .spectra import DENSE_DIM_CAP, SPARSE_DIM_CAP, gap_ratios, solve_window

log = logging.getLogger("starkmbl")

OUTPUT_DIR_ENV = "STARKMBL_OUTPUT_DIR"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3


def _output_dir(default):
    return Path(os.environ.get(OUTPUT_DIR_ENV) or default)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {err}")


def _config_hash_of(csv_path) -> str:
    with open(csv_path) as fh:
        first = fh.readline()
    if first.startswith("#") and "config_hash=" in first:
        return first.split("config_hash=", 1)[1].strip()
    return ""


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_spectrum(args) -> int:
    N = args.N if args.N is not None else args.L // 2
    if args.L > L_MAX:
        raise ResourceError(f"L={args.L} exceeds the supported maximum L={L_MAX}")
    dim = comb(args.L, N) if 0 <= N <= args.L else 0
    cap = DENSE_DIM_CAP if args.solver == "dense" else SPARSE_DIM_CAP
    if dim > cap:
        raise ResourceError(f"Hilbert-space dimension {dim} exceeds the solver cap {cap}")
    params = LatticeParams(L=args.L, N=N, J=args.J, U=args.U, F=args.F, W=args.W)
    basis = enumerate_basis(params.L, params.N)
    H = build_hamiltonian(params, sample_disorder(params.W, params.L, args.seed), basis)
    if args.dump_matrix:
        H.dump_coo(args.dump_matrix)
    k = min(args.k, basis.dim)
    window = solve_window(H, args.eps, k, want_vectors=True, method=args.solver)
    S = np.atleast_1d(half_chain_entropy(window.eigenvectors, basis)) if args.L % 2 == 0 else None

    r_col = [""] * window.k
    if window.k >= 3:
        ratios = gap_ratios(window.eigenvalues)
        for n, r in zip(ratios.positions, ratios.r_values):
            r_col[n] = repr(float(r))

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        fh.write(
            f"# L={params.L} N={params.N} J={params.J!r} U={params.U!r} F={params.F!r} "
            f"W={params.W!r} seed={args.seed} eps={args.eps!r} k={window.k} "
            f"E_min={window.E_min!r} E_max={window.E_max!r}\n"
        )
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "E", "energy_density", "S", "r"))
        dens = window.energy_densities()
        for n in range(window.k):
            w.writerow((
                n,
                repr(float(window.eigenvalues[n])),
                repr(float(dens[n])),
                "" if S is None else repr(float(S[n])),
                r_col[n],
            ))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _sweep_figures(records, csv_path, tag):
    from .plotting import plot_entropy, plot_gap_ratio

    out = []
    stem = csv_path.with_suffix("")
    for eps in sorted({r.eps for r in records}):
        out.append(plot_gap_ratio(records, eps, f"{stem}_r_eps{eps:.2f}.png", tag))
        out.append(plot_entropy(records, eps, f"{stem}_S_eps{eps:.2f}.png", tag))
    return [str(p) for p in out]


def cmd_sweep(args) -> int:
    if args.print_default_config:
        json.dump(SweepConfig.default().to_dict(), sys.stdout, indent=1)
        sys.stdout.write("\n")
        return EXIT_OK
    if args.config is None:
        raise ParameterError("sweep needs --config (or --print-default-config)")
    config = SweepConfig.from_json(args.config)
    if args.output:
        config.output = args.output
    if os.environ.get(OUTPUT_DIR_ENV):
        config.output = str(_output_dir(".") / Path(config.output).name)
    started = _now()

    def progress(done, total, rec):
        log.info("[%d/%d] L=%d eps=%g F=%g <r>=%.4f", done, total, rec.L, rec.eps, rec.F, rec.mean_r)

    records = run_sweep(config, workers=args.threads, resume=args.resume, progress=progress)
    paths = output_paths(config.output)
    chash = config.config_hash()
    figures = [] if args.no_figures else _sweep_figures(records, paths["csv"], f"config_hash={chash}")
    with open(args.config, "rb") as fh:
        config_digest = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "config_hash": chash,
        "config_file_sha256": config_digest,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "inputs": {"config": str(args.config)},
        "outputs": {
            "results": str(paths["csv"]),
            "metadata": str(paths["meta"]),
            "checkpoints": str(paths["checkpoints"]),
            "figures": figures,
        },
        "master_seed": config.master_seed,
        "threads": args.threads,
    }
    stem = paths["csv"].with_suffix("")
    with open(stem.with_name(stem.name + ".manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(paths["csv"])
    return EXIT_OK


def _collapse_outputs(out_dir, eps):
    base = f"collapse_eps{eps:.2f}"
    return out_dir / f"{base}.json", out_dir / f"{base}_rescaled.csv", out_dir / f"{base}.png"


def cmd_collapse(args) -> int:
    records = read_results(args.results)
    data = CollapseInput.from_records(records, args.eps)
    result = fit_collapse(data, args.w_grid)
    out_dir = _output_dir(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report, rescaled, figure = _collapse_outputs(out_dir, args.eps)
    result.metadata["source"] = str(args.results)
    result.metadata["source_config_hash"] = _config_hash_of(args.results)
    write_report(result, report)
    write_rescaled_csv(data, result, rescaled)
    if not args.no_figures:
        from .plotting import plot_collapse

        plot_collapse(data, result, figure, f"source={args.results}")
    if "unidentifiable" in result.flags:
        log.warning("collapse cost is flat: F_c and nu are not identifiable from these curves")
    print(
        f"eps={args.eps:g} F_c={result.F_c:.4f}+-{result.F_c_err:.4f} "
        f"nu={result.nu:.3f}+-{result.nu_err:.3f} D_min={result.D_min:.3e} flags={result.flags}"
    )
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    records = read_results(args.results)
    if not records:
        raise ParameterError(f"{args.results} contains no records")
    eps_grid = args.eps or None
    edge = mobility_edge(records, eps_grid, args.w_grid)
    if not edge:
        raise ParameterError("no energy density has at least two system sizes")
    out_dir = _output_dir(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    asym = edge_asymmetry(edge)
    with open(out_dir / "phase_diagram.json", "w") as fh:
        json.dump(
            {
                "source": str(args.results),
                "source_config_hash": _config_hash_of(args.results),
                "asymmetry": asym,
                "edge": [res.to_dict() for _, res in edge],
            },
            fh,
            indent=1,
        )
    with open(out_dir / "mobility_edge.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eps", "F_c", "F_c_err", "nu", "nu_err", "D_min", "flags"))
        for eps, res in edge:
            w.writerow((repr(eps), repr(res.F_c), repr(res.F_c_err), repr(res.nu),
                        repr(res.nu_err), repr(res.D_min), ";".join(res.flags)))
    if not args.no_figures:
        from .plotting import plot_phase_diagram

        L = args.L or max(r.L for r in records)
        plot_phase_diagram(records, L, edge, out_dir / "phase_diagram.png", f"source={args.results}")
    print(
        f"max F_c={asym['max_F_c']:.4f} at eps={asym['eps_at_max']:g} "
        f"(shifted towards {asym['towards']})"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="starkmbl",
        description="Field-driven localization transition of disordered fermion chains by exact diagonalization.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    p.subparsers = sub.choices

    s = sub.add_parser("spectrum", help="window eigenvalues, gap ratios and entropies of one realization")
    s.add_argument("--L", type=int, required=True, help="number of sites")
    s.add_argument("--N", type=int, default=None, help="particle number (default L/2)")
    s.add_argument("--F", type=float, default=0.0, help="field strength")
    s.add_argument("--W", type=float, default=0.5, help="disorder strength")
    s.add_argument("--U", type=float, default=1.0, help="nearest-neighbour interaction")
    s.add_argument("--J", type=float, default=1.0, help="tunnelling (hopping amplitude J/2)")
    s.add_argument("--seed", type=int, default=0, help="disorder seed")
    s.add_argument("--eps", type=float, default=0.5, help="target energy density")
    s.add_argument("--k", type=int, default=50, help="window size (clipped to the dimension)")
    s.add_argument("--solver", choices=("auto", "dense", "shift-invert"), default="auto")
    s.add_argument("--out", help="write the table here instead of stdout")
    s.add_argument("--dump-matrix", help="write the Hamiltonian as 'row col value' lines")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("sweep", help="disorder-averaged observables over an (L, eps, F) grid")
    s.add_argument("--config", help="JSON sweep configuration")
    s.add_argument("--output", help="override the results CSV path from the config")
    s.add_argument("--resume", action="store_true", help="reuse matching checkpoints")
    s.add_argument("--threads", type=int, default=1, help="worker processes")
    s.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    s.add_argument("--print-default-config", action="store_true",
                   help="print the desk-scale default configuration and exit")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("collapse", help="finite-size-scaling collapse of <r>(F) at one eps")
    s.add_argument("results", help="results CSV written by 'sweep'")
    s.add_argument("--eps", type=float, required=True, help="energy density to fit")
    s.add_argument("--w-grid", type=_floats, default=list(DEFAULT_W_GRID),
                   help="comma-separated window widths in (0, 1]")
    s.add_argument("--out-dir", default="collapse", help="directory for report, CSV and figure")
    s.add_argument("--no-figures", action="store_true", help="skip the PNG figure")
    s.set_defaults(func=cmd_collapse)

    s = sub.add_parser("phase-diagram", help="collapse at every eps and assemble the mobility edge")
    s.add_argument("results", help="results CSV written by 'sweep'")
    s.add_argument("--eps", type=_floats, default=None, help="subset of energy densities")
    s.add_argument("--w-grid", type=_floats, default=list(DEFAULT_W_GRID),
                   help="comma-separated window widths in (0, 1]")
    s.add_argument("--L", type=int, default=None, help="size shown in the colour map (default largest)")
    s.add_argument("--out-dir", default="phase_diagram", help="output directory")
    s.add_argument("--no-figures", action="store_true", help="skip the PNG figure")
    s.set_defaults(func=cmd_phase_diagram)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except ResourceError as err:
        print(f"starkmbl {args.command}: resource error: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParameterError, StarkMBLError) as err:
        print(f"starkmbl {args.command}: error: {err}", file=sys.stderr)
        print(parser.subparsers[args.command].format_usage(), end="", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"starkmbl {args.command}: I/O error: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
