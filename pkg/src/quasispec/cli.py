"""Command-line front end.

    quasispec generate  --system fibonacci --length 13
    quasispec lyapunov  --system fibonacci -N 10000 --out gamma.csv
    quasispec spectrum  --system fibonacci --out spec/
    quasispec measure   --system fibonacci --levels 2584,10946,46368 --out meas/
    quasispec diagnose  --system fibonacci --out diag/
    quasispec compare   a.json b.json --out cmp.json

Exit codes: 0 success, 1 usage error, 2 resource cap, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cocycle, spectrum, subshifts
from .output import to_json, versions, write_json
from .subshifts import CapExceeded, SubshiftSystem

log = logging.getLogger("quasispec")

EXIT_USAGE, EXIT_CAP, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("system")
    src.add_argument("--system", help=f"built-in system ({', '.join(subshifts.catalog())})")
    src.add_argument("--config", help="JSON system config (substitution, Sturmian or periodic)")
    src.add_argument("--cap", type=int, default=subshifts.DEFAULT_WINDOW_CAP, help="window cap in letters")
    p.add_argument("--out", help="output file (generate, lyapunov, compare) or directory")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="reserved; all computations are deterministic")


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--emin", type=float)
    p.add_argument("--emax", type=float)
    p.add_argument("--points", type=int, default=4001)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quasispec", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write the canonical window of a system")
    _common(p)
    p.add_argument("--length", type=int, required=True)

    p = sub.add_parser("lyapunov", help="Lyapunov profile gamma_N(E) and uniformity spread")
    _common(p)
    _grid_flags(p)
    p.add_argument("-N", type=int, default=10_000)
    p.add_argument("--budget", type=int, default=8, help="spread window = budget * spread length")
    p.add_argument("--spread-n", type=int, default=None,
                   help="factor length for the spread column (default: largest power of 2 <= N/budget; 0 disables)")

    p = sub.add_parser("spectrum", help="finite-section, trace and Lyapunov-zero spectra and their comparison")
    _common(p)
    _grid_flags(p)
    p.add_argument("-N", type=int, default=None, help="word length for gamma_N (default: approximant length, at least 10000)")
    p.add_argument("--epsilon", type=float, default=None, help="zero-set threshold (default: epsilon rule)")
    p.add_argument("--length", type=int, default=1024, help="finite-section box size L")
    p.add_argument("--depth", type=int, default=None, help="periodic approximant depth k")
    p.add_argument("--interior-filter", action="store_true")

    p = sub.add_parser("measure", help="Lebesgue measure and gap census of the zero set across refinements")
    _common(p)
    _grid_flags(p)
    p.add_argument("-N", type=int, default=46368, help="finest word length")
    p.add_argument("--levels", default=None, help="comma-separated word lengths (default: N/16, N/4, N)")
    p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("diagnose", help="(LR)/(PW) reports and uniformity table")
    _common(p)
    _grid_flags(p)
    p.add_argument("--depth", type=int, default=32, help="n_max for the repetitivity table")
    p.add_argument("--length", type=int, default=1_000_000, help="window length for the (PW) table")
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--energies", type=int, default=12, help="number of energies in the uniformity table")
    p.add_argument("--spread-lengths", default="64,256,1024,4096")

    p = sub.add_parser("compare", help="compare two spectrum JSON files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    return parser


# ---------------------------------------------------------------- helpers


def resolve_system(args) -> SubshiftSystem:
    if bool(args.system) == bool(args.config):
        raise UsageError("give exactly one of --system or --config")
    if args.system:
        try:
            base = subshifts.builtin(args.system)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        return SubshiftSystem(base.source, base.potential, base.label, base.aperiodic, args.cap)
    return subshifts.load_system(args.config, cap=args.cap)


def resolve_grid(args, system: SubshiftSystem) -> spectrum.EnergyGrid:
    default = spectrum.EnergyGrid.around(system.potential, args.points)
    e_min = default.e_min if args.emin is None else args.emin
    e_max = default.e_max if args.emax is None else args.emax
    try:
        return spectrum.EnergyGrid(e_min, e_max, args.points)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out directory is required for this command")
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8", newline="\n")


def _estimate_files(d: Path, name: str, est: spectrum.SpectrumEstimate, fmt: str) -> None:
    (d / f"{name}.{fmt}").write_text(est.to_csv() if fmt == "csv" else est.to_json(), encoding="utf-8", newline="\n")


def _default_depth(system: SubshiftSystem, target: int = 20_000) -> int:
    """Deepest approximant with period not exceeding ``target``."""
    k = 1
    while True:
        try:
            if len(system.approximant(k + 1)) > target:
                return k
        except (ValueError, CapExceeded):
            return k
        if system.kind == "periodic":
            return 1
        k += 1


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> dict:
    system = resolve_system(args)
    if args.length < 1:
        raise UsageError("--length must be positive")
    w = system.window(args.length)
    meta = {"kind": "window", "system": system.describe(), "length": args.length, "versions": versions()}
    _emit(Path(args.out) if args.out else None, "# " + json.dumps(meta, sort_keys=True) + "\n" + str(w) + "\n")
    return meta


def cmd_lyapunov(args) -> dict:
    system = resolve_system(args)
    grid = resolve_grid(args, system)
    if args.N < 1:
        raise UsageError("-N must be positive")
    spread_n = args.spread_n
    if spread_n is None:
        spread_n = 1 << int(math.floor(math.log2(max(1, args.N // args.budget))))
    params = {"grid": grid.to_dict(), "budget": args.budget, "spread_n": spread_n}
    prof = cocycle.lyapunov_profile(system, grid.energies, args.N, spread_n or None, args.budget, args.threads,
                                    meta={"params": params, "system_info": system.describe()})
    _emit(Path(args.out) if args.out else None, prof.to_csv() if args.format == "csv" else prof.to_json())
    return {"rows": grid.points}


def cmd_spectrum(args) -> dict:
    system = resolve_system(args)
    grid = resolve_grid(args, system)
    d = _out_dir(args)
    depth = args.depth if args.depth is not None else _default_depth(system)
    trace = spectrum.approximant_spectrum(system, depth, grid, args.threads)
    N = args.N or max(len(system.approximant(depth)), 10_000)
    eps = args.epsilon if args.epsilon is not None else spectrum.epsilon_rule(N)
    levels = [max(1, N // 16), max(1, N // 4), N]
    zero_sets = spectrum.zero_set_refinements(system, levels, grid, args.epsilon, args.threads)
    zero = zero_sets[-1]
    eigs = spectrum.finite_section_spectrum(system.window(args.length), system.potential, args.interior_filter)
    section = spectrum.section_estimate(eigs, grid, system.label,
                                        {"L": args.length, "interior_filter": args.interior_filter})
    for name, est in (("finite_section", section), ("trace", trace), ("lyapunov_zero", zero)):
        _estimate_files(d, name, est, args.format)
    report = {
        "system": system.describe(),
        "versions": versions(),
        "parameters": {"grid": grid.to_dict(), "N": N, "epsilon": eps, "L": args.length, "depth": depth,
                       "interior_filter": args.interior_filter},
        "comparisons": {
            "trace_vs_lyapunov_zero": spectrum.compare_spectra(trace, zero),
            "finite_section_vs_trace": spectrum.compare_spectra(section, trace),
            "finite_section_vs_lyapunov_zero": spectrum.compare_spectra(section, zero),
        },
        "eigenvalues_to_zero_set": spectrum.points_to_set_distance(eigs, zero),
        "eigenvalues_to_trace": spectrum.points_to_set_distance(eigs, trace),
        "cantor": spectrum.cantor_diagnostic(zero, zero_sets[:-1]),
        "cantor_trace": spectrum.cantor_diagnostic(trace),
    }
    write_json(d / "report.json", report)
    return report


def cmd_measure(args) -> dict:
    system = resolve_system(args)
    grid = resolve_grid(args, system)
    d = _out_dir(args)
    if args.levels:
        try:
            levels = [int(s) for s in args.levels.split(",")]
        except ValueError:
            raise UsageError("--levels must be comma-separated integers") from None
    else:
        levels = [max(1, args.N // 16), max(1, args.N // 4), args.N]
    ests = spectrum.zero_set_refinements(system, levels, grid, args.epsilon, args.threads)
    for N, est in zip(levels, ests):
        _estimate_files(d, f"zero_set_N{N}", est, args.format)
    report = {"system": system.describe(), "versions": versions(), "grid": grid.to_dict(), "levels": levels,
              "cantor": spectrum.cantor_diagnostic(ests[-1], ests[:-1])}
    write_json(d / "measure.json", report)
    return report


def cmd_diagnose(args) -> dict:
    system = resolve_system(args)
    grid = resolve_grid(args, system)
    d = _out_dir(args)
    rep = subshifts.repetitivity_report(system, args.depth)
    window = min(args.length, system.cap)
    test_words = set()
    for n in (1, 2, 3):
        test_words |= subshifts.legal_words(system, n)
    lengths = [n for n in (16, 64, 256, 1024, 4096, 16384) if n <= window]
    pw = subshifts.pw_report(system, test_words, lengths, window)
    spread_lengths = [int(s) for s in args.spread_lengths.split(",")]
    energies = np.linspace(grid.e_min, grid.e_max, args.energies + 2)[1:-1]
    table = []
    for E in energies:
        row = {"E": float(E)}
        for n in spread_lengths:
            r = cocycle.spread_report(system, float(E), n, args.budget)
            row[str(n)] = r.spread
            row["degenerate"] = row.get("degenerate", False) or r.degenerate
        table.append(row)
    report = {"system": system.describe(), "versions": versions(), "repetitivity": rep.to_dict(),
              "positive_weights": pw.to_dict(), "kappa_inverse": 1.0 / rep.kappa_estimate,
              "uniformity": {"budget": args.budget, "lengths": spread_lengths, "rows": table}}
    write_json(d / "diagnose.json", report)
    return report


def cmd_compare(args) -> dict:
    ests = []
    for name in (args.a, args.b):
        try:
            ests.append(spectrum.SpectrumEstimate.from_dict(json.loads(Path(name).read_text())))
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"{name}: not a spectrum JSON file ({exc})") from None
    try:
        rep = spectrum.compare_spectra(*ests)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(Path(args.out) if args.out else None, to_json(rep) + "\n")
    return rep


COMMANDS = {"generate": cmd_generate, "lyapunov": cmd_lyapunov, "spectrum": cmd_spectrum,
            "measure": cmd_measure, "diagnose": cmd_diagnose, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"quasispec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"quasispec: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"quasispec: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - t0
    log.info("%s finished in %.2f s", args.command, wall)
    out = getattr(args, "out", None)
    if out:
        p = Path(out)
        sidecar = (p / "timing.json") if p.is_dir() else p.with_name(p.name + ".timing.json")
        write_json(sidecar, {"command": args.command, "wall_time_s": wall})
    return 0


if __name__ == "__main__":
    sys.exit(main())
