"""Command-line entry point.

Exit codes: 0 success, 1 verification mismatch, 2 partial (some points failed),
3 configuration error.
"""

from __future__ import annotations

import argparse
import filecmp
import json
import logging
import sys
import tempfile
from pathlib import Path

from . import __version__, presets
from .config import ConfigError, config_to_dict, load_config
from .io import RunManifest, embedded_digest
from .runner import load_manifest, preset_manifest, run_preset, sweep, write_sweep

log = logging.getLogger("ramanmirror")

EXIT_OK, EXIT_MISMATCH, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list[tuple[float, float, int]]:
    """'start:stop:num[,start:stop:num]' -> list of axis triples."""
    axes = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise ConfigError(f"bad grid {part!r}; expected start:stop:num")
        try:
            start, stop, num = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError:
            raise ConfigError(f"bad grid {part!r}") from None
        if num < 1:
            raise ConfigError(f"grid {part!r} needs num >= 1")
        axes.append((start, stop, num))
    return axes


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON system configuration (default: Fig. 2 set)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--tol", type=float, default=None,
                   help="dt-halving tolerance for dynamics; residual bound for steady states")
    p.add_argument("--model", choices=("rwa", "brwa"), default="rwa")
    p.add_argument("--mu", type=float, default=0.1, help="drive ratio eps2/eps1 (brwa)")
    p.add_argument("--grid", help="start:stop:num (power), or delta0 and power axes "
                                  "separated by a comma for phase-diagram; SI units")
    p.add_argument("--log2", action="store_true", help="report E_N in bits")
    p.add_argument("--verify", action="store_true", help="check embedded hashes and rerun")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ramanmirror", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub_gain = sub.add_parser("gain", help="gain coefficients xi1..xi8 and derived rates")
    _common(sub_gain)
    sub_bi = sub.add_parser("bistability", help="steady branches along a power sweep")
    _common(sub_bi)
    sub_bi.add_argument("--delta0", type=float, help="cavity-laser detuning (rad/s)")
    sub_bi.add_argument("--mode", type=int, choices=(1, 2), default=1)
    sub_pd = sub.add_parser("phase-diagram", help="root counts on a (delta0, P) grid")
    _common(sub_pd)
    sub_pd.add_argument("--mode", type=int, choices=(1, 2), default=1)
    for name, text in (("dynamics", "mirror covariance V(t)"),
                       ("entanglement", "logarithmic negativity E_N(t)")):
        sp = sub.add_parser(name, help=text)
        _common(sp)
        sp.add_argument("--t-end", type=float, help="horizon in s (default 10 mechanical periods)")
        sp.add_argument("--samples", type=int, default=400)
        sp.add_argument("--dt", type=float)
        if name == "entanglement":
            sp.add_argument("--input", type=Path, help="dynamics CSV to evaluate instead of running")
    sub_rep = sub.add_parser("reproduce", help="figure presets")
    _common(sub_rep)
    sub_rep.add_argument("preset", choices=sorted(presets.PRESETS))
    sub_sw = sub.add_parser("sweep", help="run a manifest")
    _common(sub_sw)
    sub_sw.add_argument("manifest", type=Path)
    return parser


def _options(args) -> dict:
    opts: dict = {"model": args.model, "mu": args.mu, "log2": args.log2}
    if args.tol is not None:
        opts["tol"] = opts["residual_tol"] = args.tol
    for key in ("delta0", "mode", "t_end", "samples", "dt"):
        if getattr(args, key, None) is not None:
            opts[key] = getattr(args, key)
    if getattr(args, "input", None) is not None:
        opts["input"] = str(args.input)
    if args.grid:
        grid = parse_grid(args.grid)
        if args.command == "phase-diagram":
            if len(grid) != 2:
                raise ConfigError("phase-diagram --grid needs delta0 and power axes")
            opts["delta0"], opts["power"] = grid
        else:
            if len(grid) != 1:
                raise ConfigError(f"{args.command} --grid takes a single power axis")
            opts["power"] = grid[0]
    if args.command == "phase-diagram":
        opts["threads"] = args.jobs or 1
    return opts


def _config_doc(args) -> dict:
    cfg = load_config(args.config) if args.config else presets.paper_config()
    return config_to_dict(cfg)


def _report(files, errors) -> int:
    for f in files:
        print(f)
    for e in errors:
        log.warning("%s", e)
    return EXIT_PARTIAL if errors else EXIT_OK


def _verify(files: list[Path], expected: str, rerun) -> int:
    bad = [f for f in files if not f.exists() or embedded_digest(f) != expected]
    with tempfile.TemporaryDirectory() as tmp:
        rerun(Path(tmp))
        for old in files:
            new = Path(tmp) / old.name
            if not (old.exists() and new.exists() and filecmp.cmp(old, new, shallow=False)):
                bad.append(old)
    for f in sorted(set(bad)):
        print(f"MISMATCH {f}")
    if not bad:
        print(f"verified {len(files)} files against manifest {expected}")
    return EXIT_MISMATCH if bad else EXIT_OK


def _single(args) -> int:
    manifest = RunManifest(args.command, _config_doc(args), options=_options(args))
    stem = args.command.replace("-", "_")

    def run(out: Path):
        result = sweep(manifest, jobs=1)
        return write_sweep(result, out, stem), result

    if args.verify:
        files = [args.out / f"{stem}.csv", args.out / f"{stem}.json"]
        return _verify(files, manifest.digest, run)
    files, result = run(args.out)
    if args.command == "gain" and result.summaries and not result.errors:
        coeffs = result.summaries[0]["coefficients"]
        print(json.dumps({k: [v.real, v.imag] for k, v in coeffs.items()}, indent=2))
    return _report(files, [e["error"] for e in result.errors])


def _reproduce(args) -> int:
    tol = 1e-8 if args.tol is None else args.tol
    if args.verify:
        stem = args.preset
        files = sorted(args.out.glob(f"{stem}*.csv")) + [args.out / f"{stem}.json"]
        digest = preset_manifest(args.preset, tol, args.log2).digest
        return _verify(files, digest, lambda out: run_preset(args.preset, out, args.jobs,
                                                             args.log2, tol))
    files, errors = run_preset(args.preset, args.out, args.jobs, args.log2, tol)
    return _report(files, errors)


def _sweep(args) -> int:
    manifest = load_manifest(args.manifest)
    stem = args.manifest.stem

    def run(out: Path):
        return write_sweep(sweep(manifest, jobs=args.jobs), out, stem)

    if args.verify:
        files = [args.out / f"{stem}.csv", args.out / f"{stem}.json"]
        doc = json.loads(files[1].read_text()) if files[1].exists() else {}
        recorded = doc.get("manifest")
        if recorded is not None and RunManifest.from_dict(recorded).digest != manifest.digest:
            print("MISMATCH manifest differs from the one embedded in the outputs")
            return EXIT_MISMATCH
        return _verify(files, manifest.digest, run)
    result = sweep(manifest, jobs=args.jobs)
    files = write_sweep(result, args.out, stem)
    return _report(files, [f"point {e['index']}: {e['error']}" for e in result.errors])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "reproduce":
            return _reproduce(args)
        if args.command == "sweep":
            return _sweep(args)
        return _single(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
