"""Command-line runner: `collapselab run <config>` and `collapselab report <dir>`.

Outputs are byte-stable: fixed float formatting (17 significant digits),
line-feed terminators, no timestamps, and nothing that depends on the
worker count.  Exit codes: 0 all checks passed, 1 a numerical check
failed, 2 unreadable input, 3 a module precondition was violated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .errors import PreconditionError
from .scenarios import RUNNERS

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_PRECONDITION = 3


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(value)
    return f"{float(value):.17g}"


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = f"{value:.17g}"
        if "." not in text and "e" not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__} in the manifest")


def _write_manifest(path: Path, cfg: ScenarioConfig) -> None:
    lines = [f'version = "{__version__}"', ""]
    for section, table in cfg.echo.items():
        plain = {k: v for k, v in table.items() if not _is_table_array(v)}
        arrays = {k: v for k, v in table.items() if _is_table_array(v)}
        lines.append(f"[{section}]")
        for key, value in plain.items():
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
        for key, entries in arrays.items():
            for entry in entries:
                lines.append(f"[[{section}.{key}]]")
                for k, v in entry.items():
                    lines.append(f"{k} = {_toml_scalar(v)}")
                lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8", newline="\n")


def _is_table_array(value) -> bool:
    return (
        isinstance(value, list)
        and bool(value)
        and all(isinstance(v, dict) for v in value)
    )


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run_scenario(config_path, seed=None, workers=None, out_dir=None) -> int:
    """Load, validate, run, and persist one scenario; returns the exit code."""
    try:
        cfg = load_config(config_path, seed=seed, workers=workers, out_dir=out_dir)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except PreconditionError as err:
        print(f"precondition violated: {err}", file=sys.stderr)
        return EXIT_PRECONDITION

    out = cfg.out_dir if cfg.out_dir is not None else Path("runs") / cfg.kind
    try:
        result = RUNNERS[cfg.kind](cfg)
    except PreconditionError as err:
        print(f"precondition violated: {err}", file=sys.stderr)
        return EXIT_PRECONDITION

    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out / "manifest.toml", cfg)
    for name, (header, rows) in sorted(result.tables.items()):
        _write_csv(out / f"{name}.csv", header, rows)
    _write_csv(
        out / "checks.csv",
        ["check", "status", "value", "threshold"],
        [
            [c.name, "pass" if c.passed else "FAIL", c.value, c.threshold]
            for c in result.checks
        ],
    )
    for c in result.checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{status}  {c.name}  value={_fmt(c.value)}  threshold={_fmt(c.threshold)}")
    n_failed = sum(not c.passed for c in result.checks)
    print(
        f"{cfg.kind}: {len(result.checks) - n_failed}/{len(result.checks)} checks passed"
        f" -> {out}"
    )
    return EXIT_OK if result.all_passed else EXIT_CHECK_FAILED


def _read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    return header, rows


def emit_report(run_dir) -> int:
    """Render a run directory into report.txt plus two-column .dat files."""
    run_dir = Path(run_dir)
    manifest = run_dir / "manifest.toml"
    if not manifest.is_file():
        print(f"no manifest found in {run_dir}", file=sys.stderr)
        return EXIT_BAD_INPUT

    sections = []
    for csv_path in sorted(run_dir.glob("*.csv")):
        header, rows = _read_csv(csv_path)
        widths = [
            max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
            for i in range(len(header))
        ]
        table_lines = [
            "  ".join(h.ljust(w) for h, w in zip(header, widths)),
            "  ".join("-" * w for w in widths),
        ]
        for r in rows:
            table_lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        sections.append(f"== {csv_path.stem} ==\n" + "\n".join(table_lines))
        _write_dat_files(run_dir, csv_path.stem, header, rows)

    checks_path = run_dir / "checks.csv"
    verdict = ""
    if checks_path.is_file():
        _, rows = _read_csv(checks_path)
        failed = [r for r in rows if r[1] != "pass"]
        verdict = (
            f"\nVERDICT: {len(rows) - len(failed)}/{len(rows)} checks passed"
            + ("" if not failed else "; FAILED: " + ", ".join(r[0] for r in failed))
        )
    body = (
        f"run report: {run_dir.name}\nmanifest: {manifest.name}\n\n"
        + "\n\n".join(sections)
        + verdict
        + "\n"
    )
    (run_dir / "report.txt").write_text(body, encoding="utf-8", newline="\n")
    print(body)
    return EXIT_OK


def _write_dat_files(run_dir: Path, stem: str, header, rows) -> None:
    """Two-column x/y files per numeric column, x being the first column."""
    if stem == "checks" or len(header) < 2 or not rows:
        return
    for col in range(1, len(header)):
        try:
            pairs = [(float(r[0]), float(r[col])) for r in rows]
        except ValueError:
            continue
        lines = [f"{_fmt(x)} {_fmt(y)}" for x, y in pairs]
        target = run_dir / f"{stem}__{header[col]}.dat"
        target.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="collapselab",
        description="Stochastic state-vector collapse scenarios: run and report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario config")
    run_p.add_argument("config", help="path to a TOML scenario file")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--workers", type=int, default=None, help="worker processes")
    run_p.add_argument("--out", default=None, help="output directory")
    report_p = sub.add_parser("report", help="render a run directory")
    report_p.add_argument("directory", help="run directory with a manifest")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_scenario(args.config, seed=args.seed, workers=args.workers, out_dir=args.out)
    return emit_report(args.directory)


if __name__ == "__main__":
    sys.exit(main())
