"""Command line entry point: rgqm <task> --config <file.json> --out <dir>.

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 configuration
error, 4 convexity failure, 5 non-convergence, 6 negative gap, 7 seed check
failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_SEED_CHECK = 7
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")

log = logging.getLogger("rgqm")


def _threads() -> int | None:
    raw = os.environ.get("RGQM_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        from .errors import ConfigError
        raise ConfigError("env.RGQM_THREADS", f"expected a positive integer, got {raw!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    from .config import TASKS
    ap = argparse.ArgumentParser(prog="rgqm", description="Mode-by-mode RG flows for 1D quantum mechanics")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--seed-check", action="store_true",
                    help="validate the coupling-flow coefficients against quadrature first")
    ap.add_argument("--convention", choices=("laplacian", "paper"), default=None,
                    help="override the lattice frequency formula")
    ap.add_argument("--no-figures", action="store_true", help="skip PNG output")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from .errors import ConfigError, RGQMError
    try:
        n = _threads()
        if n is not None:
            for var in _THREAD_VARS:
                os.environ[var] = str(n)
        from .config import parse_config
        from .runner import dispatch
        if n is not None:
            import numba
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError("--config", f"cannot read file: {err.strerror}") from None
        cfg = parse_config(text, task=args.task, convention=args.convention)
        report = None
        if args.seed_check:
            from .seed_check import seed_check
            report = seed_check()
            log.info("seed check: %d checks, max error %.2e", report["n_checks"], report["max_abs_error"])
        man = dispatch(cfg, args.out, figures=False if args.no_figures else None, seed_report=report)
        for wmsg in man.warnings:
            log.warning(wmsg)
        print(f"{cfg.task}: {man.status}; outputs in {args.out}")
        if report is not None and not report["passed"]:
            print("seed check FAILED", file=sys.stderr)
            return EXIT_SEED_CHECK
        return 0
    except RGQMError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except Exception as err:  # noqa: BLE001
        print(f"unexpected error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
