"""Tagged progress lines ([OK], [WARNING], ...) written to stderr."""

import os
import sys


def quiet() -> bool:
    return os.environ.get("IRS_SIM_QUIET", "").strip().lower() in ("1", "true", "yes")


def report(message: str, verbose: bool = True) -> None:
    """Print one progress line unless verbose is off or IRS_SIM_QUIET is set"""
    if verbose and not quiet():
        print(message, file=sys.stderr, flush=True)


def warn(message: str) -> None:
    """[WARNING] lines are always shown"""
    print(f"[WARNING] {message}", file=sys.stderr, flush=True)


def rule(title: str, verbose: bool = True) -> None:
    report("\n" + "=" * 60, verbose)
    report(title, verbose)
    report("=" * 60, verbose)
