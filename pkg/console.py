"""
Terminal output helpers.

Progress and status lines for long simulations. Quiet mode (``LEAKCTL_QUIET``
or ``set_quiet(True)``) keeps everything except errors off the terminal.
"""

import os
import sys


# ANSI colors for terminal output (works on most platforms)
class Colors:
    GREEN = '\033[0;32m'
    BLUE = '\033[0;34m'
    YELLOW = '\033[1;33m'
    RED = '\033[0;31m'
    BOLD = '\033[1m'
    END = '\033[0m'


_quiet = False


def quiet_from_env() -> bool:
    """LEAKCTL_QUIET as a flag; read after .env has been loaded"""
    return os.getenv("LEAKCTL_QUIET", "").strip().lower() in ("1", "true", "yes")


def set_quiet(quiet: bool) -> None:
    global _quiet
    _quiet = quiet


def print_header(title):
    """Print a formatted header"""
    if _quiet:
        return
    print(f"\n{Colors.BOLD}{title}{Colors.END}")
    print("=" * (len(title) + 5))


def info(message):
    if not _quiet:
        print(f"{Colors.BLUE}ℹ {message}{Colors.END}")


def success(message):
    if not _quiet:
        print(f"{Colors.GREEN}✓ {message}{Colors.END}")


def warning(message):
    if not _quiet:
        print(f"{Colors.YELLOW}⚠ {message}{Colors.END}")


def error(message):
    print(f"{Colors.RED}✗ {message}{Colors.END}", file=sys.stderr)


def error_line(exc: BaseException) -> str:
    """Single machine-parsable failure line for the CLI boundary"""
    text = str(exc).replace('"', "'").replace("\n", " ")
    return f'ERROR kind={type(exc).__name__} message="{text}"'
