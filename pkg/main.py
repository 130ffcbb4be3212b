#!/usr/bin/env python3
"""
Main entry point for robust fair k-center
Configures logging and dispatches to the command-line app.
"""

import logging
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

import click
from rich.console import Console

from cli.app import EXIT_ERROR, EXIT_USAGE, app
from core.config import get_settings

# Configure logging
logging.basicConfig(
    level=getattr(logging, get_settings().log_level.upper(), logging.WARNING),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)
console = Console(stderr=True)


def main():
    """Main entry point."""
    try:
        code = app(standalone_mode=False)
    except click.exceptions.UsageError as e:
        console.print(f"[bold red]Usage error:[/bold red] {e.format_message()}")
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        console.print("\n[bold yellow]Interrupted[/bold yellow]")
        sys.exit(EXIT_ERROR)
    except Exception as e:
        console.print(f"\n[bold red]Unexpected error: {e}[/bold red]")
        logger.exception("Unhandled error")
        sys.exit(EXIT_ERROR)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
