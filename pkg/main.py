import sys

from rich import print as rprint

from src.cli import main


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        rprint("\n[yellow]Application terminated by user[/yellow]", file=sys.stderr)
        sys.exit(130)
    except Exception as e:
        rprint(f"\n[red]Fatal error: {str(e)}[/red]", file=sys.stderr)
        sys.exit(1)
