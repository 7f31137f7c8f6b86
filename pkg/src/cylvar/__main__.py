"""``python3 -m cylvar`` entry point."""
import sys

from .cli import main

sys.exit(main())
