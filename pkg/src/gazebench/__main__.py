"""Allow ``python -m gazebench``."""
import sys

from .cli import main

sys.exit(main())
