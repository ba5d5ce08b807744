"""Allow `python -m gmdiffuse`."""

import sys

from gmdiffuse.cli.main import main


sys.exit(main())
