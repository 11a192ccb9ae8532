"""Run the command line with `python -m tpsr`."""

import sys

from tpsr.cli import main

sys.exit(main())
