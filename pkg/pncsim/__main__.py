import sys

from pncsim.cli import cli_main

sys.exit(cli_main())
