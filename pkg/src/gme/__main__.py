import sys

from gme.cli import main

sys.exit(main())
