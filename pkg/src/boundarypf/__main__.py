import sys

from boundarypf.cli import main

sys.exit(main())
