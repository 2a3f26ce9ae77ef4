import sys

from hetex.cli import main

sys.exit(main())
