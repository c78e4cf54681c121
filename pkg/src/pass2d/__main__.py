import sys

from pass2d.cli import main

sys.exit(main())
