import sys

from colldeco.runner.cli import main

sys.exit(main())
