import sys

from stocheuler.harness.cli import main

sys.exit(main())
