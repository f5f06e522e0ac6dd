import sys

from postmarkov.experiments.cli import main

sys.exit(main())
