import sys

from cpldc.cli import main

sys.exit(main())
