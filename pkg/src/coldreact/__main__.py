import sys

from coldreact.cli import main

sys.exit(main())
