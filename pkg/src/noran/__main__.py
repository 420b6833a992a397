import sys

from noran.cli import main

sys.exit(main())
