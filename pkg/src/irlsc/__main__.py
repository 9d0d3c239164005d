import sys

from irlsc.cli import main

sys.exit(main())
