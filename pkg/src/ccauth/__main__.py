import sys

from ccauth.cli import main

sys.exit(main())
