import sys

from grainsched.cli import main

sys.exit(main())
