import sys

from padambench.cli import main

sys.exit(main())
