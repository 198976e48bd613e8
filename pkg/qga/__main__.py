import sys
import warnings

from qga.cli import main

warnings.filterwarnings("ignore", category=DeprecationWarning)

if __name__ == "__main__":
    sys.exit(main())
