import sys

from peergeo.cli.main import main

sys.exit(main())
