import sys

from widthlab.main import main

sys.exit(main())
