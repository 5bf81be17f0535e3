import sys

from sfcorr.main import main

sys.exit(main())
