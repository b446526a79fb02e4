import sys

from shadowbag.main import main

sys.exit(main())
