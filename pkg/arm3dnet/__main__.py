import sys

from arm3dnet.main import main

sys.exit(main())
