import sys
from hnlg.cli import main

sys.exit(main())
