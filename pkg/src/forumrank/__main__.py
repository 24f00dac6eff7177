import sys

from forumrank.cli import main

sys.exit(main())
