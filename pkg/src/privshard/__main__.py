from privshard.cli import main
import sys

sys.exit(main())
