"""Allow ``python -m plrn_grounding <command>``."""

from . import main

if __name__ == "__main__":
    main()
