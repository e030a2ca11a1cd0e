"""Entry point for running the lab as a module."""

from .cli import main

if __name__ == "__main__":
    main()
