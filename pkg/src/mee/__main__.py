"""Module entry point for python -m mee."""
from .cli import main

if __name__ == "__main__":
    main()
