import sys

from .cli import app, run


def main():
    sys.exit(run())
