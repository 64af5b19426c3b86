import os
import sys

# Big-step evaluation and slicing recurse as deep as the dynamic statement
# nesting of the program; the default limit only covers toy runs.  Tests
# that go four digits deep route through itml.cli.run_deep instead.
sys.setrecursionlimit(200_000)

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

PROGRAMS = os.path.join(os.path.dirname(__file__), "programs")


def program_path(name: str) -> str:
    return os.path.join(PROGRAMS, name)


def program_text(name: str) -> str:
    with open(program_path(name), "r", encoding="utf-8") as handle:
        return handle.read()
