"""Shared sink for acceptance-criterion result lines.

test_acceptance.py records one line per criterion here; the conftest
terminal-summary hook prints them after the run so the pass/fail verdicts
are visible in normal pytest output.
"""

LINES = []


def record(line: str):
    LINES.append(line)
    print(line)
