"""Shared pytest hooks: collect acceptance verdict lines and re-emit them in
the terminal summary, where they are visible even without -s."""

_SCOREBOARD = []


def record_verdict(line):
    _SCOREBOARD.append(line)


def pytest_terminal_summary(terminalreporter):
    if _SCOREBOARD:
        terminalreporter.section("acceptance scoreboard")
        for line in sorted(_SCOREBOARD):
            terminalreporter.write_line(line)
