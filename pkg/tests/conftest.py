import pytest

_LINES = []


class Criterion:
    """Collects named sub-checks for one acceptance criterion and reports a single line."""

    def __init__(self, label):
        self.label = label
        self.checks = []

    def check(self, name, ok, value=""):
        self.checks.append((name, bool(ok), value))
        return bool(ok)

    def finish(self):
        ok = all(c[1] for c in self.checks)
        failed = [c[0] for c in self.checks if not c[1]]
        detail = "; ".join(f"{n}={v}" if v != "" else n for n, _, v in self.checks)
        line = f"{self.label}: {'PASS' if ok else 'FAIL'}  [{detail}]"
        if failed:
            line += f"  failed: {', '.join(failed)}"
        _LINES.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def criterion(request):
    return lambda label: Criterion(label)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s[2:s.index(" ")].rstrip(":"))):
            terminalreporter.write_line(line)
