import os

from hypothesis import settings

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    ran = {r.nodeid.rsplit("::", 1)[-1] for reports in terminalreporter.stats.values() for r in reports
           if getattr(r, "nodeid", "").startswith("tests/test_acceptance.py::") and getattr(r, "when", None) in ("setup", "call")}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in mod.TITLES.items():
        line = mod.RESULTS.get(n)
        if line is None:
            started = any(name.startswith(f"test_criterion_{n}_") for name in ran)
            line = f"criterion {n:>2} {'FAIL' if started else 'not run'}: {title}" + (" (did not complete)" if started else "")
        terminalreporter.write_line(line)
