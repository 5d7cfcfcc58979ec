import os
import sys

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        RESULTS = mod.RESULTS
        terminalreporter.section("acceptance criteria")
        for name, (ok, detail) in RESULTS.items():
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
