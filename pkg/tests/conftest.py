import os

import pytest

# acceptance lines collected during the run and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _no_output_dir(monkeypatch):
    monkeypatch.delenv("STUBBORN_MINING_OUTPUT_DIR", raising=False)
    yield


@pytest.fixture
def python_kernel():
    from stubborn_mining.montecarlo import _kernel_py

    return _kernel_py.run_kernel


@pytest.fixture
def compiled_kernel():
    mod = pytest.importorskip("stubborn_mining.montecarlo._kernel")
    if os.environ.get("STUBBORN_MINING_PURE_PYTHON"):
        pytest.skip("pure-Python mode requested")
    return mod.run_kernel
