import time
from collections import defaultdict

import numpy as np
import pytest

from ricebayes.cli import dispatch
from ricebayes.io import load_chain, load_table1, table1_path

# criterion number -> [(passed, detail), ...], one PASS/FAIL line each in the summary
ACCEPTANCE = defaultdict(list)
TIMINGS = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion].append((bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        details = "; ".join(("" if ok else "FAILED ") + d for ok, d in checks)
        terminalreporter.write_line(f"CRITERION {k}: {verdict} - {details}")


@pytest.fixture(scope="session")
def table1():
    return load_table1()


@pytest.fixture(scope="session")
def table1_run(tmp_path_factory):
    """Full-length Jeffreys fit of the shipped data through the CLI.

    Returns the JSON report, the chain reloaded from its CSV export and
    the chain file path.
    """
    out = tmp_path_factory.mktemp("table1")
    chain_path = out / "chain.csv"
    start = time.perf_counter()
    status, report = dispatch(["fit", str(table1_path()), "--method", "bayes",
                               "--prior", "jeffreys", "--seed", "7",
                               "--chain-out", str(chain_path), "--out", str(out / "fit.json")])
    TIMINGS["table1_run"] = time.perf_counter() - start
    assert status == 0
    return report, load_chain(chain_path), chain_path


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
