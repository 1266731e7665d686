import numpy as np
import pytest

_acceptance = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record_criterion(request):
    """Attach a one-line measurement to an acceptance test's summary line."""
    def record(detail):
        request.node.user_properties.append(("criterion", detail))
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = "; ".join(v for k, v in item.user_properties if k == "criterion")
        _acceptance.append((rep.passed, doc, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for ok, doc, detail in _acceptance:
        line = f"{'PASS' if ok else 'FAIL'}  {doc}"
        if detail:
            line += f"  [{detail}]"
        tr.write_line(line)
    n_ok = sum(ok for ok, _, _ in _acceptance)
    tr.write_line(f"{n_ok}/{len(_acceptance)} criteria met")
