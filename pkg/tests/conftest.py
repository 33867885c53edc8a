import ipaddress
import socket
import time

import pytest

from cot_forge.stub import StubEndpoint

_ACCEPTANCE: list[tuple[str, bool, float]] = []


@pytest.fixture
def make_stub():
    started = []

    def factory(responder, **kwargs):
        stub = StubEndpoint(responder, **kwargs).start()
        started.append(stub)
        return stub

    yield factory
    for stub in started:
        stub.stop()


@pytest.fixture
def no_egress(monkeypatch):
    """Fail any socket connection that leaves the loopback interface."""
    real_connect = socket.socket.connect

    def guarded(self, address):
        host = address[0] if isinstance(address, tuple) else address
        if isinstance(host, str):
            try:
                if not ipaddress.ip_address(host).is_loopback:
                    raise AssertionError(f"network egress to {address}")
            except ValueError:
                if host != "localhost":
                    raise AssertionError(f"network egress to {address}") from None
        return real_connect(self, address)

    monkeypatch.setattr(socket.socket, "connect", guarded)


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    name = request.node.get_closest_marker("criterion").args[0]
    start = time.perf_counter()
    yield start
    failed = getattr(request.node, "rep_call", None) is None or request.node.rep_call.failed
    _ACCEPTANCE.append((name, not failed, time.perf_counter() - start))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, elapsed in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({elapsed:.2f}s)")
