import threading

import pytest

from jigsaw.transport import recv_stream


class ReceiverThread:
    """Runs ``recv_stream`` on an ephemeral localhost port."""

    def __init__(self, key, **kwargs):
        self.messages = []
        self.report = None
        self.error = None
        self._ready = threading.Event()
        self.address = None

        def on_listening(addr):
            self.address = addr
            self._ready.set()

        def run():
            try:
                self.report = recv_stream(("127.0.0.1", 0), key, self.messages.append,
                                          on_listening=on_listening, accept_timeout=10, **kwargs)
            except Exception as exc:  # surfaced by the test through .error
                self.error = exc
                self._ready.set()

        self.thread = threading.Thread(target=run, daemon=True)
        self.thread.start()
        assert self._ready.wait(5), "receiver did not start listening"

    def join(self, timeout=30):
        self.thread.join(timeout)
        assert not self.thread.is_alive(), "receiver did not finish"
        return self


@pytest.fixture
def receiver_thread():
    return ReceiverThread


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
