"""Endpoints, in-order reassembly and a fault-injecting test channel.

Packets travel back to back over a TCP stream. The receiver does not rely
on the carrier for integrity or ordering: every packet is authenticated,
then passed through a :class:`ReorderBuffer` that hands packets to the
decoder strictly by sequence number. Key evolution forbids skipping a group,
so any gap that is never filled ends the transfer with an error.

:class:`AdversarialChannel` sits between an in-process sender and receiver
and applies a deterministic schedule of drops, duplicates, reorders, replays
and bit flips.
"""

from __future__ import annotations

import io
import logging
import queue
import random
import socket
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .bitblock import RandomSource, random_source
from .codec import DecodeSession, EncodeSession, GroupCiphertext, feed_group, iter_encode_message
from .costmodel import OpCount, analytic_mul_count, analytic_xor_count
from .errors import (
    AuthFailure,
    DesyncError,
    JigsawError,
    MalformedPacket,
    TransportError,
    TruncationError,
)
from .framing import BitString
from .keystate import KeyState, read_key_file
from .wire import FLAG_EOM, FLAG_R, Packet, packet_size, peek_header, seal, verify_and_parse

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 5.0
DEFAULT_REORDER_CAPACITY = 4096

Address = Tuple[str, int]
KeySource = Union[KeyState, str]


@dataclass
class TransferReport:
    role: str
    k: int = 0
    ps: int = 0
    packets: int = 0
    groups: int = 0
    messages: int = 0
    data_bytes: int = 0
    wire_bytes: int = 0
    accepted: int = 0
    auth_failures: int = 0
    malformed: int = 0
    duplicates: int = 0
    key_generation: int = 0
    ops: OpCount = field(default_factory=OpCount)
    error: Optional[str] = None

    @property
    def analytic_xor(self) -> int:
        return analytic_xor_count(self.ops.n_parts, self.k) if self.k else 0

    @property
    def analytic_mul(self) -> int:
        return analytic_mul_count(self.ops.n_parts, self.k) if self.k else 0

    def lines(self) -> List[str]:
        """The report as ``key=value`` lines."""
        out = []
        for name, value in asdict(self).items():
            if name == "ops":
                continue
            out.append(f"{name}={'' if value is None else value}")
        out += [
            f"parts={self.ops.n_parts}",
            f"xor_blocks={self.ops.xor_blocks}",
            f"mul_blocks={self.ops.mul_blocks}",
            f"analytic_xor_blocks={self.analytic_xor}",
            f"analytic_mul_blocks={self.analytic_mul}",
        ]
        return out


class ReorderBuffer:
    """Release packets strictly in sequence order, each exactly once."""

    def __init__(self, next_expected: int = 0, capacity: int = DEFAULT_REORDER_CAPACITY):
        self.next_expected = next_expected
        self.capacity = capacity
        self.held: dict[int, Packet] = {}
        self.duplicates = 0
        self.gap_since: Optional[float] = None

    def push(self, packet: Packet, now: Optional[float] = None) -> List[Packet]:
        seq = packet.seq
        if seq < self.next_expected or seq in self.held:
            self.duplicates += 1
            return []
        if seq != self.next_expected:
            if len(self.held) >= self.capacity:
                raise TruncationError(
                    f"reorder buffer full while waiting for seq {self.next_expected}"
                )
            self.held[seq] = packet
            if self.gap_since is None:
                self.gap_since = time.monotonic() if now is None else now
            return []
        out = [packet]
        self.next_expected += 1
        while self.next_expected in self.held:
            out.append(self.held.pop(self.next_expected))
            self.next_expected += 1
        if not self.held:
            self.gap_since = None
        return out

    def check_timeout(self, timeout: float, now: Optional[float] = None) -> None:
        if self.gap_since is None:
            return
        now = time.monotonic() if now is None else now
        if now - self.gap_since > timeout:
            raise TruncationError(f"gap at seq {self.next_expected} not filled within {timeout}s")

    def __len__(self) -> int:
        return len(self.held)


class Sender:
    """Turns messages into sealed packet bytes."""

    def __init__(self, key: KeyState, rng: Optional[RandomSource] = None, l_min: Optional[int] = None):
        self.session = EncodeSession(key, rng or random_source(), l_min)
        self.report = TransferReport("send", k=key.k, ps=key.ps, ops=self.session.ops)

    def packets(self, message: bytes, flush: bool = True) -> Iterator[bytes]:
        self.report.data_bytes += len(message)
        groups = iter_encode_message(self.session, BitString.from_bytes(message), flush)
        for group in groups:
            yield from self._seal_group(group)
        if flush:
            self.report.messages += 1

    def _seal_group(self, group: GroupCiphertext) -> Iterator[bytes]:
        for block in group.data_blocks:
            yield self._seal(block, 0)
        flags = FLAG_R | (FLAG_EOM if group.eom else 0)
        yield self._seal(group.r_block, flags)
        self.report.groups += 1
        self.report.key_generation = self.session.key.generation

    def _seal(self, block, flags) -> bytes:
        _, raw = seal(self.session, block, flags)
        self.report.packets += 1
        self.report.wire_bytes += len(raw)
        return raw


class Receiver:
    """Verifies, orders and decodes packets; yields whole messages.

    Tags that fail to verify are counted and logged, and the packet is
    dropped. Decoding errors are fatal: the session cannot recover.
    """

    def __init__(self, key: KeyState, capacity: int = DEFAULT_REORDER_CAPACITY):
        self.session = DecodeSession(key)
        self.reorder = ReorderBuffer(capacity=capacity)
        self.report = TransferReport("recv", k=key.k, ps=key.ps, ops=self.session.ops)
        self._group: list = []

    @property
    def key(self) -> KeyState:
        return self.session.key

    def feed(self, raw: bytes) -> List[bytes]:
        """Process one packet received as a discrete unit."""
        self.report.packets += 1
        self.report.wire_bytes += len(raw)
        try:
            packet = verify_and_parse(self.key.mac_key, raw, self.key.ps)
        except AuthFailure:
            self.report.auth_failures += 1
            log.warning("dropping packet that failed authentication (%d so far)",
                        self.report.auth_failures)
            return []
        except MalformedPacket as exc:
            self.report.malformed += 1
            log.warning("dropping malformed packet: %s", exc)
            return []
        return self.accept(packet)

    def accept(self, packet: Packet) -> List[bytes]:
        """Process a packet whose tag has already been verified."""
        self.report.accepted += 1
        delivered = self.reorder.push(packet)
        self.report.duplicates = self.reorder.duplicates
        messages = []
        for p in delivered:
            message = self._deliver(p)
            if message is not None:
                messages.append(message)
        return messages

    def _deliver(self, packet: Packet) -> Optional[bytes]:
        if not packet.is_r:
            if len(self._group) >= self.session.group_size:
                self.session.poisoned = DesyncError(
                    f"seq {packet.seq}: more than {self.session.group_size} data blocks before R"
                )
                raise self.session.poisoned
            self._group.append(packet.payload)
            return None
        ct = GroupCiphertext(tuple(self._group), packet.payload, packet.is_eom)
        self._group = []
        message = feed_group(self.session, ct)
        self.report.groups += 1
        self.report.key_generation = self.key.generation
        if message is None:
            return None
        data = message.to_bytes()
        self.report.messages += 1
        self.report.data_bytes += len(data)
        return data

    @property
    def mid_message(self) -> bool:
        return bool(self.reorder.held or self._group or self.session.pending)

    def close(self) -> None:
        """Check that the stream ended on a message boundary."""
        if self.report.accepted == 0 and self.report.auth_failures + self.report.malformed:
            raise AuthFailure(
                f"no packet authenticated ({self.report.auth_failures} tag failures); "
                "key files probably do not match"
            )
        if self.reorder.held:
            raise TruncationError(
                f"stream closed with seq {self.reorder.next_expected} missing "
                f"({len(self.reorder.held)} later packets held)"
            )
        if self._group or self.session.pending:
            raise TruncationError("stream closed before end-of-message")


# -- adversarial channel ----------------------------------------------------

FAULT_KINDS = ("drop", "duplicate", "reorder", "tamper", "replay")


@dataclass(frozen=True)
class ChannelFault:
    """One entry of a fault schedule.

    ``target_seq`` selects the packet the fault applies to; ``None`` means
    every packet (restricted to R-flagged packets when ``r_only`` is set).
    ``arg`` is the reorder/replay distance or the bit index to flip; when
    it is ``None`` the value is drawn from a generator seeded with ``seed``.
    """

    kind: str
    target_seq: Optional[int] = None
    arg: Optional[int] = None
    seed: int = 0
    r_only: bool = False

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind == "reorder" and (self.arg is None or self.arg < 1):
            raise ValueError("reorder needs a distance >= 1")

    def matches(self, raw: bytes) -> bool:
        flags, seq = peek_header(raw)
        if self.r_only and not flags & FLAG_R:
            return False
        return self.target_seq is None or seq == self.target_seq


def parse_faults(spec: str, seed: int = 0) -> List[ChannelFault]:
    """Parse a comma-separated fault schedule.

    Item grammar: ``kind[:value][@target][/bit]``.

    * ``reorder:D`` shuffles every window of ``D + 1`` packets (displacement
      at most ``D``); ``reorder:D@S`` delays packet ``S`` by ``D`` places.
    * ``drop``, ``duplicate``, ``replay`` and ``tamper`` take a target as
      value: a sequence number, ``all`` (the default) or ``r`` for every
      R-flagged packet. ``tamper:S/B`` flips bit ``B`` of packet ``S``.
    """
    faults = []
    for i, item in enumerate(x.strip() for x in spec.split(",")):
        if not item:
            continue
        bit = None
        if "/" in item:
            item, bit_text = item.split("/", 1)
            bit = int(bit_text)
        kind, _, value = item.partition(":")
        value, _, target_text = value.partition("@")
        kind = kind.strip().lower()
        fault_seed = seed + i
        if kind == "reorder":
            if not value:
                raise ValueError("reorder needs a distance, e.g. reorder:3")
            target = _parse_target(target_text or "all")
            faults.append(ChannelFault(kind, target[0], int(value), fault_seed, target[1]))
        elif kind in FAULT_KINDS:
            if target_text:
                raise ValueError(f"{kind} takes its target as value, e.g. {kind}:5")
            target = _parse_target(value or "all")
            arg = bit if kind == "tamper" else None
            faults.append(ChannelFault(kind, target[0], arg, fault_seed, target[1]))
        else:
            raise ValueError(f"unknown fault kind {kind!r}")
    return faults


def _parse_target(text: str) -> Tuple[Optional[int], bool]:
    text = text.strip().lower()
    if text == "all":
        return None, False
    if text == "r":
        return None, True
    return int(text), False


class AdversarialChannel:
    """Deterministic in-process channel applying a fault schedule in order."""

    def __init__(self, faults: Sequence[ChannelFault] = ()):
        self.faults = list(faults)
        self.stats = {kind: 0 for kind in FAULT_KINDS}

    def transmit(self, packets: Iterable[bytes]) -> Iterator[bytes]:
        stream = iter(packets)
        for fault in self.faults:
            stream = self._stage(fault, stream)
        return stream

    def _stage(self, fault: ChannelFault, stream: Iterator[bytes]) -> Iterator[bytes]:
        rng = random.Random(fault.seed)
        if fault.kind == "reorder" and fault.target_seq is None and not fault.r_only:
            yield from self._shuffle_windows(fault, rng, stream)
            return
        delayed: List[list] = []  # [packets still to pass, raw]
        for raw in stream:
            out = [raw]
            if fault.matches(raw):
                self.stats[fault.kind] += 1
                out = self._apply(fault, rng, raw, delayed)
            for pkt in out:
                yield pkt
                for entry in delayed:
                    entry[0] -= 1
                while delayed and delayed[0][0] <= 0:
                    yield delayed.pop(0)[1]
        for _, pkt in delayed:
            yield pkt

    def _apply(self, fault, rng, raw, delayed) -> List[bytes]:
        kind = fault.kind
        if kind == "drop":
            return []
        if kind == "duplicate":
            return [raw, raw]
        if kind == "tamper":
            bit = fault.arg if fault.arg is not None else rng.randrange(len(raw) * 8)
            mutated = bytearray(raw)
            mutated[bit // 8] ^= 0x80 >> (bit % 8)
            return [bytes(mutated)]
        distance = fault.arg if fault.arg is not None else rng.randint(1, 8)
        delayed.append([distance, raw])
        delayed.sort(key=lambda e: e[0])
        # replay: original goes through now, the copy later; reorder: only later
        return [raw] if kind == "replay" else []

    def _shuffle_windows(self, fault, rng, stream) -> Iterator[bytes]:
        window = []
        for raw in stream:
            window.append(raw)
            if len(window) > fault.arg:
                rng.shuffle(window)
                self.stats["reorder"] += 1
                yield from window
                window = []
        rng.shuffle(window)
        yield from window


def adversarial_channel(faults: Sequence[ChannelFault] = ()) -> AdversarialChannel:
    return AdversarialChannel(faults)


@dataclass
class LoopbackResult:
    messages: List[bytes]
    sent: TransferReport
    received: TransferReport
    error: Optional[JigsawError] = None
    outcome: str = ""


def loopback_transfer(
    messages: Sequence[bytes],
    key: KeyState,
    channel: Optional[AdversarialChannel] = None,
    *,
    rng: Optional[RandomSource] = None,
    l_min: Optional[int] = None,
    timeout: float = DEFAULT_TIMEOUT,
    concurrent: bool = True,
) -> LoopbackResult:
    """Send ``messages`` through ``channel`` to an in-process receiver.

    With ``concurrent`` the sender runs in its own thread and hands packets
    over a queue; otherwise the whole exchange runs inline. Decoding errors
    do not propagate: they land in ``result.error`` and the outcome becomes
    ``"failed-detected"``. ``"corrupted"`` means the receiver finished
    without error but produced different data.
    """
    channel = channel or AdversarialChannel()
    sender = Sender(key, rng, l_min)
    receiver = Receiver(key)

    def produce() -> Iterator[bytes]:
        for m in messages:
            yield from sender.packets(m)

    received: List[bytes] = []
    error = None
    try:
        if concurrent:
            _run_threaded(channel.transmit(produce()), receiver, received, timeout)
        else:
            for raw in channel.transmit(produce()):
                received.extend(receiver.feed(raw))
            receiver.close()
    except JigsawError as exc:
        error = exc
        receiver.report.error = f"{type(exc).__name__}: {exc}"

    if error is not None:
        outcome = "failed-detected"
    elif received == list(messages):
        outcome = "recovered"
    else:
        outcome = "corrupted"
    return LoopbackResult(received, sender.report, receiver.report, error, outcome)


_END = object()


def _run_threaded(packets: Iterator[bytes], receiver: Receiver, received: list, timeout: float):
    q: queue.Queue = queue.Queue(maxsize=1024)
    stop = threading.Event()

    def pump():
        try:
            for raw in packets:
                while not stop.is_set():
                    try:
                        q.put(raw, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
        finally:
            q.put(_END)

    thread = threading.Thread(target=pump, name="jigsaw-sender", daemon=True)
    thread.start()
    try:
        while True:
            try:
                item = q.get(timeout=timeout)
            except queue.Empty:
                raise TruncationError(f"no packet within {timeout}s") from None
            if item is _END:
                break
            received.extend(receiver.feed(item))
            receiver.reorder.check_timeout(timeout)
        receiver.close()
    finally:
        stop.set()
        # unblock a producer stuck on a full queue
        while thread.is_alive():
            try:
                q.get_nowait()
            except queue.Empty:
                thread.join(0.05)


# -- socket endpoints ---------------------------------------------------------

class _PacketReader:
    """Fixed-size packet reads from a socket that survive ``recv`` timeouts."""

    def __init__(self, conn: socket.socket, size: int):
        self.conn = conn
        self.size = size
        self.buf = bytearray()

    def next(self) -> Optional[bytes]:
        while len(self.buf) < self.size:
            chunk = self.conn.recv(max(65536, self.size))
            if not chunk:
                if not self.buf:
                    return None
                raise TruncationError(
                    f"stream ended inside a packet ({len(self.buf)}/{self.size} bytes)"
                )
            self.buf += chunk
        raw = bytes(self.buf[:self.size])
        del self.buf[:self.size]
        return raw


def _load(key: KeySource) -> KeyState:
    return key if isinstance(key, KeyState) else read_key_file(key)


def _as_messages(data) -> Iterable[bytes]:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return [bytes(data)]
    if isinstance(data, io.IOBase) or hasattr(data, "read"):
        return [data.read()]
    return data


def send_stream(
    address: Address,
    key: KeySource,
    data,
    *,
    l_min: Optional[int] = None,
    seed: Optional[int] = None,
    timeout: float = DEFAULT_TIMEOUT,
    chunk_size: int = 1 << 16,
) -> TransferReport:
    """Connect to ``address`` and send ``data``.

    ``data`` is a bytes object, a readable binary file, or an iterable of
    byte strings; each becomes one flushed message on the same session.

    Raises:
        TransportError: on connection or socket failure; ``exc.report``
            holds the counts up to that point.
    """
    sender = Sender(_load(key), random_source(seed), l_min)
    report = sender.report
    try:
        with socket.create_connection(address, timeout=timeout) as sock:
            buf = bytearray()
            for message in _as_messages(data):
                for raw in sender.packets(message):
                    buf += raw
                    if len(buf) >= chunk_size:
                        sock.sendall(buf)
                        buf.clear()
            if buf:
                sock.sendall(buf)
            sock.shutdown(socket.SHUT_WR)
    except OSError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        raise TransportError(f"send to {address[0]}:{address[1]} failed: {exc}", report) from exc
    return report


def recv_stream(
    listen_address: Address,
    key: KeySource,
    sink: Callable[[bytes], object],
    *,
    timeout: float = DEFAULT_TIMEOUT,
    accept_timeout: Optional[float] = None,
    on_listening: Optional[Callable[[Address], None]] = None,
) -> TransferReport:
    """Accept one connection on ``listen_address`` and decode it.

    Each complete message is passed to ``sink``. ``timeout`` bounds how long
    the receiver waits for the next packet while a message is incomplete.
    ``on_listening`` is called with the bound address (useful with port 0).

    Raises:
        TransportError: socket failures.
        TruncationError, DesyncError, FramingError, AuthFailure,
        MalformedPacket: protocol failures, with the partial report attached
            as ``exc.report``.
    """
    receiver = Receiver(_load(key))
    report = receiver.report
    ps = receiver.key.ps
    try:
        with socket.create_server(listen_address) as server:
            if on_listening is not None:
                on_listening(server.getsockname()[:2])
            server.settimeout(accept_timeout)
            conn, _ = server.accept()
            with conn:
                conn.settimeout(timeout)
                reader = _PacketReader(conn, packet_size(ps))
                while True:
                    try:
                        raw = reader.next()
                    except socket.timeout:
                        if receiver.mid_message:
                            raise TruncationError(f"no packet within {timeout}s") from None
                        continue
                    if raw is None:
                        break
                    for message in receiver.feed(raw):
                        sink(message)
                    if report.malformed:
                        raise MalformedPacket("packet framing lost on stream")
                receiver.close()
    except JigsawError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        exc.report = report
        raise
    except OSError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        raise TransportError(f"receive on {listen_address[0]}:{listen_address[1]} failed: {exc}",
                             report) from exc
    return report
