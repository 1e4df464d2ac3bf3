"""Wire choreography of one sync session.

All three protocols share the same shape: a parameter handshake rides in
front of the sketch phase, the client decodes (except for cuckoo, where
both sides query), and the difference phase closes the exchange. Each
protocol completes in two request/response turns; a CPI bound-doubling
retry adds one turn.

    CPI     client: HANDSHAKE            server: HANDSHAKE, SKETCH
            client: DIFFS(missing+confirm)   server: ACK
    IBLT    client: HANDSHAKE, SKETCH    server: HANDSHAKE, SKETCH
            client: DIFFS(missing+confirm)   server: ACK
    CUCKOO  client: HANDSHAKE, SKETCH    server: HANDSHAKE, SKETCH
            client: DIFFS(local-only)        server: DIFFS(local-only)

The CPI sketch travels only from server to client: the client holds its
own evaluations locally and recovers both difference sides from the
numerator and denominator roots, which keeps total traffic within twice
the optimal eight bytes per difference. IBLT and cuckoo exchange their
sketches in both directions.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

from . import cpi as cpi_mod
from . import cuckoo as cuckoo_mod
from . import iblt as iblt_mod
from .errors import (
    BoundExceededError,
    FilterFullError,
    GenSyncError,
    PeelError,
    ProtocolError,
    TransportError,
)
from .params import ProtocolId, ProtocolParams
from .transport import ABORT, ACK, DIFFS, HANDSHAKE, SKETCH, WIRE_VERSION, Frame

# abort reasons
R_HANDSHAKE = 1
R_VERSION = 2
R_DECODE = 3
R_FILTER_FULL = 4
R_PROTOCOL = 5
R_CONFIRM = 6

_U32 = struct.Struct(">I")


class _Stopwatch:
    """Accumulates wall-clock seconds across ``with`` blocks."""

    def __init__(self):
        self.seconds = 0.0

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds += time.perf_counter() - self._start
        return False


@dataclass
class SessionOutcome:
    success: bool
    to_add: set
    sent_missing: int
    compute_seconds: float
    failure_reason: str | None = None
    retries_used: int = 0

    @property
    def differences_recovered(self) -> int:
        return self.sent_missing + len(self.to_add)


def _fail(timer, reason) -> SessionOutcome:
    return SessionOutcome(False, set(), 0, timer.seconds, failure_reason=reason)


def handshake_payload(protocol: ProtocolId, params: ProtocolParams) -> bytes:
    return bytes([protocol.value]) + params.to_bytes() + struct.pack(">H", WIRE_VERSION)


def parse_handshake(payload: bytes):
    expected = 1 + ProtocolParams.wire_size() + 2
    if len(payload) != expected:
        raise ProtocolError(f"handshake payload has {len(payload)} bytes, expected {expected}")
    try:
        protocol = ProtocolId(payload[0])
    except ValueError:
        raise ProtocolError(f"unknown protocol id {payload[0]}") from None
    params = ProtocolParams.from_bytes(payload[1:-2])
    (version,) = struct.unpack(">H", payload[-2:])
    return protocol, params, version


def _encode_lists(*lists) -> bytes:
    out = bytearray()
    for lst in lists:
        items = sorted(lst)
        out += _U32.pack(len(items))
        for v in items:
            out += v.to_bytes(8, "big")
    return bytes(out)


def _decode_lists(payload: bytes, count: int):
    lists = []
    off = 0
    for _ in range(count):
        if off + 4 > len(payload):
            raise ProtocolError("truncated difference payload")
        (n,) = _U32.unpack_from(payload, off)
        off += 4
        end = off + 8 * n
        if end > len(payload):
            raise ProtocolError("truncated difference payload")
        lists.append([int.from_bytes(payload[off + 8 * i : off + 8 * i + 8], "big") for i in range(n)])
        off = end
    if off != len(payload):
        raise ProtocolError("trailing bytes in difference payload")
    return lists


def _abort(ch, code: int, message: str):
    try:
        ch.send_frame(Frame(ABORT, bytes([code]) + message.encode()))
    except (TransportError, GenSyncError):
        pass


def _abort_reason(frame: Frame) -> str:
    if not frame.payload:
        return "peer aborted"
    return f"peer aborted ({frame.payload[0]}): {frame.payload[1:].decode(errors='replace')}"


def _expect(ch, kind: int) -> Frame:
    frame = ch.recv_frame()
    if frame.kind == ABORT:
        raise _PeerAbort(_abort_reason(frame))
    if frame.kind != kind:
        _abort(ch, R_PROTOCOL, f"expected frame kind {kind}, got {frame.kind}")
        raise ProtocolError(f"expected frame kind {kind}, got {frame.kind}")
    return frame


class _PeerAbort(GenSyncError):
    pass


def _build_local_sketch(protocol, params, elements, timer):
    with timer:
        if protocol is ProtocolId.CPI:
            return cpi_mod.make_sketch(elements, params.cpi_mbar, params.cpi_verification_points)
        if protocol is ProtocolId.IBLT:
            m = iblt_mod.cell_count(params.iblt_expected_diffs, params.iblt_hedge, params.iblt_num_hashes)
            return iblt_mod.build_table(elements, m, params.iblt_num_hashes, params.rng_seed)
        return cuckoo_mod.build_filter(
            elements,
            params.rng_seed,
            params.cuckoo_bucket_size,
            params.cuckoo_fingerprint_bits,
            params.cuckoo_max_kicks,
        )


# ---------------------------------------------------------------------------
# client


def run_client(ch, protocol: ProtocolId, params: ProtocolParams, elements: set) -> SessionOutcome:
    timer = _Stopwatch()
    try:
        try:
            local = _build_local_sketch(protocol, params, elements, timer)
        except FilterFullError as exc:
            return _fail(timer, f"filter full: {exc}")

        ch.send_frame(Frame(HANDSHAKE, handshake_payload(protocol, params)))
        if protocol is not ProtocolId.CPI:
            ch.send_frame(Frame(SKETCH, local.to_bytes()))

        their_hello = _expect(ch, HANDSHAKE)
        their_protocol, their_params, their_version = parse_handshake(their_hello.payload)
        if their_version != WIRE_VERSION:
            _abort(ch, R_VERSION, f"wire version {their_version} != {WIRE_VERSION}")
            return _fail(timer, "wire version mismatch")
        if their_protocol is not protocol or their_params != params:
            _abort(ch, R_HANDSHAKE, "protocol or parameters disagree")
            return _fail(timer, "handshake mismatch")

        their_sketch = _expect(ch, SKETCH)

        if protocol is ProtocolId.CPI:
            return _client_cpi(ch, params, elements, local, their_sketch.payload, timer)
        if protocol is ProtocolId.IBLT:
            return _client_iblt(ch, elements, local, their_sketch.payload, timer)
        return _client_cuckoo(ch, elements, their_sketch.payload, timer)
    except _PeerAbort as exc:
        return _fail(timer, str(exc))
    except (TransportError, ProtocolError) as exc:
        return _fail(timer, str(exc))


def _send_diffs_await_ack(ch, only_mine, only_theirs, timer) -> SessionOutcome:
    ch.send_frame(Frame(DIFFS, _encode_lists(only_mine, only_theirs)))
    _expect(ch, ACK)
    return SessionOutcome(True, set(only_theirs), len(only_mine), timer.seconds)


def _client_cpi(ch, params, elements, mine, their_payload, timer) -> SessionOutcome:
    theirs = cpi_mod.CpiSketch.from_bytes(their_payload)
    mbar = params.cpi_mbar
    ver = params.cpi_verification_points
    retries = 0
    while True:
        try:
            with timer:
                only_mine, only_theirs = cpi_mod.reconcile(mine, theirs)
                if not cpi_mod.verify_membership(only_mine, only_theirs, set(elements)):
                    raise BoundExceededError("decode contradicts local membership")
            break
        except BoundExceededError as exc:
            if retries >= params.cpi_retry_limit:
                _abort(ch, R_DECODE, str(exc))
                return _fail(timer, f"difference bound exceeded: {exc}")
            retries += 1
            old_len = len(mine.evaluations)
            new_mbar = mbar * 2
            # request the freshly appended evaluation points
            ch.send_frame(Frame(SKETCH, cpi_mod.CpiSketch(new_mbar, ver, len(elements), []).to_bytes()))
            ext = _expect(ch, SKETCH)
            appended_theirs = cpi_mod.CpiSketch.from_bytes(ext.payload)
            with timer:
                appended_mine = cpi_mod.make_sketch(elements, new_mbar, ver, start=old_len)
                mine = cpi_mod.extend_sketch(mine, appended_mine, new_mbar)
                theirs = cpi_mod.extend_sketch(theirs, appended_theirs, new_mbar)
            mbar = new_mbar
    outcome = _send_diffs_await_ack(ch, only_mine, only_theirs, timer)
    outcome.retries_used = retries
    return outcome


def _client_iblt(ch, elements, mine, their_payload, timer) -> SessionOutcome:
    theirs = iblt_mod.Iblt.from_bytes(their_payload)
    try:
        with timer:
            only_mine, only_theirs = mine.subtract(theirs).peel()
    except PeelError as exc:
        _abort(ch, R_DECODE, str(exc))
        return _fail(timer, f"peel failed: {exc}")
    return _send_diffs_await_ack(ch, only_mine, only_theirs, timer)


def _client_cuckoo(ch, elements, their_payload, timer) -> SessionOutcome:
    their_filter = cuckoo_mod.CuckooFilter.from_bytes(their_payload)
    with timer:
        mine_only = cuckoo_mod.local_only(elements, their_filter)
    ch.send_frame(Frame(DIFFS, _encode_lists(mine_only)))
    reply = _expect(ch, DIFFS)
    (their_only,) = _decode_lists(reply.payload, 1)
    return SessionOutcome(True, set(their_only), len(mine_only), timer.seconds)


# ---------------------------------------------------------------------------
# server


def run_server(ch, protocol: ProtocolId, params: ProtocolParams, elements: set) -> SessionOutcome:
    timer = _Stopwatch()
    try:
        hello = _expect(ch, HANDSHAKE)
        try:
            their_protocol, their_params, their_version = parse_handshake(hello.payload)
        except ProtocolError as exc:
            _abort(ch, R_PROTOCOL, str(exc))
            return _fail(timer, str(exc))
        if their_version != WIRE_VERSION:
            _abort(ch, R_VERSION, f"wire version {their_version} != {WIRE_VERSION}")
            return _fail(timer, "wire version mismatch")
        if their_protocol is not protocol or their_params != params:
            _abort(ch, R_HANDSHAKE, "protocol or parameters disagree")
            return _fail(timer, "handshake mismatch")

        client_sketch = None
        if protocol is not ProtocolId.CPI:
            client_sketch = _expect(ch, SKETCH)

        try:
            local = _build_local_sketch(protocol, params, elements, timer)
        except FilterFullError as exc:
            _abort(ch, R_FILTER_FULL, str(exc))
            return _fail(timer, f"filter full: {exc}")

        ch.send_frame(Frame(HANDSHAKE, handshake_payload(protocol, params)))
        ch.send_frame(Frame(SKETCH, local.to_bytes()))

        if protocol is ProtocolId.CPI:
            return _server_cpi(ch, params, elements, timer)
        if protocol is ProtocolId.IBLT:
            return _server_apply_diffs(ch, elements, timer)
        return _server_cuckoo(ch, elements, client_sketch.payload, timer)
    except _PeerAbort as exc:
        return _fail(timer, str(exc))
    except (TransportError, ProtocolError) as exc:
        return _fail(timer, str(exc))


def _server_apply_diffs(ch, elements, timer) -> SessionOutcome:
    frame = _expect(ch, DIFFS)
    missing_here, confirmed = _decode_lists(frame.payload, 2)
    if any(v not in elements for v in confirmed):
        _abort(ch, R_CONFIRM, "peer confirmed elements this side does not hold")
        return _fail(timer, "confirmation list mismatch")
    ch.send_frame(Frame(ACK))
    return SessionOutcome(True, set(missing_here), len(confirmed), timer.seconds)


def _server_cpi(ch, params, elements, timer) -> SessionOutcome:
    ver = params.cpi_verification_points
    sent_points = params.cpi_mbar + ver
    while True:
        frame = ch.recv_frame()
        if frame.kind == ABORT:
            return _fail(timer, _abort_reason(frame))
        if frame.kind == SKETCH:
            # bound-doubling retry: serve the appended evaluation points
            request = cpi_mod.CpiSketch.from_bytes(frame.payload)
            new_total = request.mbar + ver
            with timer:
                appended = cpi_mod.make_sketch(elements, request.mbar, ver, start=sent_points)
            ch.send_frame(Frame(SKETCH, appended.to_bytes()))
            sent_points = new_total
            continue
        if frame.kind == DIFFS:
            missing_here, confirmed = _decode_lists(frame.payload, 2)
            if any(v not in elements for v in confirmed):
                _abort(ch, R_CONFIRM, "peer confirmed elements this side does not hold")
                return _fail(timer, "confirmation list mismatch")
            ch.send_frame(Frame(ACK))
            return SessionOutcome(True, set(missing_here), len(confirmed), timer.seconds)
        _abort(ch, R_PROTOCOL, f"unexpected frame kind {frame.kind}")
        return _fail(timer, f"unexpected frame kind {frame.kind}")


def _server_cuckoo(ch, elements, client_payload, timer) -> SessionOutcome:
    client_filter = cuckoo_mod.CuckooFilter.from_bytes(client_payload)
    with timer:
        server_only = cuckoo_mod.local_only(elements, client_filter)
    frame = _expect(ch, DIFFS)
    (client_only,) = _decode_lists(frame.payload, 1)
    ch.send_frame(Frame(DIFFS, _encode_lists(server_only)))
    return SessionOutcome(True, set(client_only), len(server_only), timer.seconds)
