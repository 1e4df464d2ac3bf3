"""Public middleware surface: Builder, GenSync and observation recording.

A GenSync instance owns a local element set, dispatches one of the three
sync protocols over its configured communicant, and records an
Observation per sync attempt. Instances are single-owner: no concurrent
calls on one instance, though distinct instances may sync concurrently on
independent channels.
"""

from __future__ import annotations

from .errors import ConfigError, StateError
from .field import MODULUS
from .hashing import MASK64
from .params import Observation, ProtocolId, ProtocolParams, SyncRole
from .session import run_client, run_server
from .transport import (
    MemoryEndpoint,
    TcpListener,
    scale_compute,
    session_time,
    tcp_connect,
)

_BUILDER_KEYS = ("protocol", "communicant", "host", "port", "role", "protocol-params")

_TCP_NAMES = ("tcp", "socket")


class Builder:
    """Collects sync configuration and produces bound GenSync instances."""

    def __init__(self):
        self._protocol = None
        self._communicant = None
        self._host = None
        self._port = None
        self._role = None
        self._params = None

    def set(self, key: str, value) -> Builder:
        if key == "protocol":
            self._protocol = value if isinstance(value, ProtocolId) else ProtocolId.parse(value)
        elif key == "communicant":
            if isinstance(value, MemoryEndpoint):
                self._communicant = value
            elif isinstance(value, str) and value.lower() in _TCP_NAMES:
                self._communicant = "tcp"
            else:
                raise ConfigError(
                    f"communicant must be 'socket'/'tcp' or a memory endpoint, got {value!r}"
                )
        elif key == "host":
            self._host = str(value)
        elif key == "port":
            try:
                port = int(value)
            except (TypeError, ValueError):
                raise ConfigError(f"port must be an integer, got {value!r}") from None
            if not 0 <= port <= 65535:
                raise ConfigError(f"port {port} out of range")
            self._port = port
        elif key == "role":
            self._role = SyncRole.parse(value)
        elif key == "protocol-params":
            if isinstance(value, ProtocolParams):
                self._params = value.validate()
            elif isinstance(value, dict):
                try:
                    self._params = ProtocolParams(**value).validate()
                except TypeError as exc:
                    raise ConfigError(f"bad protocol parameter: {exc}") from None
            else:
                raise ConfigError("protocol-params must be a ProtocolParams or a dict")
        else:
            raise ConfigError(f"unknown builder key {key!r}; expected one of {_BUILDER_KEYS}")
        return self

    def build(self) -> GenSync:
        if self._protocol is None:
            raise ConfigError("protocol is required")
        if self._communicant is None:
            raise ConfigError("communicant is required")
        params = self._params or ProtocolParams()

        if self._communicant == "tcp":
            if self._role is None:
                raise ConfigError("role is required for a TCP communicant")
            if self._port is None or (self._role is SyncRole.CLIENT and not self._host):
                raise ConfigError("host and port are required for a TCP communicant")
            return GenSync(
                self._protocol,
                params,
                role=self._role,
                tcp_address=(self._host or "", self._port),
            )

        endpoint = self._communicant
        role = SyncRole.CLIENT if endpoint.is_client else SyncRole.SERVER
        if self._role is not None and self._role is not role:
            raise ConfigError(f"role {self._role.name} contradicts the endpoint's {role.name} side")
        return GenSync(self._protocol, params, role=role, endpoint=endpoint)


class GenSync:
    """One sync party: a data set bound to a protocol and a communicant."""

    def __init__(self, protocol, params, role, endpoint=None, tcp_address=None):
        self.protocol = protocol
        self.params = params
        self.role = role
        self._endpoint = endpoint
        self._tcp_address = tcp_address
        self._listener = None
        self._elements: set[int] = set()
        self._observation: Observation | None = None
        if tcp_address is not None and role is SyncRole.SERVER:
            self._listener = TcpListener(*tcp_address)

    # -- data set -----------------------------------------------------------

    def _ingest(self, value: int) -> int:
        if not isinstance(value, int) or not 0 <= value <= MASK64:
            raise ValueError(f"elements are unsigned 64-bit integers, got {value!r}")
        # CPI arithmetic lives in GF(2^61 - 1); larger identifiers are
        # reduced at ingestion (collision odds are of order 2^-61)
        return value % MODULUS if self.protocol is ProtocolId.CPI else value

    def add_element(self, value: int) -> bool:
        v = self._ingest(value)
        if v in self._elements:
            return False
        self._elements.add(v)
        return True

    def remove_element(self, value: int) -> bool:
        v = self._ingest(value)
        if v not in self._elements:
            return False
        self._elements.discard(v)
        return True

    @property
    def elements(self) -> frozenset:
        return frozenset(self._elements)

    def __len__(self) -> int:
        return len(self._elements)

    @property
    def bound_port(self) -> int | None:
        return self._listener.port if self._listener else None

    # -- sync ---------------------------------------------------------------

    def sync_begin(self) -> bool:
        size_before = len(self._elements)
        endpoint, transient = self._open_channel()
        try:
            runner = run_client if self.role is SyncRole.CLIENT else run_server
            outcome = runner(endpoint, self.protocol, self.params, self._elements)
        finally:
            if transient:
                endpoint.close()

        if outcome.success:
            self._elements.update(outcome.to_add)

        self._observation = self._make_observation(endpoint, outcome, size_before)
        return outcome.success

    def _open_channel(self):
        if self._endpoint is not None:
            self._endpoint.reset_for_sync()
            return self._endpoint, False
        if self.role is SyncRole.SERVER:
            return self._listener.accept(), True
        host, port = self._tcp_address
        return tcp_connect(host, port), True

    def _make_observation(self, endpoint, outcome, size_before) -> Observation:
        link = getattr(endpoint, "params", None)
        if link is not None:
            up = endpoint.ledger.sent if endpoint.is_client else endpoint.ledger.received
            down = endpoint.ledger.received if endpoint.is_client else endpoint.ledger.sent
            comm = session_time(link, up, down, endpoint.turns)
            comp = scale_compute(link, self.role, outcome.compute_seconds)
        else:
            comm = endpoint.comm_seconds
            comp = outcome.compute_seconds
        return Observation(
            success=outcome.success,
            bytes_transmitted=endpoint.ledger.total,
            communication_time=comm,
            computation_time=comp,
            protocol=self.protocol,
            params=self.params,
            local_set_size=size_before,
            differences_recovered=outcome.differences_recovered if outcome.success else 0,
            failure_reason=outcome.failure_reason,
        )

    def get_observation(self) -> Observation:
        if self._observation is None:
            raise StateError("no sync has been performed yet")
        return self._observation

    def close(self):
        if self._listener is not None:
            self._listener.close()
            self._listener = None
