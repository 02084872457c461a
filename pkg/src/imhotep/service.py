"""WebSocket session service.

Each connection gets its own session (and scene) handled by one thread:
commands are processed strictly in arrival order, and between commands the
thread pumps the session's event bus so background-load notifications and
their frames go out promptly.  Text frames carry JSON commands, binary
frames carry rendered frame packets.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import serve as ws_serve

from .errors import BindFailure
from .scene import RoomLayout
from .session import Session, SessionConfig

DEFAULT_PORT = 7761

_PUMP_INTERVAL_S = 0.05


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    patient_path: str | None = None
    session: SessionConfig = field(default_factory=SessionConfig)
    room: RoomLayout | None = None


class Service:
    """Accepts viewer connections and runs one session per connection."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        try:
            self._server = ws_serve(self._handle_connection,
                                    self.config.host, self.config.port)
        except OSError as exc:
            raise BindFailure(
                f"cannot bind {self.config.host}:{self.config.port}: {exc}") from None
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.socket.getsockname()[1]

    def _handle_connection(self, conn) -> None:
        session = Session(config=self.config.session, room=self.config.room)
        if self.config.patient_path:
            session.start_patient_load(self.config.patient_path, request_id=0)
        try:
            while True:
                try:
                    message = conn.recv(timeout=_PUMP_INTERVAL_S)
                except TimeoutError:
                    for out in session.pump():
                        conn.send(out)
                    continue
                except ConnectionClosed:
                    break
                if isinstance(message, bytes):
                    # Clients have no binary commands; ignore stray frames.
                    continue
                for out in session.handle_message(message):
                    conn.send(out)
                for out in session.pump():
                    conn.send(out)
        except ConnectionClosed:
            pass
        finally:
            session.close()

    def start(self) -> "Service":
        """Serve on a background thread (tests, embedding)."""
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="imhotep-service", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def serve(config: ServiceConfig | None = None) -> Service:
    """Bind and return a running service (background thread)."""
    return Service(config).start()
