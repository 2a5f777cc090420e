"""Lockstep transport: the same scheme cores between two socket endpoints,
with an erasure-injecting relay in the middle.

Every channel slot travels as one 5-byte frame: a big-endian uint32 slot
number and a kind byte.  Slots are numbered globally (as in noise
patterns), so a receiver always knows exactly which frame comes next.
"""
from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from .channel import ERASURE, SILENCE, NoisePattern, Symbol4
from .protocol import ALICE, BOB, NoiselessProtocol
from .sim import default_max_rounds, get_scheme
from .unary import ENERGY, QUIET

FRAME = struct.Struct(">IB")

K_SILENCE = 0x00
K_ENERGY = 0x05
K_BIT0 = 0x06
K_BIT1 = 0x07
K_ERASED = 0xFE
K_END = 0xFF


class ProtocolViolation(RuntimeError):
    """A frame arrived out of order or with a kind this link cannot carry."""


class TransportError(ConnectionError):
    """The socket went away; unrelated to channel erasures."""


def slot_to_kind(codec_name: str, value) -> int:
    if value is ERASURE:
        raise ProtocolViolation("parties never send erasure frames")
    if codec_name == "unary":
        return K_ENERGY if value == ENERGY else K_SILENCE
    if value is SILENCE:
        return K_SILENCE
    if codec_name == "quaternary":
        return value.code
    return K_BIT1 if value else K_BIT0


def kind_to_slot(codec_name: str, kind: int):
    if kind == K_ERASED:
        return ERASURE
    if codec_name == "unary":
        if kind in (K_SILENCE, K_ENERGY):
            return ENERGY if kind == K_ENERGY else QUIET
    elif kind == K_SILENCE:
        return SILENCE
    elif codec_name == "quaternary":
        if 1 <= kind <= 4:
            return Symbol4.from_code(kind)
    elif kind in (K_BIT0, K_BIT1):
        return kind - K_BIT0
    raise ProtocolViolation(f"kind 0x{kind:02x} is not valid on a {codec_name} link")


def pack(seq: int, kind: int) -> bytes:
    return FRAME.pack(seq, kind)


def recv_frame(sock: socket.socket) -> tuple[int, int] | None:
    """Next frame, or None on a clean close at a frame boundary."""
    buf = b""
    while len(buf) < FRAME.size:
        try:
            chunk = sock.recv(FRAME.size - len(buf))
        except socket.timeout:
            raise TransportError("timed out waiting for a frame") from None
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not chunk:
            if buf:
                raise ProtocolViolation(f"connection closed inside a frame ({len(buf)} bytes)")
            return None
        buf += chunk
    return FRAME.unpack(buf)


def connect(host: str, port: int, timeout: float = 10.0) -> socket.socket:
    """Connect, retrying until the listener shows up or ``timeout`` passes."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return sock
        except OSError as exc:
            if time.monotonic() > deadline:
                raise TransportError(f"cannot reach {host}:{port}: {exc}") from exc
            time.sleep(0.05)


@dataclass
class PartyResult:
    role: str
    transcript: str
    sent: int           # non-silent symbols this party transmitted
    timesteps: int
    exit_round: int | None


class _Link:
    def __init__(self, sock, codec):
        self.sock = sock
        self.codec = codec
        self.width = codec.width

    def send_token(self, timestep: int, token):
        base = (timestep - 1) * self.width
        data = b"".join(pack(base + i + 1, slot_to_kind(self.codec.name, v))
                        for i, v in enumerate(self.codec.encode(token)))
        self._send(data)

    def send_end(self, timestep: int):
        self._send(pack((timestep - 1) * self.width + 1, K_END))

    def _send(self, data):
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def recv_token(self, timestep: int):
        """Decoded token for ``timestep``, or None if the peer ended the run."""
        base = (timestep - 1) * self.width
        slots = []
        for i in range(self.width):
            frame = recv_frame(self.sock)
            if frame is None:
                raise TransportError("peer closed the connection mid-run")
            seq, kind = frame
            if seq != base + i + 1:
                raise ProtocolViolation(f"expected frame {base + i + 1}, got {seq}")
            if kind == K_END:
                if i:
                    raise ProtocolViolation("end marker inside a symbol")
                return None
            slots.append(kind_to_slot(self.codec.name, kind))
        return self.codec.decode(tuple(slots))


def run_party(sock: socket.socket, role: str, scheme: str, protocol: NoiselessProtocol,
              inp: str, max_rounds: int | None = None) -> PartyResult:
    """Play one side of the scheme over ``sock`` until the run ends.

    Silence-free schemes end when Bob hears silence and sends the end
    marker; a terminated Alice keeps emitting silence frames until then.
    Silence-permitting schemes end when Alice exits and sends the end marker.
    """
    sch = get_scheme(scheme)
    link = _Link(sock, sch.codec)
    state = sch.initial(role)
    max_rounds = max_rounds or default_max_rounds(protocol.n_bits, 4 * protocol.n_bits)
    sent = 0
    t = 0
    exit_round = None
    while True:
        t += 1
        if t > 2 * max_rounds:
            raise ProtocolViolation(f"run exceeded {max_rounds} rounds")
        speaker = ALICE if t % 2 else BOB
        if sch.family == "ags" and role == ALICE and exit_round is not None:
            link.send_end(t)
            break
        if speaker == role:
            state, token, injected = sch.speak(role, state, inp, protocol)
            sent += isinstance(token, Symbol4) and not injected
            link.send_token(t, token)
        else:
            token = link.recv_token(t)
            if token is None:
                if sch.family == "fixed" and role == ALICE and exit_round is not None:
                    break
                if sch.family == "ags" and role == BOB:
                    break
                raise ProtocolViolation(f"unexpected end marker at timestep {t}")
            state = sch.listen(role, state, token, inp, protocol)
        if exit_round is None and getattr(state, "terminated", False):
            exit_round = (t + 1) // 2
            if sch.family == "fixed" and role == BOB:
                link.send_end(t + 1)
                break
    return PartyResult(role, state.transcript, sent, t, exit_round)


def serve_party(role: str, scheme: str, protocol: NoiselessProtocol, inp: str,
                host: str, port: int, timeout: float = 10.0, max_rounds=None) -> PartyResult:
    sock = connect(host, port, timeout)
    try:
        return run_party(sock, role, scheme, protocol, inp, max_rounds)
    finally:
        sock.close()


# -- relay -------------------------------------------------------------------

@dataclass
class RelayStats:
    forwarded: dict = field(default_factory=lambda: {"a->b": 0, "b->a": 0})
    erased: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def erasures(self) -> int:
        return len(self.erased)


class Relay:
    """Forwards frames between an Alice port and a Bob port, erasing the
    scheduled slot numbers.  One thread per direction keeps FIFO order."""

    def __init__(self, noise, port_a: int = 0, port_b: int = 0, host: str = "127.0.0.1"):
        if not isinstance(noise, NoisePattern):
            raise ValueError("the relay needs a static erasure pattern, not an adaptive adversary")
        self.erase = noise.erased
        self.stats = RelayStats()
        self._lock = threading.Lock()
        self.listeners = [self._listen(host, port_a), self._listen(host, port_b)]
        self.port_a, self.port_b = (s.getsockname()[1] for s in self.listeners)

    @staticmethod
    def _listen(host, port):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((host, port))
        s.listen(1)
        return s

    def _pump(self, src, dst, name):
        try:
            while True:
                frame = recv_frame(src)
                if frame is None:
                    break
                seq, kind = frame
                if kind == K_ERASED:
                    raise ProtocolViolation(f"{name}: party sent an erasure frame")
                if kind != K_END and seq in self.erase:
                    kind = K_ERASED
                    with self._lock:
                        self.stats.erased.append(seq)
                dst.sendall(pack(seq, kind))
                with self._lock:
                    self.stats.forwarded[name] += 1
                if kind == K_END:
                    break
        except (ProtocolViolation, TransportError, OSError) as exc:
            with self._lock:
                self.stats.errors.append(f"{name}: {exc}")
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def serve(self, timeout: float = 60.0) -> RelayStats:
        conns = []
        try:
            for lst in self.listeners:
                lst.settimeout(timeout)
                try:
                    conn, _ = lst.accept()
                except socket.timeout:
                    raise TransportError("no party connected to the relay") from None
                conn.settimeout(timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                conns.append(conn)
            a, b = conns
            threads = [threading.Thread(target=self._pump, args=(a, b, "a->b"), daemon=True),
                       threading.Thread(target=self._pump, args=(b, a, "b->a"), daemon=True)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
        finally:
            for s in conns + self.listeners:
                s.close()
        self.stats.erased.sort()
        return self.stats


def relay(listen_a: int, listen_b: int, noise, host: str = "127.0.0.1", timeout: float = 60.0) -> RelayStats:
    return Relay(noise, listen_a, listen_b, host).serve(timeout)


@dataclass
class NetRun:
    alice: PartyResult
    bob: PartyResult
    relay: RelayStats

    @property
    def outputs(self):
        return self.alice.transcript, self.bob.transcript

    @property
    def transmissions(self) -> int:
        return self.alice.sent + self.bob.sent


def run_over_sockets(scheme: str, protocol: NoiselessProtocol, x: str, y: str,
                     noise: NoisePattern | None = None, timeout: float = 20.0) -> NetRun:
    """Relay plus both parties on localhost, each in its own thread."""
    rel = Relay(noise or NoisePattern())
    out: dict = {}

    def party(role, inp, port):
        try:
            out[role] = serve_party(role, scheme, protocol, inp, "127.0.0.1", port, timeout)
        except Exception as exc:  # surfaced below
            out[role] = exc

    relay_out: dict = {}
    rt = threading.Thread(target=lambda: relay_out.setdefault("stats", rel.serve(timeout)), daemon=True)
    rt.start()
    ths = [threading.Thread(target=party, args=(ALICE, x, rel.port_a), daemon=True),
           threading.Thread(target=party, args=(BOB, y, rel.port_b), daemon=True)]
    for th in ths:
        th.start()
    for th in ths + [rt]:
        th.join(timeout)
    for role in (ALICE, BOB):
        if isinstance(out.get(role), Exception):
            raise out[role]
        if role not in out:
            raise TransportError(f"party {role} did not finish")
    return NetRun(out[ALICE], out[BOB], relay_out.get("stats", rel.stats))
