"""Live peer process: one site, a TCP transport, and the line REPL.

Framing is newline-delimited JSON (see wire).  Each connection starts with a
Hello exchange; the dialer follows up with a resync request so a freshly
(re)started process pulls the survivor's history immediately.  All site
mutations happen on the event loop, between awaits, so the engine needs no
locks.  Exit codes: 0 clean quit, 2 configuration error, 3 protocol fault.
"""

from __future__ import annotations

import asyncio
import logging
import os
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .core import CcrError, IntentError, WireError
from .protocol import Hello, Message, ProtocolError, ResyncReq, SiteFaulted, SiteState
from .repl import ReplError, parse_line, repl_eval
from .replicas import replica_type
from .wire import decode_message, encode_message

log = logging.getLogger("ccr.agent")

Addr = Tuple[str, int]


@dataclass
class AgentConfig:
    site: int
    kind: str
    listen: Addr
    connect: Tuple[Addr, ...] = ()
    script: Optional[str] = None
    sync_default: float = 10.0
    quiet_window: float = 0.2


def parse_addr(text: str) -> Addr:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


@dataclass
class _Link:
    writer: asyncio.StreamWriter
    addr: Addr
    task: Optional[asyncio.Task] = field(default=None)


class Agent:
    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg
        self.rt = replica_type(cfg.kind)
        self.state = SiteState(cfg.site, self.rt)
        self.links: Dict[int, _Link] = {}
        self.exit_code = 0
        self._stopping = asyncio.Event()
        self._last_traffic = 0.0
        self._server: Optional[asyncio.base_events.Server] = None

    # -- lifecycle ------------------------------------------------------------

    async def start(self) -> Optional[int]:
        """Bind the listener and dial configured peers.

        Returns an exit code on configuration failure, None when up.
        """
        if self.cfg.script is not None and not Path(self.cfg.script).is_file():
            print(f"script not found: {self.cfg.script}", file=sys.stderr)
            return 2
        host, port = self.cfg.listen
        try:
            self._server = await asyncio.start_server(self._accepted, host, port)
        except OSError as e:
            print(f"cannot listen on {host}:{port}: {e}", file=sys.stderr)
            return 2
        log.info("site %d (%s) listening on %s:%d", self.state.site, self.rt.name, host, port)
        for addr in self.cfg.connect:
            try:
                await self._dial(addr)
            except (OSError, CcrError) as e:
                print(f"connect {addr[0]}:{addr[1]} failed: {e}", file=sys.stderr)
        return None

    async def run(self) -> int:
        rc = await self.start()
        if rc is not None:
            return rc
        repl = asyncio.create_task(self._repl())
        stop = asyncio.create_task(self._stopping.wait())
        _, pending = await asyncio.wait({repl, stop}, return_when=asyncio.FIRST_COMPLETED)
        for t in pending:
            t.cancel()
        await self._shutdown()
        return self.exit_code

    async def _shutdown(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for link in list(self.links.values()):
            if link.task is not None:
                link.task.cancel()
            link.writer.close()
        self.links.clear()

    def _fatal(self, e: BaseException) -> None:
        print(f"fatal: {e}", file=sys.stderr)
        self.exit_code = 3
        self._stopping.set()

    # -- transport ------------------------------------------------------------

    async def _dial(self, addr: Addr) -> int:
        reader, writer = await asyncio.open_connection(*addr)
        hello = Hello(site=self.state.site, kind=self.rt.name, known_len=0)
        writer.write(encode_message(self.rt, hello))
        await writer.drain()
        line = await reader.readline()
        if not line:
            writer.close()
            raise ProtocolError("peer closed connection during handshake")
        reply = decode_message(self.rt, line)
        if not isinstance(reply, Hello):
            writer.close()
            raise ProtocolError(f"expected Hello, got {reply!r}")
        try:
            self.state.handle_message(reply.site, reply)
        except CcrError:
            writer.close()
            raise
        self._register(reply.site, reader, writer, addr)
        await self._send([(reply.site, ResyncReq())])
        log.info("dialed site %d at %s:%d", reply.site, *addr)
        return reply.site

    async def _accepted(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peername = writer.get_extra_info("peername") or ("?", 0)
        try:
            line = await reader.readline()
            if not line:
                writer.close()
                return
            msg = decode_message(self.rt, line)
            if not isinstance(msg, Hello):
                raise ProtocolError(f"expected Hello, got {msg!r}")
            self.state.handle_message(msg.site, msg)
        except SiteFaulted as e:
            self._fatal(e)
            writer.close()
            return
        except (WireError, ProtocolError) as e:
            # refuse the connection; this site keeps serving others
            log.warning("refused connection from %s: %s", peername, e)
            writer.close()
            return
        reply = Hello(site=self.state.site, kind=self.rt.name,
                      known_len=self.state.peers[msg.site].recv_len)
        writer.write(encode_message(self.rt, reply))
        await writer.drain()
        self._register(msg.site, reader, writer, (peername[0], peername[1]))
        log.info("accepted site %d from %s", msg.site, peername)

    def _register(self, peer: int, reader: asyncio.StreamReader,
                  writer: asyncio.StreamWriter, addr: Addr) -> None:
        old = self.links.pop(peer, None)
        if old is not None:
            if old.task is not None:
                old.task.cancel()
            old.writer.close()
        link = _Link(writer=writer, addr=addr)
        link.task = asyncio.create_task(self._read_loop(peer, reader))
        self.links[peer] = link

    async def _read_loop(self, peer: int, reader: asyncio.StreamReader) -> None:
        loop = asyncio.get_running_loop()
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                self._last_traffic = loop.time()
                out = self.state.handle_message(peer, decode_message(self.rt, line))
                await self._send(out)
        except asyncio.CancelledError:
            return
        except SiteFaulted as e:
            self._fatal(e)
        except (WireError, ProtocolError) as e:
            log.warning("dropping site %d: %s", peer, e)
        except ConnectionError:
            pass
        link = self.links.pop(peer, None)
        if link is not None:
            link.writer.close()
        log.info("site %d disconnected", peer)

    async def _send(self, pairs: List[Tuple[int, Message]]) -> None:
        loop = asyncio.get_running_loop()
        for peer, msg in pairs:
            link = self.links.get(peer)
            if link is None or link.writer.is_closing():
                # not transport-connected right now; the resync path catches
                # the peer up when the link returns
                continue
            link.writer.write(encode_message(self.rt, msg))
            self._last_traffic = loop.time()
            try:
                await link.writer.drain()
            except ConnectionError:
                self.links.pop(peer, None)

    # -- command surface -------------------------------------------------------

    async def _repl(self) -> None:
        if self.cfg.script is not None:
            for line in Path(self.cfg.script).read_text().splitlines():
                if await self._exec(line):
                    return
            return  # script exhausted: implicit quit
        queue: asyncio.Queue = asyncio.Queue()
        loop = asyncio.get_running_loop()
        threading.Thread(target=_feed_stdin, args=(loop, queue), daemon=True).start()
        prompt = sys.stdin.isatty()
        while True:
            if prompt:
                print("ccr> ", end="", flush=True)
            line = await queue.get()
            if line is None:
                return
            if await self._exec(line.rstrip("\n")):
                return

    async def _exec(self, line: str) -> bool:
        """Run one command; True means quit."""
        try:
            cmd = parse_line(self.rt.name, line)
        except ReplError as e:
            print(f"parse error: {e}", flush=True)
            return False
        try:
            if cmd.verb == "quit":
                print("bye", flush=True)
                return True
            if cmd.verb == "connect":
                try:
                    peer = await self._dial(cmd.args)
                    print(f"connected to site {peer}", flush=True)
                except (OSError, CcrError) as e:
                    print(f"connect failed: {e}", flush=True)
                return False
            if cmd.verb == "disconnect":
                return self._disconnect(cmd.args)
            if cmd.verb == "sync":
                timeout = cmd.args[0] if cmd.args[0] is not None else self.cfg.sync_default
                if not await self._sync(timeout):
                    print("sync timed out", flush=True)
                    if self.cfg.script is not None:
                        self.exit_code = 3
                        return True
                return False
            _, out, msgs = repl_eval(self.state, line)
            if out:
                print(out, flush=True)
            await self._send(msgs)
        except SiteFaulted as e:
            self._fatal(e)
            return True
        except IntentError as e:
            print(str(e), flush=True)
        return False

    def _disconnect(self, addr: Addr) -> bool:
        for peer, link in list(self.links.items()):
            if link.addr == addr:
                if link.task is not None:
                    link.task.cancel()
                link.writer.close()
                self.links.pop(peer, None)
                print(f"disconnected site {peer}", flush=True)
                return False
        print(f"not connected to {addr[0]}:{addr[1]}", flush=True)
        return False

    async def _sync(self, timeout: float) -> bool:
        """Barrier: wait until nothing is unsent and the wire has gone quiet."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while True:
            # only live links count: a departed peer's backlog is resync work
            # for later, not something this barrier can wait out
            unsent = any(cur.sent_len < len(self.state.history)
                         for peer, cur in self.state.peers.items()
                         if peer in self.links)
            quiet = loop.time() - self._last_traffic >= self.cfg.quiet_window
            if not unsent and quiet:
                return True
            if loop.time() >= deadline:
                return False
            await asyncio.sleep(0.02)


def _feed_stdin(loop: asyncio.AbstractEventLoop, queue: asyncio.Queue) -> None:
    for line in sys.stdin:
        loop.call_soon_threadsafe(queue.put_nowait, line)
    loop.call_soon_threadsafe(queue.put_nowait, None)


def run_agent(cfg: AgentConfig) -> int:
    """Run one agent to completion; returns the process exit code."""
    level = os.environ.get("CCR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        agent = Agent(cfg)
    except IntentError as e:
        print(f"bad replica kind: {e}", file=sys.stderr)
        return 2
    try:
        return asyncio.run(agent.run())
    except KeyboardInterrupt:
        return 0
