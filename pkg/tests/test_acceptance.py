"""Acceptance gate: one test per criterion, one printed verdict line each.

Criteria 2 and 6 include the text kind's three-patch merge orders, which the
pinned transform tables cannot satisfy (see the tp2 notes in test_props and
test_transforms); those tests fail honestly rather than being weakened.
"""

import contextlib
import io
import json
import shutil
import socket
import subprocess
import threading
import time

import pytest

from ccr.cli import sim_main
from ccr.core import OpId, apply_patch, transform_patch
from ccr.props import check_properties
from ccr.protocol import Full, Hello, Increment, ResyncReq, SiteState, quiescent
from ccr.replicas import replica_type
from ccr.wire import encode_message, decode_message

KINDS = ("counter", "addmult", "lww", "eset", "queue", "text", "socialmedia")
AGENT = shutil.which("ccr-agent")


REPORTED = []  # verdict lines, echoed after the run by conftest


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    REPORTED.append(line)
    print(line, flush=True)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_port(port, timeout=10.0):
    """Block until a listener answers; a dialer spawned earlier would race
    the other process's bind and give up."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            socket.create_connection(("127.0.0.1", port), timeout=0.25).close()
            return
        except OSError:
            if time.monotonic() > deadline:
                raise AssertionError(f"port {port} never came up")
            time.sleep(0.02)


# -- protocol mesh helpers (FIFO delivery) ------------------------------------

def mesh(kind, n):
    sites = {i: SiteState(i, replica_type(kind)) for i in range(n)}
    for i in sites:
        for j in sites:
            if i != j:
                sites[i].connect_peer(j)
    return sites


def push(pending, sender, msgs):
    pending.extend((sender, peer, msg) for peer, msg in msgs)


def drain(sites, pending, audit=None):
    steps = 0
    while pending:
        frm, to, msg = pending.pop(0)
        if audit is not None:
            audit(frm, to, msg, sites)
        push(pending, to, sites[to].handle_message(frm, msg))
        steps += 1
        assert steps < 100_000, "message storm"
    assert quiescent(sites, 0)
    return steps


# -- criteria ------------------------------------------------------------------

def test_criterion_1_pairwise_confluence():
    t0 = time.monotonic()
    bad = {}
    for kind in KINDS:
        rep = check_properties(kind, 1000, 7, checks=("tp1",))
        if rep.failures["tp1"]:
            bad[kind] = rep.failures["tp1"]
    elapsed = time.monotonic() - t0
    ok = not bad and elapsed < 60
    report(1, ok, f"7 kinds x 1000 triples, digest-exact, {elapsed:.1f}s")
    assert ok, (bad, elapsed)


def test_criterion_2_six_merge_orders():
    results = {}
    for kind in KINDS:
        rep = check_properties(kind, 1000, 7, checks=("tp2",))
        results[kind] = rep.failures["tp2"]
    detail = ", ".join(f"{k}={1000 - v}/1000" for k, v in results.items())
    ok = not any(results.values())
    report(2, ok, detail)
    assert ok, f"three-patch merge-order failures: {results}"


def test_criterion_3_symmetry_idempotence():
    bad = {}
    for kind in KINDS:
        rep = check_properties(kind, 1000, 7, checks=("sym", "idem"))
        fails = rep.failures["sym"] + rep.failures["idem"]
        if fails:
            bad[kind] = fails
    ok = not bad
    report(3, ok, "7 kinds x 1000 pairs, mirrored results and empty self-transform")
    assert ok, bad


def test_criterion_4_eset_readd():
    sites = mesh("eset", 3)
    pending = []
    for actor, intent in ((0, ("add", "x")), (1, ("rem", "x")), (2, ("add", "x"))):
        push(pending, actor, sites[actor].local_update(intent))
        drain(sites, pending)
    digests = {s.digest() for s in sites.values()}
    ok = digests == {'["x"]'}
    report(4, ok, "add/converge/rem/converge/add/converge leaves x everywhere")
    assert ok, digests


def test_criterion_5_addmult_exhaustive():
    rt = replica_type("addmult")
    checked = 0
    for d in range(-20, 21):
        for m in range(-20, 21):
            for n in range(-5, 6):
                p = (rt.op(OpId(0, 1), "Add", m),)
                q = (rt.op(OpId(1, 1), "Mult", n),)
                left, right = transform_patch(rt, d, p, q)
                want = (d + m) * n
                got_p = apply_patch(rt, apply_patch(rt, d, p), right)
                got_q = apply_patch(rt, apply_patch(rt, d, q), left)
                assert got_p == got_q == want, (d, m, n, got_p, got_q, want)
                checked += 1
    report(5, True, f"{checked} (D,m,n) combinations, both orders equal (D+m)*n")


def test_criterion_6_convergence_fuzzing():
    # 500 seeds per kind spread over sites 3..5 and full/ring, all via the
    # ccr-sim entry point with reorder and duplication faults on.
    cells = [(3, "full"), (4, "ring"), (5, "full"), (3, "ring"), (4, "full"), (5, "ring")]
    counts = [84, 84, 84, 84, 82, 82]
    outcome = {}
    slowest = 0.0
    for kind in KINDS:
        t0 = time.monotonic()
        converged = 0
        for (n_sites, topo), cnt, base in zip(cells, counts, range(0, 6000, 1000)):
            buf = io.StringIO()
            with contextlib.redirect_stdout(buf):
                sim_main(["--replica", kind, "--sites", str(n_sites), "--ops", "20",
                          "--trials", str(cnt), "--seed", str(base),
                          "--topology", topo, "--reorder", "--duplicate"])
            rep = json.loads(buf.getvalue().strip().splitlines()[-1])
            converged += rep["converged"]
        elapsed = time.monotonic() - t0
        slowest = max(slowest, elapsed)
        outcome[kind] = (converged, elapsed)
    detail = ", ".join(f"{k}={c}/500" for k, (c, _) in outcome.items())
    ok = all(c == 500 for c, _ in outcome.values()) and slowest < 300
    report(6, ok, f"{detail}; slowest kind {slowest:.0f}s")
    assert ok, outcome


def test_criterion_7_incremental_messaging():
    rt = replica_type("counter")
    sites = mesh("counter", 3)
    actual_bytes = 0
    baseline_bytes = 0
    audited = 0

    # queue entries carry the sender's history as it stood at send time, so
    # the audit can compute what the receiver lacked without trusting the
    # message's own framing
    script = [(0, ("incr", 1)), (1, ("incr", 2)), (2, ("decr", 3)),
              (0, ("incr", 4)), (2, ("incr", 5)), (1, ("decr", 6)),
              (0, ("decr", 7)), (1, ("incr", 8))]
    pending = []

    def emit(sender, msgs):
        pending.extend((sender, peer, msg, sites[sender].history) for peer, msg in msgs)

    for i, (actor, intent) in enumerate(script):
        emit(actor, sites[actor].local_update(intent))
        if i % 2 == 0:  # let pairs of updates race before delivering
            continue
        while pending:
            frm, to, msg, hist_at_send = pending.pop(0)
            assert isinstance(msg, Increment), f"unexpected control frame {msg!r}"
            lacked = len(hist_at_send) - sites[to].peers[frm].recv_len
            assert msg.prefix_len == sites[to].peers[frm].recv_len
            assert len(msg.ops) == lacked, (len(msg.ops), lacked)
            actual_bytes += len(encode_message(rt, msg))
            baseline_bytes += len(encode_message(rt, Full(sender=frm, ops=hist_at_send)))
            audited += 1
            emit(to, sites[to].handle_message(frm, msg))
    assert quiescent(sites, 0)
    assert len({s.digest() for s in sites.values()}) == 1
    ok = actual_bytes < baseline_bytes and audited > 0
    report(7, ok, f"{audited} increments each = exactly the receiver's gap; "
                  f"{actual_bytes} bytes vs {baseline_bytes} full-patch baseline")
    assert ok


# -- criterion 8: two real processes ------------------------------------------

A_SETUP = {
    "counter": ["incr 2", "incr 9"],
    "addmult": ["add 5", "add -2"],
    "lww": ['write "alpha"'],
    "eset": ["add x", "add y"],
    "queue": ["enq a", "enq b"],
    "text": ['ins 0 "ab"', 'ins 2 "cd"'],
    "socialmedia": ['post p1 write "T"', "post p1 like"],
}
B_UPDATES = {
    "counter": ["decr 3"],
    "addmult": ["mult 2"],
    "lww": ['write "beta"'],
    "eset": ["rem x"],
    "queue": ["deq"],
    "text": ['ins 0 "Z"', "del 2 1"],
    "socialmedia": ["post p1 comment nice", "post p2 like"],
}


def _read_line(pipe, timeout=15.0):
    box = []
    t = threading.Thread(target=lambda: box.append(pipe.readline()), daemon=True)
    t.start()
    t.join(timeout)
    assert box and box[0], "no output before timeout"
    return box[0].rstrip("\n")


def _spawn(site, kind, port, connect=None, script=None):
    cmd = [AGENT, "--site", str(site), "--replica", kind,
           "--listen", f"127.0.0.1:{port}"]
    if connect is not None:
        cmd += ["--connect", f"127.0.0.1:{connect}"]
    if script is not None:
        cmd += ["--script", str(script)]
    return subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True)


def _pair_shows(kind, tmp_path):
    pa = free_port()
    a = _spawn(0, kind, pa)
    try:
        wait_port(pa)
        for line in A_SETUP[kind]:
            a.stdin.write(line + "\n")
        a.stdin.flush()
        script = tmp_path / f"{kind}-b.ccr"
        script.write_text("\n".join(["sync 15", *B_UPDATES[kind],
                                     "sync 15", "show", "quit"]) + "\n")
        b = _spawn(1, kind, free_port(), connect=pa, script=script)
        b_out, b_err = b.communicate(timeout=30)
        assert b.returncode == 0, b_err
        b_lines = b_out.splitlines()
        assert b_lines[-1] == "bye" and len(b_lines) == 2, b_out
        a_out, a_err = a.communicate(input="sync 15\nshow\nquit\n", timeout=30)
        assert a.returncode == 0, a_err
        a_lines = a_out.splitlines()
        assert a_lines[-1] == "bye" and len(a_lines) == 2, a_out
        return a_lines[0], b_lines[0]
    finally:
        if a.poll() is None:
            a.kill()
            a.communicate()


def _kill_and_reconnect(tmp_path):
    pa = free_port()
    a = _spawn(0, "eset", pa)
    wait_port(pa)
    b = _spawn(1, "eset", free_port(), connect=pa)
    try:
        a.stdin.write("add x\nadd y\n")
        a.stdin.flush()
        b.stdin.write("sync 15\nrem x\nsync 15\nshow\n")
        b.stdin.flush()
        assert _read_line(b.stdout) == '["y"]'   # rem sent and settled
        b.kill()
        b.communicate()
        a.stdin.write("add z\n")
        a.stdin.flush()
        script = tmp_path / "b2.ccr"
        script.write_text("sync 15\nshow\nquit\n")
        b2 = _spawn(1, "eset", free_port(), connect=pa, script=script)
        b2_out, b2_err = b2.communicate(timeout=30)
        assert b2.returncode == 0, b2_err
        a_out, _ = a.communicate(input="sync 15\nshow\nquit\n", timeout=30)
        return a_out.splitlines()[0], b2_out.splitlines()[0]
    finally:
        for proc in (a, b):
            if proc.poll() is None:
                proc.kill()
                proc.communicate()


@pytest.mark.skipif(AGENT is None, reason="console script not installed")
def test_criterion_8_agent_integration(tmp_path):
    mismatched = {}
    for kind in KINDS:
        a_show, b_show = _pair_shows(kind, tmp_path)
        if a_show != b_show:
            mismatched[kind] = (a_show, b_show)
    a_show, b2_show = _kill_and_reconnect(tmp_path)
    recon = a_show == b2_show == '["y","z"]'
    ok = not mismatched and recon
    report(8, ok, "7 kinds byte-identical show; killed agent reconverged "
                  f"to {b2_show} after redial")
    assert ok, (mismatched, a_show, b2_show)


def test_criterion_9_wire_goldens():
    text = replica_type("text")
    counter = replica_type("counter")
    inc = Increment(kind="text", sender=0, prefix_len=3,
                    ops=(text.op(OpId(0, 3), "Ins", 2, "ab"),))
    golden = (b'{"v":1,"kind":"text","sender":0,"prefix_len":3,'
              b'"ops":[{"uid":{"site":0,"seq":3},"type":"Ins","k":2,"s":"ab"}]}\n')
    assert encode_message(text, inc) == golden
    assert encode_message(text, Hello(site=0, kind="text", known_len=0)) == \
        b'{"v":1,"hello":0,"kind":"text","known_len":0}\n'
    assert encode_message(text, ResyncReq()) == b'{"v":1,"resync":true}\n'
    assert encode_message(counter, Full(sender=1, ops=(counter.op(OpId(1, 2), "Incr", 3),))) == \
        b'{"v":1,"full":[{"uid":{"site":1,"seq":2},"type":"Incr","n":3}],"sender":1}\n'

    trips = 0
    for kind in KINDS:
        rt = replica_type(kind)
        sites = mesh(kind, 2)
        pending = []
        rng_ops = {"counter": ("incr", 3), "addmult": ("mult", 2), "lww": ("write", "v"),
                   "eset": ("add", "e"), "queue": ("enq", "j"), "text": ("ins", 0, "t"),
                   "socialmedia": ("upd", "p1", ("at", 2, ("incr", 1)))}
        push(pending, 0, sites[0].local_update(rng_ops[kind]))
        pending.append((0, 1, Hello(site=0, kind=rt.name, known_len=0)))
        pending.append((0, 1, ResyncReq()))
        pending.append((0, 1, Full(sender=0, ops=sites[0].history)))
        for _, _, msg in pending:
            assert decode_message(rt, encode_message(rt, msg)) == msg
            trips += 1
    report(9, True, f"4 pinned frames byte-exact, {trips} per-kind round-trips")


def test_agent_present_for_criterion_8():
    assert AGENT is not None, "ccr-agent must be installed for the acceptance gate"
