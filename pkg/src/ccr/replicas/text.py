"""Collaborative text: Ins(k, s) and Del(k, n) over a plain string.

Transformation rules, for concurrent a and b on the same state:

  Ins/Ins   strictly smaller position goes first and is unchanged; the later
            insert shifts right by the earlier payload's length.  Equal
            positions tie-break on the smaller uid (site id first), so both
            sides agree without communicating.
  Ins/Del   insert at or before the deleted range slides the range right;
            insert at or past its end shifts left by the deleted length;
            insert strictly inside survives at the range start, and the
            delete splits around the inserted payload into two fragments.
            Splitting instead of swallowing is what preserves concurrent
            content: nobody's text vanishes because someone else deleted
            around it.
  Del/Del   each side keeps the part of its range the other didn't already
            delete.  The leftover is contiguous once the other range is gone,
            shifted left by however much of the other range sat before it.
            An empty leftover cancels to the identity.

Split fragments keep the parent op's uid: they are the same logical edit in
two pieces, applied back to back.
"""

from __future__ import annotations

from ..core import ApplyError, IntentError, WireError
from .base import ReplicaType


class TextType(ReplicaType):
    name = "text"

    def initial(self):
        return ""

    def apply(self, state, op):
        tag = op.body[0]
        if tag == "Ins":
            _, k, s = op.body
            if not (0 <= k <= len(state)):
                raise ApplyError(f"insert position {k} out of range 0..{len(state)}")
            return state[:k] + s + state[k:]
        if tag == "Del":
            _, k, n = op.body
            if n < 1 or k < 0 or k + n > len(state):
                raise ApplyError(f"delete range [{k},{k + n}) out of range 0..{len(state)}")
            return state[:k] + state[k + n:]
        raise ApplyError(f"unknown text op {tag!r}")

    def transform_prim(self, state, a, b):
        ta, tb = a.body[0], b.body[0]
        if ta == "Ins" and tb == "Ins":
            return self._ins_ins(a, b)
        if ta == "Ins" and tb == "Del":
            return self._ins_del(a, b)
        if ta == "Del" and tb == "Ins":
            bb, aa = self._ins_del(b, a)
            return aa, bb
        return self._del_del(a, b)

    def _ins_ins(self, a, b):
        _, k1, s1 = a.body
        _, k2, s2 = b.body
        if (k1, a.uid) < (k2, b.uid):
            return (a,), (self.op(b.uid, "Ins", k2 + len(s1), s2),)
        return (self.op(a.uid, "Ins", k1 + len(s2), s1),), (b,)

    def _ins_del(self, a, b):
        _, k1, s = a.body
        _, k2, n = b.body
        if k1 <= k2:
            return (a,), (self.op(b.uid, "Del", k2 + len(s), n),)
        if k1 >= k2 + n:
            return (self.op(a.uid, "Ins", k1 - n, s),), (b,)
        # Insert lands strictly inside the deleted range: it survives at the
        # range start; the delete splits around it, second fragment addressed
        # after the first has been applied.
        left = self.op(b.uid, "Del", k2, k1 - k2)
        right = self.op(b.uid, "Del", k2 + len(s), k2 + n - k1)
        return (self.op(a.uid, "Ins", k2, s),), (left, right)

    def _del_del(self, a, b):
        _, k1, n1 = a.body
        _, k2, n2 = b.body
        a2 = self._residual(a.uid, k1, n1, k2, n2)
        b2 = self._residual(b.uid, k2, n2, k1, n1)
        return a2, b2

    def _residual(self, uid, k1, n1, k2, n2):
        # What remains of [k1, k1+n1) once [k2, k2+n2) is already gone.
        cut = max(0, min(k1 + n1, k2 + n2) - max(k1, k2))
        length = n1 - cut
        if length == 0:
            return ()
        before = max(0, min(k1, k2 + n2) - k2)
        return (self.op(uid, "Del", k1 - before, length),)

    def gen_effective(self, state, intent, uid):
        verb = intent[0]
        if verb == "ins":
            _, k, s = intent
            if not isinstance(k, int) or not isinstance(s, str):
                raise IntentError("usage: ins <pos> <text>")
            if not (0 <= k <= len(state)):
                raise IntentError(f"insert position {k} out of range 0..{len(state)}")
            if s == "":
                return None
            return self.op(uid, "Ins", k, s)
        if verb == "del":
            _, k, n = intent
            if not isinstance(k, int) or not isinstance(n, int):
                raise IntentError("usage: del <pos> <count>")
            if n == 0:
                return None
            if n < 0 or k < 0 or k + n > len(state):
                raise IntentError(f"delete range [{k},{k + n}) out of range 0..{len(state)}")
            return self.op(uid, "Del", k, n)
        raise IntentError(f"text has no intent {verb!r}")

    def digest_value(self, state):
        return state

    def encode_body(self, body):
        if body[0] == "Ins":
            return {"type": "Ins", "k": body[1], "s": body[2]}
        return {"type": "Del", "k": body[1], "n": body[2]}

    def decode_body(self, obj):
        tag = obj.get("type")
        if tag == "Ins":
            if not isinstance(obj.get("k"), int) or not isinstance(obj.get("s"), str):
                raise WireError(f"bad text op: {obj!r}")
            return ("Ins", obj["k"], obj["s"])
        if tag == "Del":
            if not isinstance(obj.get("k"), int) or not isinstance(obj.get("n"), int):
                raise WireError(f"bad text op: {obj!r}")
            return ("Del", obj["k"], obj["n"])
        raise WireError(f"bad text op: {obj!r}")
