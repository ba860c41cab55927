"""Line-oriented text format for nets.

::

    # comment
    net <name>
    place <id> [capacity <int>] [init <int>] [label "<text>"]
    trans <id> [label "<text>"]
    arc <src> -> <dst> [weight <int>] [rewritable <int>]

Options may appear in any order.  Nodes may be referenced by arcs before
they are declared; endpoints are resolved once the whole file is read.
"""
from __future__ import annotations

import re
from pathlib import Path

from .net import Arc, Net, PetriError, Place, Transition

_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|->|#.*|[^\s"]+')
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


class NetSyntaxError(PetriError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _tokens(line: str):
    out = []
    pos = 0
    for m in _TOKEN.finditer(line):
        gap = line[pos:m.start()]
        if gap.strip():
            raise ValueError(pos + len(gap) - len(gap.lstrip()))
        pos = m.end()
        if m.group().startswith("#"):
            break
        out.append((m.group(), m.start() + 1))
    else:
        if line[pos:].strip():
            raise ValueError(pos)
    return out


def _unquote(tok: str) -> str:
    return re.sub(r"\\(.)", r"\1", tok[1:-1])


def parse_net(text: str) -> Net:
    name = "net"
    places: list[Place] = []
    transitions: list[Transition] = []
    arcs: list[Arc] = []
    # remember where things were declared so validation errors can point at a line
    where: dict[str, tuple[int, int]] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            toks = _tokens(line)
        except ValueError as exc:
            col = exc.args[0] + 1
            raise NetSyntaxError("unterminated string or stray quote", lineno, col) from None
        if not toks:
            continue

        def fail(msg, i=0):
            col = toks[i][1] if i < len(toks) else len(line) + 1
            raise NetSyntaxError(msg, lineno, col)

        def ident(i):
            if i >= len(toks):
                fail("missing identifier", i)
            if not _IDENT.match(toks[i][0]):
                fail(f"bad identifier {toks[i][0]!r}", i)
            return toks[i][0]

        def options(start, allowed):
            opts = {}
            i = start
            while i < len(toks):
                key = toks[i][0]
                if key not in allowed:
                    fail(f"unknown option {key!r}", i)
                if key in opts:
                    fail(f"repeated option {key!r}", i)
                if i + 1 >= len(toks):
                    fail(f"option {key!r} needs a value", i)
                raw = toks[i + 1][0]
                if allowed[key] is int:
                    if not re.fullmatch(r"\d+", raw):
                        fail(f"option {key!r} expects a non-negative integer", i + 1)
                    opts[key] = int(raw)
                else:
                    if not raw.startswith('"'):
                        fail(f"option {key!r} expects a quoted string", i + 1)
                    opts[key] = _unquote(raw)
                i += 2
            return opts

        kw = toks[0][0]
        if kw == "net":
            name = ident(1)
            if len(toks) > 2:
                fail("trailing input", 2)
        elif kw == "place":
            pid = ident(1)
            o = options(2, {"capacity": int, "init": int, "label": str})
            if pid in where:
                fail(f"duplicate id {pid!r}", 1)
            where[pid] = (lineno, toks[1][1])
            cap = o.get("capacity")
            if cap is not None and cap < 1:
                fail("capacity must be positive", 2)
            init = o.get("init", 0)
            if cap is not None and init > cap:
                fail(f"initial tokens {init} exceed capacity {cap}", 1)
            places.append(Place(pid, cap, init, o.get("label", "")))
        elif kw == "trans":
            tid = ident(1)
            o = options(2, {"label": str})
            if tid in where:
                fail(f"duplicate id {tid!r}", 1)
            where[tid] = (lineno, toks[1][1])
            transitions.append(Transition(tid, o.get("label", "")))
        elif kw == "arc":
            src = ident(1)
            if len(toks) < 3 or toks[2][0] != "->":
                fail("expected '->'", 2)
            dst = ident(3)
            o = options(4, {"weight": int, "rewritable": int})
            if o.get("weight", 1) < 1:
                fail("weight must be positive", 4)
            if "rewritable" in o and o["rewritable"] < 1:
                fail("rewrite limit must be >= 1", 4)
            where[f"{src}->{dst}"] = (lineno, toks[0][1])
            arcs.append(Arc(src, dst, o.get("weight", 1), o.get("rewritable")))
        else:
            fail(f"unknown statement {kw!r}")

    try:
        return Net(tuple(places), tuple(transitions), tuple(arcs), name)
    except PetriError as exc:
        msg = str(exc)
        m = re.match(r"arc (\S+?->\S+?):", msg) or re.match(r"duplicate arc (\S+)", msg)
        if m and m.group(1) in where:
            raise NetSyntaxError(msg, *where[m.group(1)]) from None
        raise


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_net(net: Net) -> str:
    """Serialize ``net`` back into the text format (parse_net round-trips it)."""
    lines = [f"net {net.name}"]
    for p in net.places:
        parts = ["place", p.id]
        if p.capacity is not None:
            parts += ["capacity", str(p.capacity)]
        if p.initial:
            parts += ["init", str(p.initial)]
        if p.label:
            parts += ["label", _quote(p.label)]
        lines.append(" ".join(parts))
    for t in net.transitions:
        parts = ["trans", t.id]
        if t.label:
            parts += ["label", _quote(t.label)]
        lines.append(" ".join(parts))
    for a in net.arcs:
        parts = ["arc", a.source, "->", a.target]
        if a.weight != 1:
            parts += ["weight", str(a.weight)]
        if a.rewritable:
            parts += ["rewritable", str(a.rewrite_limit)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


BUNDLED_DIR = Path(__file__).resolve().parent.parent / "nets"


def bundled_net_path(name: str) -> Path:
    """Path of a net file shipped with the package, e.g. ``"ssf.net"``."""
    path = BUNDLED_DIR / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled net named {name!r}")
    return path


def load_net(path: str | Path) -> Net:
    return parse_net(Path(path).read_text(encoding="utf-8"))
