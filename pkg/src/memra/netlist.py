"""Netlist format, circuit types and structural validation.

Format (one statement per line, ``#`` starts a comment line)::

    .circuit <name>
    <id> <CLASS> <node+> <node-> <characteristic>

The branch is oriented from ``node+`` (tail) to ``node-`` (head); branch
current flows tail to head and the branch voltage is ``V(node+) - V(node-)``.
``CLASS`` is one of ``QMEM CAP RRES VSOURCE PHIMEM IND GRES ISOURCE``
(case-insensitive). ``characteristic`` is one of::

    expr="<expression>"        q-devices over {q, i, t}; phi-devices over {phi, v, t}
    chua_q(M="<expr in q>")    QMEM, v = M(q) i
    chuakang_q(M="<expr in q,i>")  QMEM, v = M(q, i) i
    chua_phi(W="<expr in phi>")    PHIMEM, i = W(phi) v
    linear(C=<real>)           CAP, v = q / C
    linear(R=<real>)           RRES, v = R i
    linear(L=<real>)           IND, i = phi / L
    linear(G=<real>)           GRES, i = G v
    dc(<real>)                 VSOURCE or ISOURCE, constant value
"""

from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass
from typing import Optional

from . import expr as ex
from .errors import (
    DuplicateDeviceError,
    ExpressionDomainError,
    ExpressionError,
    MalformedBuiltinError,
    NetlistSyntaxError,
    UnknownClassError,
)


class DeviceClass(enum.Enum):
    QMEMRISTOR = ("QMEM", "q", "M")
    CAPACITOR = ("CAP", "q", "C")
    RRESISTOR = ("RRES", "q", "R")
    VSOURCE = ("VSOURCE", "q", "V")
    PHIMEMRISTOR = ("PHIMEM", "phi", "W")
    INDUCTOR = ("IND", "phi", "L")
    GRESISTOR = ("GRES", "phi", "G")
    ISOURCE = ("ISOURCE", "phi", "I")

    def __init__(self, token, side, letter):
        self.token = token
        self.side = side
        self.letter = letter

    @property
    def order(self):
        return list(DeviceClass).index(self)

    @property
    def variables(self):
        return Q_VARS if self.side == "q" else PHI_VARS

    @property
    def state_var(self):
        return "q" if self.side == "q" else "phi"

    @property
    def flow_var(self):
        return "i" if self.side == "q" else "v"

    @property
    def is_dynamic(self):
        """Devices whose charge/flux is a state of the reduced model."""
        return self in DYNAMIC

    @classmethod
    def from_token(cls, token):
        for c in cls:
            if c.token == token.upper():
                return c
        raise KeyError(token)

    @classmethod
    def from_letter(cls, letter):
        for c in cls:
            if c.letter == letter:
                return c
        raise KeyError(letter)


Q_VARS = frozenset({"q", "i", "t"})
PHI_VARS = frozenset({"phi", "v", "t"})
DYNAMIC = frozenset({DeviceClass.QMEMRISTOR, DeviceClass.CAPACITOR,
                     DeviceClass.PHIMEMRISTOR, DeviceClass.INDUCTOR})

# (depends on state, depends on flow) required by each class
CLASS_DEPENDENCE = {
    DeviceClass.QMEMRISTOR: (True, True),
    DeviceClass.CAPACITOR: (True, False),
    DeviceClass.RRESISTOR: (False, True),
    DeviceClass.VSOURCE: (False, False),
    DeviceClass.PHIMEMRISTOR: (True, True),
    DeviceClass.INDUCTOR: (True, False),
    DeviceClass.GRESISTOR: (False, True),
    DeviceClass.ISOURCE: (False, False),
}

_LINEAR_KEYS = {
    "C": (DeviceClass.CAPACITOR, "q/({})"),
    "R": (DeviceClass.RRESISTOR, "({})*i"),
    "L": (DeviceClass.INDUCTOR, "phi/({})"),
    "G": (DeviceClass.GRESISTOR, "({})*v"),
}

_BUILTIN_EXPR = {
    # name: (class, parameter key, allowed vars, template)
    "chua_q": (DeviceClass.QMEMRISTOR, "M", frozenset({"q"}), "({})*i"),
    "chuakang_q": (DeviceClass.QMEMRISTOR, "M", frozenset({"q", "i"}), "({})*i"),
    "chua_phi": (DeviceClass.PHIMEMRISTOR, "W", frozenset({"phi"}), "({})*v"),
}


@dataclass(frozen=True)
class Characteristic:
    """How a characteristic was written; ``ast`` is the desugared form."""

    kind: str  # "expr", a builtin name, "linear" or "dc"
    ast: ex.ExpressionAst
    param: Optional[str] = None
    value: object = None  # parameter AST for expression builtins, float otherwise

    def to_text(self):
        if self.kind == "expr":
            return f'expr="{self.ast}"'
        if self.kind in _BUILTIN_EXPR:
            return f'{self.kind}({self.param}="{self.value}")'
        if self.kind == "linear":
            return f"linear({self.param}={self.value!r})"
        return f"dc({self.value!r})"


@dataclass(frozen=True)
class DeviceSpec:
    id: str
    cls: DeviceClass
    tail: str
    head: str
    characteristic: Characteristic

    @property
    def ast(self):
        return self.characteristic.ast

    def to_line(self):
        return f"{self.id} {self.cls.token} {self.tail} {self.head} {self.characteristic.to_text()}"


@dataclass(frozen=True)
class Circuit:
    name: str
    devices: tuple

    @property
    def nodes(self):
        seen = {}
        for d in self.devices:
            seen.setdefault(d.tail, None)
            seen.setdefault(d.head, None)
        return tuple(seen)

    @property
    def branches(self):
        """Devices in canonical order: class order, then declaration order."""
        return tuple(sorted(self.devices, key=lambda d: d.cls.order))

    def count(self, cls):
        return sum(1 for d in self.devices if d.cls is cls)

    def device(self, device_id):
        for d in self.devices:
            if d.id == device_id:
                return d
        raise KeyError(device_id)


# -- parsing ------------------------------------------------------------------

_DEVICE_RE = re.compile(r"^(\S+)\s+(\S+)\s+(\S+)\s+(\S+)\s+(\S.*)$")
_NODE_RE = re.compile(r"^[A-Za-z0-9_]+$")
_ID_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_CALL_RE = re.compile(r"^([a-z_]+)\((.*)\)$")
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")


def _number(text, line, what):
    text = text.strip()
    if not _NUMBER_RE.match(text):
        raise MalformedBuiltinError(f"{what}: expected a real number, got {text!r}", line)
    return float(text)


def _unquote(text, line, what):
    text = text.strip()
    if len(text) < 2 or text[0] != '"' or text[-1] != '"':
        raise MalformedBuiltinError(f"{what}: expected a quoted expression, got {text!r}", line)
    return text[1:-1]


def _sub_expression(text, allowed, line):
    try:
        return ex.parse_expression(text, allowed)
    except ExpressionError as err:
        raise NetlistSyntaxError(f"bad expression {text!r}: {err}", line) from None


def _parse_characteristic(text, cls, line):
    text = text.strip()
    if text.startswith("expr="):
        body = _unquote(text[len("expr="):], line, "expr")
        return Characteristic("expr", _sub_expression(body, cls.variables, line))
    m = _CALL_RE.match(text)
    if m is None:
        raise NetlistSyntaxError(f"cannot read characteristic {text!r}", line)
    name, args = m.group(1), m.group(2)
    if name == "dc":
        if cls not in (DeviceClass.VSOURCE, DeviceClass.ISOURCE):
            raise MalformedBuiltinError(f"dc() applies to sources, not {cls.token}", line)
        value = _number(args, line, "dc")
        return Characteristic("dc", _sub_expression(repr(value), cls.variables, line), value=value)
    key, sep, raw = args.partition("=")
    key = key.strip()
    if not sep:
        raise MalformedBuiltinError(f"{name}() needs a KEY=VALUE argument", line)
    if name == "linear":
        if key not in _LINEAR_KEYS:
            raise MalformedBuiltinError(f"linear() key must be one of C, R, L, G (got {key!r})", line)
        want, template = _LINEAR_KEYS[key]
        if cls is not want:
            raise MalformedBuiltinError(f"linear({key}=...) does not describe a {cls.token}", line)
        value = _number(raw, line, "linear")
        if value == 0.0 and key in ("C", "L"):
            raise MalformedBuiltinError(f"linear({key}=0) is singular", line)
        ast = _sub_expression(template.format(repr(value)), cls.variables, line)
        return Characteristic("linear", ast, param=key, value=value)
    if name in _BUILTIN_EXPR:
        want, pkey, allowed, template = _BUILTIN_EXPR[name]
        if cls is not want:
            raise MalformedBuiltinError(f"{name}() does not describe a {cls.token}", line)
        if key != pkey:
            raise MalformedBuiltinError(f"{name}() takes {pkey}=, not {key}=", line)
        param = _sub_expression(_unquote(raw, line, name), allowed, line)
        ast = _sub_expression(template.format(param), cls.variables, line)
        return Characteristic(name, ast, param=pkey, value=param)
    raise MalformedBuiltinError(f"unknown builtin {name!r}", line)


def parse_netlist(text: str) -> Circuit:
    name = "unnamed"
    devices = []
    ids = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("."):
            parts = line.split()
            if parts[0] != ".circuit" or len(parts) != 2:
                raise NetlistSyntaxError(f"bad directive {line!r}", lineno)
            name = parts[1]
            continue
        m = _DEVICE_RE.match(line)
        if m is None:
            raise NetlistSyntaxError("expected '<id> <CLASS> <node+> <node-> <characteristic>'", lineno)
        dev_id, token, tail, head, char_text = m.groups()
        if not _ID_RE.match(dev_id):
            raise NetlistSyntaxError(f"bad device id {dev_id!r}", lineno)
        for node in (tail, head):
            if not _NODE_RE.match(node):
                raise NetlistSyntaxError(f"bad node name {node!r}", lineno)
        try:
            cls = DeviceClass.from_token(token)
        except KeyError:
            raise UnknownClassError(f"unknown device class {token!r}", lineno) from None
        if dev_id in ids:
            raise DuplicateDeviceError(f"duplicate device id {dev_id!r}", lineno)
        ids.add(dev_id)
        devices.append(DeviceSpec(dev_id, cls, tail, head, _parse_characteristic(char_text, cls, lineno)))
    return Circuit(name, tuple(devices))


def format_netlist(circuit: Circuit) -> str:
    lines = [f".circuit {circuit.name}"]
    lines += [d.to_line() for d in circuit.devices]
    return "\n".join(lines) + "\n"


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error", "warning" or "info"
    code: str
    message: str
    device: Optional[str] = None

    def __str__(self):
        where = f"{self.device}: " if self.device else ""
        return f"{self.severity}[{self.code}] {where}{self.message}"


PROBES = 3
_PROBE_SEED = 20100517


def _probe_points(variables, seed):
    rng = random.Random(seed)
    return [{v: rng.uniform(-2.0, 2.0) for v in sorted(variables)} for _ in range(PROBES)]


def depends_on(ast, var, seed=_PROBE_SEED):
    """Decide whether ``ast`` depends on ``var`` not identically.

    Returns ``(depends, note)``; ``note`` is set when ``var`` occurs in the tree
    but the derivative vanished at every probe point.
    """
    if var not in ast.free_variables():
        return False, None
    evaluated = 0
    for point in _probe_points(ast.variables, seed):
        try:
            d = ex.partial(ast, var, point)
        except ExpressionDomainError:
            continue
        evaluated += 1
        if d != 0.0:
            return True, None
    if evaluated == 0:
        return True, f"could not evaluate d/d{var} at any probe point"
    return False, f"{var} occurs but d/d{var} vanished at {PROBES} probe points; treated as identically zero"


def validate(circuit: Circuit) -> list:
    """Structural checks; returns diagnostics (empty when nothing to report)."""
    diags = []
    for d in circuit.devices:
        want_state, want_flow = CLASS_DEPENDENCE[d.cls]
        for var, want in ((d.cls.state_var, want_state), (d.cls.flow_var, want_flow)):
            has, note = depends_on(d.ast, var)
            if note:
                diags.append(Diagnostic("warning", "probe", note, d.id))
            if has != want:
                rel = "≢ 0" if has else "≡ 0"
                diags.append(Diagnostic(
                    "error", "class",
                    f"d eta/d {var} {rel} contradicts class {d.cls.token}", d.id))
        if d.tail == d.head:
            diags.append(Diagnostic("error", "self-loop",
                                    f"branch starts and ends at node {d.tail} (degenerate loop)", d.id))

    degree = {}
    for d in circuit.devices:
        degree[d.tail] = degree.get(d.tail, 0) + 1
        degree[d.head] = degree.get(d.head, 0) + 1
    for node, deg in degree.items():
        if deg < 2:
            owner = next(d.id for d in circuit.devices if node in (d.tail, d.head))
            diags.append(Diagnostic("error", "dangling", f"node {node} has a single branch endpoint", owner))

    k = _component_count(circuit)
    if k > 1:
        diags.append(Diagnostic("info", "components", f"circuit has {k} connected components"))
    return diags


def errors_only(diagnostics):
    return [d for d in diagnostics if d.severity == "error"]


def _component_count(circuit):
    parent = {n: n for n in circuit.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for d in circuit.devices:
        parent[find(d.tail)] = find(d.head)
    return len({find(n) for n in circuit.nodes})


def is_time_invariant(circuit: Circuit) -> bool:
    return not any("t" in d.ast.free_variables() for d in circuit.devices)
