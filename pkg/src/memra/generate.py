"""Random digraphs and circuits for property suites.

Circuits are produced as netlist text and parsed, so every generated circuit
round-trips through the public format. ``mode`` selects device families:

``passive``   strictly passive, mostly nonlinear devices (|M|, R, W, G >= 0.5)
``chua``      Chua memristors v = M(q) i, i = W(phi) v; linear R, G, C, L
``regular``   memristors with non-vanishing elastance/reluctance; linear R, G, C, L

With ``dyadic=True`` every parameter is a dyadic rational, so Jacobians
built from linear devices and Chua memristors at dyadic states are exact in
floating point.
"""

from __future__ import annotations

import numpy as np

from .graph import CONFIGURATIONS, Digraph, configuration_count, digraph_from_edges, topology
from .netlist import Circuit, DeviceClass, errors_only, format_netlist, parse_netlist, validate

C = DeviceClass
DYADIC = (0.5, 1.0, 1.5, 2.0)
DYADIC_REACTIVE = (0.5, 1.0, 2.0, 4.0)

DEFAULT_WEIGHTS = {
    C.QMEMRISTOR: 1.0, C.CAPACITOR: 1.5, C.RRESISTOR: 2.0, C.VSOURCE: 0.7,
    C.PHIMEMRISTOR: 1.0, C.INDUCTOR: 1.5, C.GRESISTOR: 2.0, C.ISOURCE: 0.7,
}


def random_connected_edges(rng, n, m):
    """Random spanning tree plus ``m - n + 1`` extra branches; no self-loops."""
    if m < n - 1:
        raise ValueError("a connected graph needs m >= n - 1")
    edges = []
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.append((u, v) if rng.random() < 0.5 else (v, u))
    while len(edges) < m:
        u, v = rng.choice(n, size=2, replace=False)
        edges.append((int(u), int(v)))
    order = rng.permutation(len(edges))
    return [edges[i] for i in order]


def random_connected_digraph(rng, n, m) -> Digraph:
    return digraph_from_edges(n, random_connected_edges(rng, n, m))


def _u(rng, lo, hi):
    return float(rng.uniform(lo, hi))


def _pick(rng, values):
    return float(values[int(rng.integers(len(values)))])


def characteristic_text(rng, cls, mode, dyadic=False) -> str:
    """Random characteristic for ``cls`` in the given family."""
    if dyadic:
        a, b = _pick(rng, DYADIC), _pick(rng, DYADIC)
        reactive = _pick(rng, DYADIC_REACTIVE)
        source = _pick(rng, (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0))
    else:
        a, b = _u(rng, 0.5, 2.0), _u(rng, 0.1, 1.0)
        reactive = _u(rng, 0.5, 2.0)
        source = _u(rng, -2.0, 2.0)
    nonlinear = mode == "passive" and not dyadic and rng.random() < 0.6
    if cls is C.VSOURCE or cls is C.ISOURCE:
        return f"dc({source!r})"
    if cls is C.CAPACITOR:
        return f'expr="q/{reactive!r} + {b!r}*q^3"' if nonlinear else f"linear(C={reactive!r})"
    if cls is C.INDUCTOR:
        return f'expr="phi/{reactive!r} + {b!r}*phi^3"' if nonlinear else f"linear(L={reactive!r})"
    if cls is C.RRESISTOR:
        return f'expr="{a!r}*i + {b!r}*i^3"' if nonlinear else f"linear(R={a!r})"
    if cls is C.GRESISTOR:
        return f'expr="{a!r}*v + {b!r}*v^3"' if nonlinear else f"linear(G={a!r})"
    qs, fs = ("q", "i") if cls is C.QMEMRISTOR else ("phi", "v")
    chua = "chua_q(M=" if cls is C.QMEMRISTOR else "chua_phi(W="
    if mode == "chua" or (mode == "passive" and not nonlinear):
        return f'{chua}"{a!r} + {b!r}*{qs}^2")'
    if mode == "regular":
        c = _pick(rng, DYADIC) if dyadic else _u(rng, 0.1, 1.0)
        if dyadic:
            return f'expr="{a!r}*{fs} + {c!r}*{qs}"'
        return f'expr="{a!r}*{fs} + {c!r}*{qs} + {b!r}*tanh({qs})"'
    if cls is C.QMEMRISTOR and rng.random() < 0.5:
        return f'chuakang_q(M="{a!r} + {b!r}*q^2 + {b!r}*i^2")'
    c = _u(rng, 0.2, 1.0)
    return f'expr="{a!r}*{fs} + {b!r}*tanh({fs}) + {c!r}*sin({qs})"'


def _class_sequence(rng, m, weights):
    classes = list(weights)
    p = np.array([weights[c] for c in classes], dtype=float)
    p /= p.sum()
    return [classes[int(i)] for i in rng.choice(len(classes), size=m, p=p)]


def random_circuit(rng, n, m, mode="passive", weights=None, dyadic=False, name="random") -> Circuit:
    """One random connected circuit; may fail validation (e.g. a leaf node)."""
    weights = DEFAULT_WEIGHTS if weights is None else weights
    edges = random_connected_edges(rng, n, m)
    classes = _class_sequence(rng, m, weights)
    counters = {}
    lines = [f".circuit {name}"]
    for (t, h), cls in zip(edges, classes):
        counters[cls] = counters.get(cls, 0) + 1
        dev_id = f"{cls.letter}{counters[cls]}"
        lines.append(f"{dev_id} {cls.token} n{t} n{h} {characteristic_text(rng, cls, mode, dyadic)}")
    return parse_netlist("\n".join(lines) + "\n")


def configuration_counts(circuit: Circuit) -> dict:
    tm = topology(circuit)
    return {name: configuration_count(tm, name) for name in CONFIGURATIONS}


def sample_circuit(rng, accept, mode="passive", weights=None, dyadic=False,
                   n_range=(2, 6), m_max=10, max_tries=10000) -> Circuit:
    """Rejection-sample a valid circuit for which ``accept(circuit, counts)`` holds."""
    for _ in range(max_tries):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(max(n, 2), max(m_max, n) + 1))
        circuit = random_circuit(rng, n, m, mode, weights, dyadic)
        if errors_only(validate(circuit)):
            continue
        if accept(circuit, configuration_counts(circuit)):
            return circuit
    raise RuntimeError("rejection sampling exhausted its budget")


# -- planting configurations --------------------------------------------------------

def extend(circuit: Circuit, lines) -> Circuit:
    return parse_netlist(format_netlist(circuit) + "\n".join(lines) + "\n")


def _fresh(circuit, prefix):
    taken = {d.id for d in circuit.devices} | set(circuit.nodes)
    k = 1
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


def _random_node(rng, circuit):
    nodes = circuit.nodes
    return nodes[int(rng.integers(len(nodes)))]


def plant_parallel(rng, circuit, cls, text, anchor_classes=()):
    """Add a ``cls`` branch parallel to a branch of ``anchor_classes`` if one
    exists, otherwise a pendant pair of ``cls`` branches.

    Returns ``(circuit, planted_id)``; the planted id names the branch that
    :func:`break_with_resistor` will split.
    """
    anchors = [d for d in circuit.devices if d.cls in anchor_classes]
    first = _fresh(circuit, "P")
    if anchors and rng.random() < 0.5:
        d = anchors[int(rng.integers(len(anchors)))]
        return extend(circuit, [f"{first} {cls.token} {d.tail} {d.head} {text}"]), first
    a, y = _random_node(rng, circuit), _fresh(circuit, "y")
    second = first + "b"
    return extend(circuit, [f"{first} {cls.token} {a} {y} {text}",
                            f"{second} {cls.token} {a} {y} {text}"]), first


def plant_series_node(rng, circuit, classes, texts):
    """New node joined to the circuit by two branches of the given classes."""
    a, b = _random_node(rng, circuit), _random_node(rng, circuit)
    x = _fresh(circuit, "x")
    p1 = _fresh(circuit, "P")
    p2 = p1 + "b"
    return extend(circuit, [f"{p1} {classes[0].token} {a} {x} {texts[0]}",
                            f"{p2} {classes[1].token} {x} {b} {texts[1]}"]), p1


def break_with_resistor(circuit: Circuit, device_id: str, resistance=1.0) -> Circuit:
    """Insert a linear resistor in series with ``device_id`` (new middle node)."""
    d = circuit.device(device_id)
    z = _fresh(circuit, "z")
    r = _fresh(circuit, "Rb")
    lines = []
    for e in circuit.devices:
        if e.id == device_id:
            lines.append(f"{e.id} {e.cls.token} {e.tail} {z} {e.characteristic.to_text()}")
        else:
            lines.append(e.to_line())
    lines.append(f"{r} RRES {z} {d.head} linear(R={float(resistance)!r})")
    return parse_netlist(f".circuit {circuit.name}\n" + "\n".join(lines) + "\n")


def add_resistor(rng, circuit: Circuit, node: str, resistance=1.0) -> Circuit:
    """Connect ``node`` to another random node through a linear resistor."""
    others = [n for n in circuit.nodes if n != node]
    other = others[int(rng.integers(len(others)))]
    r = _fresh(circuit, "Rb")
    return extend(circuit, [f"{r} RRES {node} {other} linear(R={float(resistance)!r})"])
