import numpy as np
import pytest

import oracles
from memra.errors import InvalidCircuitError, NonConvergenceError, SingularJacobianError, UnsupportedAnalysisError
from memra.generate import sample_circuit
from memra.model import assemble, find_equilibrium, jacobian_K
from memra.netlist import parse_netlist

VRC = parse_netlist("V1 VSOURCE a 0 dc(1)\nR1 RRES a b linear(R=1)\nC1 CAP b 0 linear(C=1)\n")
MC = parse_netlist('M1 QMEM a 0 chua_q(M="1+q^2")\nC1 CAP a 0 linear(C=1)\n')


def test_dimension_rc_loop():
    m = assemble(parse_netlist("R1 RRES a b linear(R=1)\nC1 CAP b a linear(C=1)\n"))
    assert m.dim == 1 + 2 + 1 + 1


def test_dimension_series_vrc():
    m = assemble(VRC)
    assert m.dim == 7
    assert m.tm.B.shape[0] == 1 and m.tm.D.shape[0] == 2


def test_pure_phi_circuit():
    m = assemble(parse_netlist("I1 ISOURCE a b dc(1)\nL1 IND a b linear(L=1)\n"))
    lay = m.layout
    assert lay.n_q == 0 and lay.n_mc == 0
    assert lay.n_wl == 1 and lay.n_phi == 2
    assert m.rows["c"] == slice(1, 1)


def test_dimension_formula_random():
    rng = np.random.default_rng(3)
    for _ in range(30):
        c = sample_circuit(rng, lambda c, counts: True)
        m = assemble(c)
        lay = m.layout
        g = m.tm.graph
        assert m.dim == lay.n_mc + lay.n_wl + lay.n_q + lay.n_phi + (g.m - g.n + g.k) + (g.n - g.k)
        assert m.rhs(np.zeros(m.dim)).shape == (m.dim,)


def test_decoupled_variables_absent():
    c = parse_netlist("V1 VSOURCE a 0 dc(1)\nR1 RRES a b linear(R=1)\nC1 CAP b 0 linear(C=1)\n"
                      "G1 GRES b 0 linear(G=1)\nI1 ISOURCE a b dc(1)\nL1 IND a 0 linear(L=1)\n")
    names = assemble(c).names()
    assert [n for n in names if n.split(":")[0] in ("q", "phi")] == ["q:C1", "phi:L1"]


def test_zero_residual_at_hand_solution():
    m = assemble(VRC)
    x = m.zeros().values.copy()
    x[m.state_index("C1")] = 1.0
    names = m.names()
    x[names.index("v:C1")] = 1.0
    x[names.index("v:V1")] = 1.0
    r = m.residual(x, np.zeros(1))
    assert np.abs(r).max() <= 1e-12
    # row (c) is linear in v_q with unit coefficient
    k = names.index("v:R1")
    x[k] += 0.125
    r2 = m.residual(x, np.zeros(1))
    delta = r2 - r
    row = m.rows["c"].start + [d.id for d in m.q_devices].index("R1")
    assert delta[row] == 0.125
    assert np.count_nonzero(delta[m.rows["c"]]) == 1


def test_residual_derivative_rows():
    m = assemble(VRC)
    x = np.zeros(m.dim)
    x[m.names().index("i:C1")] = 2.0
    r = m.residual(x, np.array([0.5]))
    assert r[0] == 0.5 - 2.0


def test_vrc_equilibrium():
    m = assemble(VRC)
    eq = find_equilibrium(m)
    s = dict(zip(m.names(), eq.x.values))
    assert s["q:C1"] == pytest.approx(1.0, abs=1e-10)
    assert s["v:C1"] == pytest.approx(1.0, abs=1e-10)
    assert all(abs(s[f"i:{d}"]) < 1e-10 for d in ("V1", "R1", "C1"))
    assert eq.residual_norm <= 1e-10


def test_chua_mc_equilibrium_keeps_guess():
    m = assemble(MC)
    eq = find_equilibrium(m, {"M1": 0.3})
    s = dict(zip(m.names(), eq.x.values))
    assert s["q:M1"] == 0.3
    assert all(v == 0.0 for k, v in s.items() if k != "q:M1")


def test_parallel_sources_singular():
    m = assemble(parse_netlist("V1 VSOURCE a 0 dc(1)\nV2 VSOURCE a 0 dc(2)\n"))
    with pytest.raises(SingularJacobianError) as info:
        find_equilibrium(m)
    assert info.value.corank >= 1
    assert isinstance(info.value, NonConvergenceError)


def test_invalid_circuit_rejected():
    with pytest.raises(InvalidCircuitError):
        assemble(parse_netlist('C1 CAP a b expr="q+i"\nR1 RRES a b linear(R=1)\n'))


def test_time_varying_rejected_for_equilibrium():
    m = assemble(parse_netlist('V1 VSOURCE a 0 expr="sin(t)"\nR1 RRES a 0 linear(R=1)\n'))
    with pytest.raises(UnsupportedAnalysisError):
        find_equilibrium(m)
    with pytest.raises(UnsupportedAnalysisError):
        jacobian_K(m, m.zeros())


def test_jacobian_K_rc_loop():
    m = assemble(parse_netlist("V1 VSOURCE a 0 dc(0)\nR1 RRES a b linear(R=1)\nC1 CAP b 0 linear(C=1)\n"))
    K, H = jacobian_K(m, find_equilibrium(m))
    assert K.shape == (7, 7)
    assert np.array_equal(H, np.diag([1.0] + [0.0] * 6))


def test_chua_E_m_block_vanishes_in_K():
    m = assemble(MC)
    eq = find_equilibrium(m, {"M1": 0.7})
    K, _ = jacobian_K(m, eq)
    lay = m.layout
    row_c = m.rows["c"].start  # characteristic row of M1
    assert K[row_c, lay.q_mc.start] == 0.0
    assert K[row_c + 1, lay.q_mc.start + 1] == -1.0


def test_sources_only_circuit():
    m = assemble(parse_netlist("V1 VSOURCE a 0 dc(1)\nI1 ISOURCE a 0 dc(1)\n"))
    assert m.layout.n_diff == 0
    K, H = jacobian_K(m, find_equilibrium(m))
    assert K.shape == (4, 4) and not H.any()


def _affine_equilibrium_exists(m, guess):
    """Chua memristors plus linear devices: with memristor states pinned the
    equilibrium rows are affine in the remaining unknowns."""
    lay = m.layout
    x0 = np.zeros(m.dim)
    for dev, value in guess.items():
        x0[m.state_index(dev)] = value
    fixed = np.zeros(m.dim, dtype=bool)
    fixed[lay.i_q.start: lay.i_q.start + lay.n_mc] = True
    fixed[lay.v_phi.start: lay.v_phi.start + lay.n_wl] = True
    for dev in guess:
        fixed[m.state_index(dev)] = True
    rows = m.alg_rows
    b = m.rhs(x0)[rows]
    A = oracles.fd_jacobian(lambda z: m.rhs(_embed(z, fixed, x0))[rows], x0[~fixed])
    z, *_ = np.linalg.lstsq(A, -b, rcond=None)
    return np.abs(A @ z + b).max() <= 1e-8


def _embed(z, fixed, x0):
    x = x0.copy()
    x[~fixed] = z
    return x


def test_equilibrium_found_exactly_when_one_exists():
    rng = np.random.default_rng(9)
    found = 0
    for _ in range(40):
        c = sample_circuit(rng, lambda c, k: not k["V-loop"] and not k["I-cutset"], mode="chua")
        m = assemble(c)
        guess = {d.id: float(rng.uniform(-1, 1)) for d in c.devices if d.cls.letter in "MW"}
        exists = _affine_equilibrium_exists(m, guess)
        try:
            eq = find_equilibrium(m, guess)
        except NonConvergenceError:
            assert not exists
            continue
        assert exists
        found += 1
        assert not eq.x.i_mc.any() and not eq.x.v_wl.any()
        assert np.abs(m.residual(eq.x, np.zeros(m.layout.n_diff))).max() <= 1e-10
    assert found >= 20


def test_jacobian_matches_finite_difference():
    rng = np.random.default_rng(12)
    for _ in range(25):
        c = sample_circuit(rng, lambda c, k: True, mode="passive")
        m = assemble(c)
        x = rng.uniform(-1, 1, size=m.dim)
        fd = oracles.fd_jacobian(lambda z: m.rhs(z), x)
        assert oracles.max_relative_error(m.jacobian(x), fd) <= 1e-6
