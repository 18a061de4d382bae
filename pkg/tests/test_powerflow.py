import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnpflow.errors import DimensionMismatch, NotConverged, SingularJacobian
from qnpflow.grid import AdmittanceMatrix, BusKind, BusRecord, NetworkModel, PerUnitBase
from qnpflow.powerflow import (
    SolveOptions,
    StateVector,
    calc_injections,
    gauss_seidel_oracle,
    initial_state,
    jacobian,
    mismatch,
    nr_step,
    solve,
)


def rectangular_injections(state, net):
    """Independent oracle: S_i = V_i (Y V)_i* in rectangular complex form."""
    v = state.v_mag * np.exp(1j * state.delta)
    s = v * np.conj(net.ybus.entries @ v)
    return s.real, s.imag


def make_net(buses, ybus, s_base=100.0):
    return NetworkModel(buses=tuple(buses), ybus=AdmittanceMatrix(np.array(ybus, dtype=complex)),
                        base=PerUnitBase(s_base=s_base))


def slack(i, v=1.0):
    return BusRecord(id=i, kind=BusKind.SLACK, p_load=0.0, q_load=0.0, v_mag=v, v_angle=0.0)


def pq(i, p=0.0, q=0.0):
    return BusRecord(id=i, kind=BusKind.PQ, p_load=p, q_load=q, v_mag=1.0, v_angle=0.0,
                     p_gen=0.0, q_gen=0.0)


@pytest.fixture()
def two_bus():
    y = 4.0 - 8.0j
    return make_net([slack(1), pq(2, p=50.0, q=20.0)], [[y, -y], [-y, y]])


def random_state(net, rng):
    delta = np.zeros(net.n)
    v = np.array([b.v_mag for b in net.buses])
    delta[list(net.non_slack_indices)] = rng.uniform(-0.3, 0.3, len(net.non_slack_indices))
    v[list(net.pq_indices)] = rng.uniform(0.9, 1.1, len(net.pq_indices))
    return StateVector(delta=delta, v_mag=v)


# ------------------------------------------------------------ injections

def test_flat_start_matches_rectangular_oracle(base_net):
    state = initial_state(base_net)
    p, q = calc_injections(state, base_net)
    p_ref, q_ref = rectangular_injections(state, base_net)
    assert np.allclose(p, p_ref, atol=1e-10)
    assert np.allclose(q, q_ref, atol=1e-10)


def test_random_states_match_rectangular_oracle(base_net):
    rng = np.random.default_rng(11)
    for _ in range(50):
        state = random_state(base_net, rng)
        p, q = calc_injections(state, base_net)
        p_ref, q_ref = rectangular_injections(state, base_net)
        assert np.allclose(p, p_ref, atol=1e-10)
        assert np.allclose(q, q_ref, atol=1e-10)


def test_diagonal_ybus_injections():
    net = make_net([slack(1), pq(2)], [[4.0 - 8.0j, 0], [0, 3.0 - 6.0j]])
    state = StateVector(delta=np.array([0.0, 0.7]), v_mag=np.array([1.0, 1.0]))
    p, q = calc_injections(state, net)
    assert p == pytest.approx([4.0, 3.0])
    assert q == pytest.approx([8.0, 6.0])


def test_zero_ybus_injections(base_net):
    net = make_net(list(base_net.buses), np.zeros((4, 4)))
    p, q = calc_injections(initial_state(net), net)
    assert np.all(p == 0) and np.all(q == 0)


def test_injections_dimension_mismatch(base_net):
    bad = StateVector(delta=np.zeros(3), v_mag=np.ones(3))
    with pytest.raises(DimensionMismatch):
        calc_injections(bad, base_net)


# ------------------------------------------------------------ mismatch

def test_mismatch_order_and_value_at_flat(base_net):
    state = initial_state(base_net)
    m = mismatch(state, base_net)
    assert m.dp.shape == (3,) and m.dq.shape == (2,)
    assert m.stacked.shape == (5,)
    p_ref, q_ref = rectangular_injections(state, base_net)
    sched_p = np.array([-1.70, -2.00, 2.38])
    sched_q = np.array([-1.0535, -1.2394])
    assert m.dp == pytest.approx(sched_p - p_ref[1:], abs=1e-12)
    assert m.dq == pytest.approx(sched_q - q_ref[1:3], abs=1e-12)


def test_mismatch_zero_at_solution(base_net):
    sol = solve(base_net)
    state = StateVector(delta=sol.delta, v_mag=sol.v_mag)
    assert mismatch(state, base_net).inf_norm < 1e-8


def test_mismatch_zero_injection_network():
    y = 2.0 - 4.0j
    net = make_net([slack(1), pq(2)], [[y, -y], [-y, y]])
    m = mismatch(initial_state(net), net)
    assert np.all(m.stacked == pytest.approx(0.0, abs=1e-15))


# ------------------------------------------------------------ jacobian

def fd_jacobian(state, net, h=1e-6):
    """Central finite differences of the stacked mismatch; the |V| block uses
    a multiplicative perturbation to match the |V| d/d|V| scaling."""
    ns, pqi = list(net.non_slack_indices), list(net.pq_indices)
    cols = []
    for j in ns:
        dplus, dminus = state.delta.copy(), state.delta.copy()
        dplus[j] += h
        dminus[j] -= h
        fp = mismatch(StateVector(dplus, state.v_mag.copy()), net).stacked
        fm = mismatch(StateVector(dminus, state.v_mag.copy()), net).stacked
        cols.append((fp - fm) / (2 * h))
    for j in pqi:
        vplus, vminus = state.v_mag.copy(), state.v_mag.copy()
        vplus[j] *= 1 + h
        vminus[j] *= 1 - h
        fp = mismatch(StateVector(state.delta.copy(), vplus), net).stacked
        fm = mismatch(StateVector(state.delta.copy(), vminus), net).stacked
        cols.append((fp - fm) / (2 * h))
    return np.column_stack(cols)


def max_rel_error(j, fd):
    floor = 1e-3 * np.abs(fd).max()
    return (np.abs(j - fd) / np.maximum(np.abs(fd), floor)).max()


def test_jacobian_matches_fd_at_flat(base_net):
    state = initial_state(base_net)
    assert max_rel_error(jacobian(state, base_net).assembled, fd_jacobian(state, base_net)) < 1e-5


def test_jacobian_matches_fd_random_states(base_net):
    rng = np.random.default_rng(23)
    for _ in range(20):
        state = random_state(base_net, rng)
        j = jacobian(state, base_net).assembled
        assert max_rel_error(j, fd_jacobian(state, base_net)) < 1e-5


def test_two_bus_hand_derived_jacobian(two_bus):
    # closed form at delta2=-0.05, v2=0.95 with line y=4-8j:
    #   dP2/dd2   =  v |Y21| sin(Th21 - d2)
    #   v dP2/dv2 =  v (2 v G22 + |Y21| cos(Th21 - d2))
    #   dQ2/dd2   =  v |Y21| cos(Th21 - d2)
    #   v dQ2/dv2 =  v (-2 v B22 - |Y21| sin(Th21 - d2))
    # and the mismatch Jacobian is the negation of each.
    state = StateVector(delta=np.array([0.0, -0.05]), v_mag=np.array([1.0, 0.95]))
    j = jacobian(state, two_bus)
    assert j.j11[0, 0] == pytest.approx(-7.400581135773167, rel=1e-12)
    assert j.j12[0, 0] == pytest.approx(-3.044907324041974, rel=1e-12)
    assert j.j21[0, 0] == pytest.approx(4.175092675958026, rel=1e-12)
    assert j.j22[0, 0] == pytest.approx(-7.039418864226832, rel=1e-12)


def test_diagonal_ybus_kills_angle_blocks():
    net = make_net([slack(1), pq(2), pq(3)],
                   np.diag([4.0 - 8.0j, 3.0 - 6.0j, 2.0 - 4.0j]))
    state = StateVector(delta=np.array([0.0, 0.3, -0.2]),
                        v_mag=np.array([1.0, 0.97, 1.03]))
    j = jacobian(state, net)
    assert np.all(j.j11 == 0)
    assert np.all(j.j21 == 0)


# ------------------------------------------------------------ nr_step

def test_nr_step_fixed_point(base_net):
    sol = solve(base_net, SolveOptions(tol=1e-12, max_iter=20))
    state = StateVector(delta=sol.delta.copy(), v_mag=sol.v_mag.copy())
    new_state, _ = nr_step(state, base_net)
    assert np.abs(new_state.delta - state.delta).max() < 1e-9
    assert np.abs(new_state.v_mag - state.v_mag).max() < 1e-9


def test_nr_step_reduces_mismatch(base_net):
    state = initial_state(base_net)
    norm0 = mismatch(state, base_net).inf_norm
    new_state, reported = nr_step(state, base_net)
    assert reported == pytest.approx(norm0)
    assert mismatch(new_state, base_net).inf_norm < norm0


def test_singular_jacobian():
    net = make_net([slack(1), pq(2)], np.zeros((2, 2)))
    with pytest.raises(SingularJacobian):
        nr_step(initial_state(net), net)


# ------------------------------------------------------------ solve

def test_base_case_converges(base_net):
    sol = solve(base_net, SolveOptions(tol=1e-8, max_iter=20))
    assert sol.converged
    assert sol.iterations <= 5
    assert sol.mismatch_history[-1] < 1e-8


def test_base_case_against_gauss_seidel(base_net):
    nr = solve(base_net, SolveOptions(tol=1e-8, max_iter=20))
    gs = gauss_seidel_oracle(base_net, tol=1e-12, max_iter=10000)
    assert gs.converged
    assert np.abs(nr.v_mag - gs.v_mag).max() < 1e-6
    assert np.abs(nr.delta - gs.delta).max() < 1e-6


def test_zero_injection_network_flat_solution():
    y = 2.0 - 4.0j
    net = make_net([slack(1), pq(2)], [[y, -y], [-y, y]])
    sol = solve(net)
    assert sol.converged
    assert sol.iterations <= 1
    assert sol.v_mag == pytest.approx([1.0, 1.0])
    assert sol.delta == pytest.approx([0.0, 0.0])


def test_not_converged_carries_history(base_net):
    with pytest.raises(NotConverged) as err:
        solve(base_net, SolveOptions(tol=1e-12, max_iter=1))
    assert len(err.value.history) == 1


def test_quadratic_convergence(base_net):
    sol = solve(base_net, SolveOptions(tol=1e-8, max_iter=20))
    norms = [mismatch(initial_state(base_net), base_net).inf_norm, *sol.mismatch_history]
    for prev, nxt in zip(norms, norms[1:]):
        if prev < 1e-2:
            assert nxt < 10 * prev * prev


def test_power_balance_nonnegative_loss(base_net):
    sol = solve(base_net)
    loss = sol.p_calc.sum()
    assert 0.0 <= loss < 0.1


def test_converged_flags_and_injections(base_net):
    sol = solve(base_net)
    state = StateVector(delta=sol.delta, v_mag=sol.v_mag)
    p_ref, q_ref = rectangular_injections(state, base_net)
    assert sol.p_calc == pytest.approx(p_ref, abs=1e-12)
    assert sol.q_calc == pytest.approx(q_ref, abs=1e-12)
    assert sol.v_mag[3] == pytest.approx(1.02)  # PV setpoint held
    assert sol.delta[0] == 0.0


# ------------------------------------------------------------ oracle equivalence

def test_gauss_seidel_zero_injection_network():
    y = 2.0 - 4.0j
    net = make_net([slack(1), pq(2)], [[y, -y], [-y, y]])
    sol = gauss_seidel_oracle(net)
    assert sol.converged
    assert sol.v_mag == pytest.approx([1.0, 1.0])


def test_oracles_agree_on_perturbed_loads(base_net):
    rng = np.random.default_rng(7)
    for _ in range(15):
        buses = []
        for b in base_net.buses:
            if b.kind is BusKind.PQ:
                b = replace(b, p_load=b.p_load * rng.uniform(0.8, 1.2),
                            q_load=b.q_load * rng.uniform(0.8, 1.2))
            buses.append(b)
        net = NetworkModel(buses=tuple(buses), ybus=base_net.ybus, base=base_net.base)
        nr = solve(net, SolveOptions(tol=1e-10, max_iter=20))
        gs = gauss_seidel_oracle(net, tol=1e-12, max_iter=10000)
        assert np.abs(nr.v_mag - gs.v_mag).max() < 1e-6
        assert np.abs(nr.delta - gs.delta).max() < 1e-6


# ------------------------------------------------------------ options

@given(st.floats(min_value=1e-12, max_value=1e-2), st.integers(min_value=1, max_value=50))
@settings(max_examples=25, deadline=None)
def test_solve_options_accept_valid(tol, max_iter):
    SolveOptions(tol=tol, max_iter=max_iter)


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"tol": -1e-8}, {"max_iter": 0}])
def test_solve_options_reject_invalid(kwargs):
    from qnpflow.errors import ValidationError

    with pytest.raises(ValidationError):
        SolveOptions(**kwargs)
