import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from oracles import dense_run, dense_z
from quantum.statevector import (
    GateOp, QuantumState, apply_cz, apply_ry, expectation_z, expectation_z_all,
    product_state, run_circuit, run_circuit_batch,
)
from utils.errors import ParameterBindingError, QubitIndexError, ValidationError

angles = st.floats(min_value=-2 * np.pi, max_value=2 * np.pi, allow_nan=False)


def random_state(n_qubits, seed):
    gen = np.random.default_rng(seed)
    amps = gen.normal(size=1 << n_qubits) + 1j * gen.normal(size=1 << n_qubits)
    return QuantumState(n_qubits, amps / np.linalg.norm(amps))


@st.composite
def circuits(draw, max_qubits=4, max_gates=20):
    n = draw(st.integers(min_value=1, max_value=max_qubits))
    n_gates = draw(st.integers(min_value=0, max_value=max_gates))
    ops, n_params = [], 0
    for _ in range(n_gates):
        if n >= 2 and draw(st.booleans()):
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            ops.append(GateOp.cz(a, b))
        else:
            ops.append(GateOp.ry(draw(st.integers(0, n - 1)), n_params))
            n_params += 1
    params = draw(st.lists(angles, min_size=n_params, max_size=n_params))
    return n, ops, params


def test_ry_zero_angle_is_identity():
    state = apply_ry(QuantumState.zero(1), 0, 0.0)
    np.testing.assert_allclose(state.amplitudes, [1.0, 0.0], atol=1e-12)


def test_ry_half_turn_maps_zero_to_one():
    state = apply_ry(QuantumState.zero(1), 0, np.pi)
    np.testing.assert_allclose(state.amplitudes, [0.0, 1.0], atol=1e-12)


def test_ry_quarter_turn_gives_equal_superposition():
    state = apply_ry(QuantumState.zero(1), 0, np.pi / 2)
    np.testing.assert_allclose(state.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)


def test_ry_rejects_out_of_range_qubit():
    with pytest.raises(QubitIndexError):
        apply_ry(QuantumState.zero(2), 2, 0.1)
    with pytest.raises(IndexError):
        apply_ry(QuantumState.zero(2), -1, 0.1)


def test_cz_negates_both_ones():
    state = apply_cz(QuantumState.basis(2, 0b11), 0, 1)
    np.testing.assert_allclose(state.amplitudes, [0, 0, 0, -1], atol=0)


def test_cz_leaves_single_one_unchanged():
    state = apply_cz(QuantumState.basis(2, 0b01), 0, 1)
    np.testing.assert_array_equal(state.amplitudes, QuantumState.basis(2, 0b01).amplitudes)


@pytest.mark.parametrize("a,b", [(0, 0), (0, 3), (5, 1)])
def test_cz_rejects_bad_indices(a, b):
    with pytest.raises(QubitIndexError):
        apply_cz(QuantumState.zero(3), a, b)


@given(st.integers(0, 10_000), st.integers(2, 5))
def test_cz_is_an_involution(seed, n):
    state = random_state(n, seed)
    twice = apply_cz(apply_cz(state, 0, n - 1), 0, n - 1)
    np.testing.assert_allclose(twice.amplitudes, state.amplitudes, atol=1e-12)


def test_cz_is_symmetric():
    state = random_state(3, 1)
    np.testing.assert_array_equal(apply_cz(state, 0, 2).amplitudes, apply_cz(state, 2, 0).amplitudes)


def test_gates_do_not_mutate_input():
    state = random_state(3, 2)
    before = state.amplitudes.copy()
    apply_ry(state, 1, 0.7)
    apply_cz(state, 1, 2)
    np.testing.assert_array_equal(state.amplitudes, before)


def test_expectation_z_of_zero_state():
    assert expectation_z(QuantumState.zero(1), 0) == 1.0


@pytest.mark.parametrize("theta", [0.3, 1.1, 2.7])
def test_expectation_z_after_ry_is_cosine(theta):
    value = expectation_z(apply_ry(QuantumState.zero(1), 0, theta), 0)
    assert value == pytest.approx(np.cos(theta), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_qubit_index_convention(n):
    for q in range(n):
        state = apply_ry(QuantumState.zero(n), q, np.pi)
        assert expectation_z(state, q) == pytest.approx(-1.0, abs=1e-12)
        assert np.argmax(np.abs(state.amplitudes)) == 1 << q


def test_expectation_z_rejects_out_of_range_qubit():
    with pytest.raises(QubitIndexError):
        expectation_z(QuantumState.zero(2), 2)


def test_expectation_z_on_random_three_qubit_circuit_matches_dense_oracle():
    gen = np.random.default_rng(11)
    ops = [GateOp.ry(0, 0), GateOp.ry(1, 1), GateOp.cz(0, 1), GateOp.ry(2, 2), GateOp.cz(1, 2),
           GateOp.ry(0, 3), GateOp.cz(2, 0), GateOp.ry(1, 4)]
    params = gen.uniform(-np.pi, np.pi, size=5)
    state = run_circuit(3, ops, params)
    expected = dense_z(dense_run(3, ops, params), 3)
    for q in range(3):
        assert expectation_z(state, q) == pytest.approx(expected[q], abs=1e-10)


def test_empty_circuit_is_zero_state():
    np.testing.assert_array_equal(run_circuit(1, [], []).amplitudes, [1.0, 0.0])


def test_single_half_turn_is_little_endian():
    state = run_circuit(2, [GateOp.ry(0, 0)], [np.pi])
    np.testing.assert_allclose(np.abs(state.amplitudes), [0, 1, 0, 0], atol=1e-12)


def test_dangling_angle_slot_is_a_binding_error():
    with pytest.raises(ParameterBindingError):
        run_circuit(2, [GateOp.ry(0, 0), GateOp.ry(1, 1)], [0.5])


def test_circuit_with_out_of_range_qubit_is_rejected():
    with pytest.raises(QubitIndexError):
        run_circuit(2, [GateOp.ry(2, 0)], [0.5])


def test_gate_op_validation():
    with pytest.raises(QubitIndexError):
        GateOp.cz(1, 1)
    with pytest.raises(ValidationError):
        GateOp(GateOp.ry(0, 0).kind, 0)


def test_state_length_must_match_qubits():
    with pytest.raises(ValidationError):
        QuantumState(2, np.ones(3))


@settings(max_examples=100)
@given(circuits())
def test_run_circuit_matches_dense_oracle(circuit):
    n, ops, params = circuit
    state = run_circuit(n, ops, params)
    np.testing.assert_allclose(state.amplitudes, dense_run(n, ops, params), atol=1e-10)
    assert abs(state.norm() - 1.0) < 1e-10


@given(circuits(), st.integers(0, 3))
def test_every_gate_preserves_norm(circuit, seed):
    n, ops, params = circuit
    state = random_state(n, seed)
    for op in ops:
        if op.control is None:
            state = apply_ry(state, op.target, params[op.angle_slot])
        else:
            state = apply_cz(state, op.control, op.target)
        assert abs(state.norm() - 1.0) < 1e-10


@given(angles, angles, st.integers(0, 2))
def test_ry_composition(a, b, q):
    state = random_state(3, 7)
    composed = apply_ry(apply_ry(state, q, a), q, b)
    np.testing.assert_allclose(composed.amplitudes, apply_ry(state, q, a + b).amplitudes, atol=1e-10)


def test_batch_matches_independent_runs():
    ops = [GateOp.ry(0, 0), GateOp.cz(0, 1), GateOp.ry(1, 1), GateOp.ry(2, 2), GateOp.cz(1, 2)]
    params = np.random.default_rng(3).uniform(-np.pi, np.pi, size=(6, 3))
    batch = run_circuit_batch(3, ops, params)
    for row, p in zip(batch, params):
        np.testing.assert_allclose(row, run_circuit(3, ops, p).amplitudes, atol=1e-12)


def test_expectation_z_all_matches_per_qubit_readout():
    state = run_circuit(3, [GateOp.ry(0, 0), GateOp.ry(2, 1), GateOp.cz(0, 2)], [0.4, 2.2])
    z = expectation_z_all(state.amplitudes)
    np.testing.assert_allclose(z, [expectation_z(state, q) for q in range(3)], atol=1e-12)
    assert np.all(np.abs(z) <= 1.0 + 1e-12)


def test_batch_params_must_be_two_dimensional():
    with pytest.raises(ValidationError):
        run_circuit_batch(1, [GateOp.ry(0, 0)], [0.1])


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_product_state_equals_encoding_rotations(n, seed):
    angles = np.random.default_rng(seed).uniform(-np.pi, np.pi, size=(3, n))
    ops = [GateOp.ry(q, q) for q in range(n)]
    np.testing.assert_allclose(product_state(angles), run_circuit_batch(n, ops, angles).real, atol=1e-12)


@settings(max_examples=30)
@given(circuits())
def test_real_amplitudes_match_complex_simulation(circuit):
    n, ops, params = circuit
    batch = np.asarray(params, dtype=np.float64).reshape(1, -1)
    real = run_circuit_batch(n, ops, batch, dtype=np.float64)
    assert real.dtype == np.float64
    np.testing.assert_allclose(real, run_circuit_batch(n, ops, batch), atol=1e-12)


def test_initial_state_is_copied_and_shape_checked():
    initial = product_state(np.full((2, 2), 0.3))
    before = initial.copy()
    out = run_circuit_batch(2, [GateOp.cz(0, 1)], np.zeros((2, 0)), initial=initial, dtype=np.float64)
    np.testing.assert_array_equal(initial, before)
    np.testing.assert_allclose(out[:, 3], -before[:, 3])
    with pytest.raises(ValidationError):
        run_circuit_batch(2, [], np.zeros((2, 0)), initial=np.ones((2, 8)))
