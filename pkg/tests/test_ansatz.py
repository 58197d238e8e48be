import pytest
from hypothesis import given
import hypothesis.strategies as st

from quantum.ansatz import std_ansatz
from quantum.statevector import GateKind
from utils.errors import ValidationError


@given(st.integers(2, 12), st.integers(1, 4))
def test_parameter_count_law(n, layers):
    ansatz = std_ansatz(n, layers)
    ry_gates = [op for op in ansatz.layout if op.kind is GateKind.ROTATION_Y]
    assert ansatz.n_params == 2 * (n - 1) * layers
    assert len(ry_gates) == ansatz.n_params
    assert sorted(op.angle_slot for op in ry_gates) == list(range(ansatz.n_params))


def test_ten_qubits_one_layer_has_eighteen_parameters():
    assert std_ansatz(10, 1).n_params == 18


def test_block_order_even_pairs_then_odd_pairs():
    layout = std_ansatz(4, 1).layout
    cz_pairs = [(op.control, op.target) for op in layout if op.kind is GateKind.CONTROLLED_Z]
    assert cz_pairs == [(0, 1), (2, 3), (1, 2)]
    # CZ then RY on both members of the pair
    assert [str(op) for op in layout[:3]] == ['CZ(q0, q1)', 'RY(q0, slot0)', 'RY(q1, slot1)']


def test_odd_qubit_count():
    ansatz = std_ansatz(5, 2)
    cz_pairs = [(op.control, op.target) for op in ansatz.layout if op.kind is GateKind.CONTROLLED_Z]
    assert cz_pairs == [(0, 1), (2, 3), (1, 2), (3, 4)] * 2
    assert ansatz.n_params == 16


def test_slot_offset_shifts_every_slot():
    ansatz = std_ansatz(3, 1, slot_offset=3)
    slots = [op.angle_slot for op in ansatz.layout if op.angle_slot is not None]
    assert slots == [3, 4, 5, 6]


@pytest.mark.parametrize("n,layers", [(0, 1), (3, 0)])
def test_invalid_shape_rejected(n, layers):
    with pytest.raises(ValidationError):
        std_ansatz(n, layers)
