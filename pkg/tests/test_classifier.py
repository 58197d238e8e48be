import numpy as np
import pytest

from models.neural import softmax_cross_entropy
from models.normalizer import FeatureNormalizer
from oracles import dense_run, dense_z
from quantum.classifier import (
    DressedQnnModel, param_shift_grad, qnn_backward, qnn_forward, shift_jacobian,
)
from quantum.statevector import GateOp, run_circuit_batch
from utils.errors import ValidationError

STEP = 1e-5


def small_model(n_qubits=4, seed=0):
    gen = np.random.default_rng(100 + seed)
    normalizer = FeatureNormalizer(gen.normal(size=36), gen.uniform(0.5, 2.0, size=36))
    return DressedQnnModel.create(n_qubits, 1, normalizer, seed=seed)


def sample(seed=0):
    return np.random.default_rng(seed).normal(size=36)


def central_difference(fn, array, index):
    original = array[index]
    array[index] = original + STEP
    plus = fn()
    array[index] = original - STEP
    minus = fn()
    array[index] = original
    return (plus - minus) / (2 * STEP)


def test_canonical_parameter_counts():
    model = DressedQnnModel.create(10, 1)
    assert model.parameter_counts() == {'quantum': 18, 'classical': 458}
    assert model.input_weights.shape == (36, 10)
    assert model.output_weights.shape == (10, 8)


def test_zero_parameters_give_zero_logits():
    model = DressedQnnModel.create(3, 1)
    for p in model.parameters().values():
        p[...] = 0.0
    np.testing.assert_array_equal(qnn_forward(model, np.zeros(36)), np.zeros(8))
    np.testing.assert_array_equal(model.z_expectations(np.zeros(3)), np.ones((1, 3)))


def test_two_qubit_logits_match_dense_oracle():
    model = small_model(n_qubits=2, seed=4)
    x = sample(4)
    angles = model.normalizer.transform(x) @ model.input_weights + model.input_bias
    params = np.concatenate([angles, model.theta])
    z = dense_z(dense_run(2, model.ops, params), 2)
    np.testing.assert_allclose(qnn_forward(model, x), z @ model.output_weights + model.output_bias, atol=1e-10)


def test_logits_are_finite_and_batched_like_single_calls():
    model = small_model()
    X = np.random.default_rng(9).normal(scale=50.0, size=(5, 36))
    logits = model.logits(X)
    assert np.all(np.isfinite(logits))
    for row, x in zip(logits, X):
        np.testing.assert_allclose(row, qnn_forward(model, x), atol=1e-12)


def test_non_finite_input_rejected():
    model = small_model()
    x = sample()
    x[3] = np.nan
    with pytest.raises(ValidationError):
        qnn_forward(model, x)
    with pytest.raises(ValidationError):
        qnn_forward(model, np.zeros(35))


@pytest.mark.parametrize("theta", [0.0, np.pi / 4, 1.0])
def test_single_rotation_gradient_is_minus_sine(theta):
    jacobian, evaluations = shift_jacobian(1, [GateOp.ry(0, 0)], [theta])
    assert jacobian[0, 0] == pytest.approx(-np.sin(theta), abs=1e-12)
    assert evaluations == 2


@pytest.mark.parametrize("n_qubits", [4, 5, 6])
def test_parameter_shift_matches_finite_differences(n_qubits):
    model = small_model(n_qubits, seed=n_qubits)
    x = sample(n_qubits)
    upstream = np.random.default_rng(n_qubits).normal(size=8)

    def objective():
        return float(upstream @ qnn_forward(model, x))

    grad = param_shift_grad(model, x, upstream)
    fd_theta = [central_difference(objective, model.theta, i) for i in range(model.theta.size)]
    # d/d(input_bias) is d/d(encoding angle)
    fd_encoding = [central_difference(objective, model.input_bias, q) for q in range(n_qubits)]
    np.testing.assert_allclose(grad.theta, fd_theta, atol=1e-6)
    np.testing.assert_allclose(grad.encoding, fd_encoding, atol=1e-6)


@pytest.mark.parametrize("n_qubits,layers", [(4, 1), (10, 1), (5, 3)])
def test_parameter_shift_evaluation_count(n_qubits, layers):
    model = DressedQnnModel.create(n_qubits, layers)
    grad = param_shift_grad(model, sample(), np.ones(8))
    assert grad.circuit_evaluations == 2 * (2 * (n_qubits - 1) * layers + n_qubits)


def test_zero_upstream_gives_zero_gradient():
    model = small_model()
    grad = param_shift_grad(model, sample(), np.zeros(8))
    np.testing.assert_array_equal(grad.theta, np.zeros(model.theta.size))
    np.testing.assert_array_equal(grad.encoding, np.zeros(model.n_qubits))


def test_upstream_must_be_finite_class_vector():
    model = small_model()
    with pytest.raises(ValidationError):
        param_shift_grad(model, sample(), np.ones(7))
    with pytest.raises(ValidationError):
        param_shift_grad(model, sample(), np.full(8, np.inf))


def test_end_to_end_gradient_matches_finite_differences():
    model = small_model(seed=2)
    x, label = sample(2), 5

    def loss():
        return softmax_cross_entropy(qnn_forward(model, x), label)[0]

    _, grads = qnn_backward(model, x, label)
    for name, param in model.parameters().items():
        fd = np.array([central_difference(loss, param, idx) for idx in np.ndindex(param.shape)]).reshape(param.shape)
        np.testing.assert_allclose(grads[name], fd, rtol=1e-4, atol=1e-8, err_msg=name)


def test_duplicate_batch_equals_single_sample():
    model = small_model(seed=3)
    x = sample(3)
    loss, grads = qnn_backward(model, x, 2)
    batch_loss, batch_grads = model.loss_and_grad(np.stack([x, x]), np.array([2, 2]))
    assert batch_loss == pytest.approx(loss, rel=1e-12)
    for name in grads:
        np.testing.assert_allclose(batch_grads[name], grads[name], rtol=1e-12, atol=1e-15)


def test_saturated_correct_prediction_has_vanishing_gradient():
    model = small_model()
    model.output_weights[...] = 0.0
    model.output_bias[...] = 0.0
    model.output_bias[1] = 30.0
    _, grads = qnn_backward(model, sample(), 1)
    assert max(np.abs(g).max() for g in grads.values()) < 1e-9


@pytest.mark.parametrize("label", [-1, 8, 2.5])
def test_label_out_of_range_rejected(label):
    with pytest.raises(ValidationError):
        qnn_backward(small_model(), sample(), label)


def test_encoding_is_two_pi_periodic():
    model = small_model()
    angles = np.random.default_rng(1).uniform(-3, 3, size=(3, model.n_qubits))
    np.testing.assert_allclose(model.z_expectations(angles + 2 * np.pi), model.z_expectations(angles), atol=1e-10)


def test_threaded_gradients_equal_serial_ones():
    model = small_model(seed=6)
    X = np.random.default_rng(6).normal(size=(6, 36))
    y = np.arange(6) % 8
    serial = model.loss_and_grad(X, y, workers=1)
    threaded = model.loss_and_grad(X, y, workers=3)
    assert serial[0] == threaded[0]
    for name in serial[1]:
        np.testing.assert_array_equal(serial[1][name], threaded[1][name])


def test_transfer_freezes_dressing_layers_only():
    model = small_model()
    assert model.frozen_for_transfer() == {'input_weights', 'input_bias', 'output_weights', 'output_bias'}
    assert 'theta' in model.parameters()


def test_same_seed_same_initialisation():
    a, b = DressedQnnModel.create(4, 2, seed=7), DressedQnnModel.create(4, 2, seed=7)
    for name in a.parameters():
        np.testing.assert_array_equal(a.parameters()[name], b.parameters()[name])
    assert np.all(np.abs(a.theta) <= np.pi)


def test_fast_circuit_path_matches_gate_by_gate_simulation():
    model = small_model(n_qubits=5, seed=8)
    angles = model.encoding_angles(np.random.default_rng(8).normal(size=(4, 36)))
    params = model.circuit_params(angles)
    fast = model.run_params(params)
    assert fast.dtype == np.float64
    np.testing.assert_allclose(fast, run_circuit_batch(5, model.ops, params).real, atol=1e-12)
