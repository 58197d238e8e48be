"""Dressed variational quantum classifier.

features -> z-score -> linear layer -> one RY encoding angle per qubit
         -> STD ansatz -> per-qubit <Z> -> linear layer -> class logits

Circuit gradients come from the parameter-shift rule (two shifted circuit runs
per RY angle, all shifts of one sample evaluated as a single batch); the
classical layers are differentiated analytically and chained around it.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict
import logging

import numpy as np

from config import Config
from models.neural import softmax, softmax_cross_entropy
from models.normalizer import FeatureNormalizer, check_features
from quantum.ansatz import std_ansatz
from quantum.statevector import GateOp, expectation_z_all, product_state, run_circuit_batch
from utils.errors import CheckpointError, ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.quantum_classifier')

SHIFT = np.pi / 2
INFERENCE_CHUNK = 256  # circuit rows simulated at once
CLASSICAL_PARAMS = ('input_weights', 'input_bias', 'output_weights', 'output_bias')


def shift_jacobian(n_qubits, ops, params, run=None):
    """d<Z_q>/d(param_j) for every bound angle by the parameter-shift rule.

    Every angle slot must feed exactly one RY gate. Returns ``(jacobian, evaluations)``
    with ``jacobian`` of shape ``(n_params, n_qubits)``. ``run`` maps a parameter
    batch to amplitudes and defaults to simulating ``ops`` from |0...0>.
    """
    params = np.asarray(params, dtype=np.float64)
    n_params = params.shape[0]
    shifts = np.eye(n_params) * SHIFT
    batch = np.concatenate([params + shifts, params - shifts], axis=0)
    amps = run(batch) if run is not None else run_circuit_batch(n_qubits, ops, batch)
    z = expectation_z_all(amps)
    jacobian = (z[:n_params] - z[n_params:]) / (2.0 * np.sin(SHIFT))
    return jacobian, batch.shape[0]


@dataclass
class ParamShiftGradient:
    theta: np.ndarray      # d(upstream . logits)/d(theta)
    encoding: np.ndarray   # d(upstream . logits)/d(encoding angle)
    circuit_evaluations: int


class DressedQnnModel:
    kind = 'qnn'

    def __init__(self, n_qubits, n_layers, input_weights, input_bias, theta,
                 output_weights, output_bias, normalizer):
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.input_weights = np.asarray(input_weights, dtype=np.float64)
        self.input_bias = np.asarray(input_bias, dtype=np.float64)
        self.theta = np.asarray(theta, dtype=np.float64)
        self.output_weights = np.asarray(output_weights, dtype=np.float64)
        self.output_bias = np.asarray(output_bias, dtype=np.float64)
        self.normalizer = normalizer

        self.ansatz = std_ansatz(n_qubits, n_layers, slot_offset=n_qubits)
        self.ops = tuple(GateOp.ry(q, q) for q in range(n_qubits)) + self.ansatz.layout
        self._check_shapes()
        logger.debug(f"Initialized DressedQnnModel: {self.parameter_counts()}")

    def _check_shapes(self):
        n, f = self.n_qubits, self.normalizer.n_features
        c = self.output_bias.shape[0]
        expected = {
            'input_weights': (f, n), 'input_bias': (n,), 'theta': (self.ansatz.n_params,),
            'output_weights': (n, c), 'output_bias': (c,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @classmethod
    def create(cls, n_qubits=None, n_layers=None, normalizer=None, seed=0,
               n_features=Config.N_FEATURES, n_classes=Config.N_CLASSES):
        n_qubits = n_qubits or Config.N_QUBITS
        n_layers = n_layers or Config.N_LAYERS
        normalizer = normalizer or FeatureNormalizer.identity(n_features)
        gen = rng.stream(seed, 'init', 0)
        b_in = 1.0 / np.sqrt(n_features)
        b_out = 1.0 / np.sqrt(n_qubits)
        return cls(
            n_qubits, n_layers,
            input_weights=gen.uniform(-b_in, b_in, size=(n_features, n_qubits)),
            input_bias=gen.uniform(-b_in, b_in, size=n_qubits),
            theta=gen.uniform(-np.pi, np.pi, size=2 * (n_qubits - 1) * n_layers),
            output_weights=gen.uniform(-b_out, b_out, size=(n_qubits, n_classes)),
            output_bias=gen.uniform(-b_out, b_out, size=n_classes),
            normalizer=normalizer,
        )

    @property
    def n_features(self):
        return self.input_weights.shape[0]

    @property
    def n_classes(self):
        return self.output_bias.shape[0]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {
            'input_weights': self.input_weights,
            'input_bias': self.input_bias,
            'theta': self.theta,
            'output_weights': self.output_weights,
            'output_bias': self.output_bias,
        }

    def parameter_counts(self):
        classical = sum(getattr(self, name).size for name in CLASSICAL_PARAMS)
        return {'quantum': int(self.theta.size), 'classical': int(classical)}

    def frozen_for_transfer(self):
        """Only the variational circuit adapts; the dressing layers stay as pretrained"""
        return set(CLASSICAL_PARAMS)

    # -- forward -------------------------------------------------------------

    def encoding_angles(self, features):
        return self.normalizer.transform(features) @ self.input_weights + self.input_bias

    def circuit_params(self, angles):
        angles = np.atleast_2d(angles)
        theta = np.broadcast_to(self.theta, (angles.shape[0], self.theta.size))
        return np.concatenate([angles, theta], axis=1)

    def run_params(self, params):
        """Amplitudes of the full circuit (encoding + ansatz) for each parameter row

        The encoding layer acts on |0...0> so it is built as a product state; the
        ansatz then runs on real amplitudes.
        """
        params = np.atleast_2d(params)
        initial = product_state(params[:, :self.n_qubits])
        return run_circuit_batch(self.n_qubits, self.ansatz.layout, params, initial=initial, dtype=np.float64)

    def z_expectations(self, angles):
        return expectation_z_all(self.run_params(self.circuit_params(angles)))

    def logits(self, features):
        features = check_features(np.atleast_2d(features), self.n_features)
        angles = self.encoding_angles(features)
        z = np.concatenate([
            self.z_expectations(angles[start:start + INFERENCE_CHUNK])
            for start in range(0, angles.shape[0], INFERENCE_CHUNK)
        ]) if angles.shape[0] else np.empty((0, self.n_qubits))
        return z @ self.output_weights + self.output_bias

    def scores(self, features):
        return softmax(self.logits(features))

    # -- gradients -----------------------------------------------------------

    def loss_and_grad(self, features, labels, workers=1):
        """Mean loss and gradient over a batch; samples are independent and may use a thread pool"""
        features = check_features(np.atleast_2d(features), self.n_features)
        labels = np.atleast_1d(labels)
        if labels.shape[0] != features.shape[0]:
            raise ValidationError(f"{features.shape[0]} samples but {labels.shape[0]} labels")

        def one(i):
            return qnn_backward(self, features[i], labels[i])

        if workers > 1 and features.shape[0] > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, range(features.shape[0])))
        else:
            results = [one(i) for i in range(features.shape[0])]

        # sample-order reduction
        total = {k: np.zeros_like(v) for k, v in self.parameters().items()}
        loss = 0.0
        for sample_loss, grads in results:
            loss += sample_loss
            for k in total:
                total[k] += grads[k]
        n = features.shape[0]
        return loss / n, {k: v / n for k, v in total.items()}

    # -- persistence ---------------------------------------------------------

    def to_document(self):
        return {
            'kind': self.kind,
            'n_qubits': self.n_qubits,
            'n_layers': self.n_layers,
            'parameters': {k: v.tolist() for k, v in self.parameters().items()},
            'normalizer': self.normalizer.to_document(),
        }

    @classmethod
    def from_document(cls, doc):
        try:
            p = doc['parameters']
            return cls(
                doc['n_qubits'], doc['n_layers'],
                p['input_weights'], p['input_bias'], p['theta'],
                p['output_weights'], p['output_bias'],
                FeatureNormalizer.from_document(doc['normalizer']),
            )
        except KeyError as e:
            raise CheckpointError(f"QNN checkpoint is missing {e}")
        except (ValidationError, ValueError, TypeError) as e:
            raise CheckpointError(f"QNN checkpoint is malformed: {e}")


def qnn_forward(model: DressedQnnModel, x) -> np.ndarray:
    x = check_features(x, model.n_features)
    if x.ndim != 1:
        raise ValidationError("qnn_forward takes a single sample; use DressedQnnModel.logits for batches")
    return model.logits(x)[0]


def param_shift_grad(model: DressedQnnModel, x, upstream) -> ParamShiftGradient:
    """Gradient of ``upstream . logits(x)`` with respect to theta and the encoding angles"""
    x = check_features(x, model.n_features)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (model.n_classes,) or not np.all(np.isfinite(upstream)):
        raise ValidationError(f"upstream must be {model.n_classes} finite values, got shape {upstream.shape}")

    angles = model.encoding_angles(x)
    jacobian, evaluations = shift_jacobian(model.n_qubits, model.ops, model.circuit_params(angles)[0],
                                           run=model.run_params)
    dz = model.output_weights @ upstream
    grad = jacobian @ dz
    return ParamShiftGradient(
        theta=grad[model.n_qubits:],
        encoding=grad[:model.n_qubits],
        circuit_evaluations=evaluations,
    )


def qnn_backward(model: DressedQnnModel, x, label):
    """Softmax cross-entropy of one sample and its gradient for every parameter"""
    x = check_features(x, model.n_features)
    if not 0 <= int(label) < model.n_classes or int(label) != label:
        raise ValidationError(f"label {label} out of range 0..{model.n_classes - 1}")

    x_norm = model.normalizer.transform(x)
    angles = x_norm @ model.input_weights + model.input_bias
    z = model.z_expectations(angles)[0]
    logits = z @ model.output_weights + model.output_bias
    loss, dlogits = softmax_cross_entropy(logits, int(label))

    shifted = param_shift_grad(model, x, dlogits)
    grads = {
        'input_weights': np.outer(x_norm, shifted.encoding),
        'input_bias': shifted.encoding,
        'theta': shifted.theta,
        'output_weights': np.outer(z, dlogits),
        'output_bias': dlogits,
    }
    return loss, grads
