"""Classical building blocks shared by the DNN and the dressed QNN.

Everything here is plain numpy with hand-written backward passes: the
architectures are fixed, so there is no autograd graph, only cached
pre-activations per forward call.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional
import logging

import numpy as np

from config import Config
from models.normalizer import FeatureNormalizer, check_features
from utils.errors import CheckpointError, ValidationError
from utils import rng

logger = logging.getLogger('beam_qtl.neural')

DNN_PARAMETER_COUNT = 34808  # 36->100, three 100->100 residual blocks, 100->8
MISH_LINEAR_BRANCH = 20.0


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > MISH_LINEAR_BRANCH, x, np.log1p(np.exp(np.minimum(x, MISH_LINEAR_BRANCH))))


def mish(x):
    """x * tanh(softplus(x)); linear above the branch point, so large inputs never overflow"""
    x = np.asarray(x, dtype=np.float64)
    out = x * np.tanh(softplus(x))
    return float(out) if out.ndim == 0 else out


def mish_grad(x):
    x = np.asarray(x, dtype=np.float64)
    t = np.tanh(softplus(x))
    sigmoid = 0.5 * (1.0 + np.tanh(0.5 * x))
    return t + x * (1.0 - t * t) * sigmoid


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels, n_classes):
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError(f"labels must be integers, got dtype {labels.dtype}")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValidationError(f"label out of range 0..{n_classes - 1}: {labels}")
    return labels


def softmax_cross_entropy(logits, label):
    """Loss and d(loss)/d(logits).

    ``logits`` may be one vector with an int label, or ``(N, C)`` with N labels;
    in the batched case losses and gradients are returned per sample.
    """
    logits = np.asarray(logits, dtype=np.float64)
    label = _check_labels(label, logits.shape[-1])
    m = logits.max(axis=-1, keepdims=True)
    lse = m[..., 0] + np.log(np.exp(logits - m).sum(axis=-1))
    onehot = np.eye(logits.shape[-1])[label]
    loss = lse - np.sum(logits * onehot, axis=-1)
    grad = softmax(logits) - onehot
    if logits.ndim == 1:
        return float(loss), grad
    return loss, grad


class Linear:
    def __init__(self, weight, bias):
        self.weight = weight  # (fan_in, fan_out)
        self.bias = bias

    @classmethod
    def create(cls, fan_in, fan_out, generator):
        bound = 1.0 / np.sqrt(fan_in)
        return cls(
            generator.uniform(-bound, bound, size=(fan_in, fan_out)),
            generator.uniform(-bound, bound, size=fan_out),
        )

    @property
    def n_params(self):
        return self.weight.size + self.bias.size

    def forward(self, x):
        return x @ self.weight + self.bias

    def backward(self, x, dout):
        """Returns (dx, dweight, dbias) for a batch ``x`` of shape (N, fan_in)"""
        return dout @ self.weight.T, x.T @ dout, dout.sum(axis=0)


class DnnModel:
    """Residual MLP: Mish(input projection) -> residual Mish blocks -> raw logits"""

    kind = 'dnn'

    def __init__(self, input_layer, blocks, output_layer, normalizer):
        self.input_layer = input_layer
        self.blocks = list(blocks)
        self.output_layer = output_layer
        self.normalizer = normalizer
        self._check_shapes()
        logger.debug(f"Initialized DnnModel with {self.n_params} parameters")

    def _check_shapes(self):
        f, h = self.normalizer.n_features, self.input_layer.bias.shape[0]
        c = self.output_layer.bias.shape[0]
        expected = [(f, h), (h,)] + [(h, h), (h,)] * len(self.blocks) + [(h, c), (c,)]
        actual = [a.shape for layer in self._layers() for a in (layer.weight, layer.bias)]
        for name, got, want in zip(self.parameters(), actual, expected):
            if got != want:
                raise ValidationError(f"{name} has shape {got}, expected {want}")

    @classmethod
    def create(cls, normalizer=None, seed=0, hidden=None, n_blocks=None,
               n_features=Config.N_FEATURES, n_classes=Config.N_CLASSES):
        hidden = hidden or Config.DNN_HIDDEN
        n_blocks = Config.DNN_RESIDUAL_BLOCKS if n_blocks is None else n_blocks
        normalizer = normalizer or FeatureNormalizer.identity(n_features)
        gen = rng.stream(seed, 'init', 1)
        model = cls(
            Linear.create(n_features, hidden, gen),
            [Linear.create(hidden, hidden, gen) for _ in range(n_blocks)],
            Linear.create(hidden, n_classes, gen),
            normalizer,
        )
        canonical = (n_features, hidden, n_blocks, n_classes) == (
            Config.N_FEATURES, Config.DNN_HIDDEN, Config.DNN_RESIDUAL_BLOCKS, Config.N_CLASSES)
        if canonical and model.n_params != DNN_PARAMETER_COUNT:
            raise AssertionError(f"DNN has {model.n_params} parameters, expected {DNN_PARAMETER_COUNT}")
        return model

    @property
    def n_features(self):
        return self.input_layer.weight.shape[0]

    @property
    def n_classes(self):
        return self.output_layer.weight.shape[1]

    @property
    def n_params(self):
        return sum(layer.n_params for layer in self._layers())

    def _layers(self):
        return [self.input_layer, *self.blocks, self.output_layer]

    def _layer_names(self):
        return ['input'] + [f'block{i + 1}' for i in range(len(self.blocks))] + ['output']

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {}
        for name, layer in zip(self._layer_names(), self._layers()):
            params[f'{name}.weight'] = layer.weight
            params[f'{name}.bias'] = layer.bias
        return params

    def parameter_counts(self):
        return {'quantum': 0, 'classical': self.n_params}

    def frozen_for_transfer(self):
        """First and last layers stay fixed during fine-tuning; residual blocks adapt"""
        return {'input.weight', 'input.bias', 'output.weight', 'output.bias'}

    def _forward(self, features):
        x = self.normalizer.transform(features)
        u0 = self.input_layer.forward(x)
        h = mish(u0)
        cache = {'x': x, 'u0': u0, 'block_inputs': [], 'block_pre': []}
        for block in self.blocks:
            u = block.forward(h)
            cache['block_inputs'].append(h)
            cache['block_pre'].append(u)
            h = h + mish(u)
        cache['h'] = h
        return self.output_layer.forward(h), cache

    def logits(self, features):
        features = check_features(np.atleast_2d(features), self.n_features)
        return self._forward(features)[0]

    def scores(self, features):
        return softmax(self.logits(features))

    def loss_and_grad(self, features, labels, workers=1):
        """Mean softmax cross-entropy over the batch and its gradient per parameter"""
        features = check_features(np.atleast_2d(features), self.n_features)
        logits, cache = self._forward(features)
        losses, dlogits = softmax_cross_entropy(logits, np.atleast_1d(labels))
        n = features.shape[0]
        dlogits = dlogits / n

        grads = {}
        dh, grads['output.weight'], grads['output.bias'] = self.output_layer.backward(cache['h'], dlogits)
        for i in reversed(range(len(self.blocks))):
            du = dh * mish_grad(cache['block_pre'][i])
            dx, grads[f'block{i + 1}.weight'], grads[f'block{i + 1}.bias'] = \
                self.blocks[i].backward(cache['block_inputs'][i], du)
            dh = dh + dx
        du0 = dh * mish_grad(cache['u0'])
        _, grads['input.weight'], grads['input.bias'] = self.input_layer.backward(cache['x'], du0)
        return float(losses.mean()), grads

    def to_document(self):
        return {
            'kind': self.kind,
            'hidden': self.input_layer.weight.shape[1],
            'n_blocks': len(self.blocks),
            'parameters': {k: v.tolist() for k, v in self.parameters().items()},
            'normalizer': self.normalizer.to_document(),
        }

    @classmethod
    def from_document(cls, doc):
        try:
            p = {k: np.asarray(v, dtype=np.float64) for k, v in doc['parameters'].items()}
            blocks = [Linear(p[f'block{i + 1}.weight'], p[f'block{i + 1}.bias'])
                      for i in range(doc['n_blocks'])]
            return cls(
                Linear(p['input.weight'], p['input.bias']),
                blocks,
                Linear(p['output.weight'], p['output.bias']),
                FeatureNormalizer.from_document(doc['normalizer']),
            )
        except KeyError as e:
            raise CheckpointError(f"DNN checkpoint is missing {e}")
        except (ValidationError, ValueError, TypeError) as e:
            raise CheckpointError(f"DNN checkpoint is malformed: {e}")


def dnn_forward(model: DnnModel, x) -> np.ndarray:
    x = check_features(x, model.n_features)
    if x.ndim != 1:
        raise ValidationError("dnn_forward takes a single sample; use DnnModel.logits for batches")
    return model.logits(x)[0]


@dataclass
class AdamWState:
    lr: float = Config.LEARNING_RATE
    weight_decay: float = Config.WEIGHT_DECAY
    beta1: float = Config.ADAM_BETAS[0]
    beta2: float = Config.ADAM_BETAS[1]
    eps: float = Config.ADAM_EPS
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(cls, params: Mapping[str, np.ndarray], **hyper):
        state = cls(**hyper)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def _trainable_mask(name, shape, frozen):
    if not frozen or name not in frozen:
        return None
    spec = frozen[name]
    if isinstance(spec, (bool, np.bool_)):
        return np.full(shape, not spec)
    spec = np.asarray(spec, dtype=bool)
    if spec.shape != shape:
        raise ValidationError(f"freeze mask for {name} has shape {spec.shape}, expected {shape}")
    return ~spec


def adamw_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
               state: AdamWState, frozen: Optional[Mapping[str, object]] = None):
    """One AdamW update, in place.

    ``frozen`` maps parameter names to ``True`` (whole tensor frozen) or to a
    boolean array marking frozen entries; frozen entries keep their values and
    their moment estimates exactly.
    """
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ValidationError(
            f"parameter/gradient/state keys differ: {sorted(set(params) ^ set(grads))}"
        )
    for name, p in params.items():
        if grads[name].shape != p.shape or state.m[name].shape != p.shape:
            raise ValidationError(
                f"shape mismatch for {name}: param {p.shape}, grad {grads[name].shape}"
            )

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        updated = p - state.lr * (m_hat / (np.sqrt(v_hat) + state.eps)) - state.lr * state.weight_decay * p

        trainable = _trainable_mask(name, p.shape, frozen)
        if trainable is None:
            p[...] = updated
            state.m[name][...] = m
            state.v[name][...] = v
        else:
            np.copyto(p, updated, where=trainable)
            np.copyto(state.m[name], m, where=trainable)
            np.copyto(state.v[name], v, where=trainable)
    return params, state
