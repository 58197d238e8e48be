from dataclasses import dataclass
from typing import Tuple
import logging

from quantum.statevector import GateOp
from utils.errors import ValidationError

logger = logging.getLogger('beam_qtl.ansatz')


@dataclass(frozen=True)
class StdAnsatz:
    """Simplified two-design template: per layer, a CZ + RY-pair block on the even
    pairs (0,1),(2,3),... followed by the same on the odd pairs (1,2),(3,4),...

    Angle slots start at ``slot_offset`` so the ansatz can sit after an encoding
    stage that owns slots ``0..slot_offset-1``.
    """
    n_qubits: int
    n_layers: int
    slot_offset: int
    layout: Tuple[GateOp, ...]

    @property
    def n_params(self):
        return 2 * (self.n_qubits - 1) * self.n_layers


def std_ansatz(n_qubits: int, n_layers: int = 1, slot_offset: int = 0) -> StdAnsatz:
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be >= 1, got {n_qubits}")
    if n_layers < 1:
        raise ValidationError(f"n_layers must be >= 1, got {n_layers}")

    ops = []
    slot = slot_offset
    for _ in range(n_layers):
        for start in (0, 1):
            for a in range(start, n_qubits - 1, 2):
                ops.append(GateOp.cz(a, a + 1))
                ops.append(GateOp.ry(a, slot))
                ops.append(GateOp.ry(a + 1, slot + 1))
                slot += 2

    ansatz = StdAnsatz(n_qubits, n_layers, slot_offset, tuple(ops))
    # Each layer pairs every neighbouring qubit exactly once across its two blocks
    assert slot - slot_offset == ansatz.n_params
    logger.debug(f"Built STD ansatz: {n_qubits} qubits, {n_layers} layers, {ansatz.n_params} params")
    return ansatz
