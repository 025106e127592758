"""Variational quantum circuit block on 4 qubits.

Forward pass: a trainable affine map compresses the classical input to 4
values a_i, each loaded by H, RY(arctan a_i), RZ(arctan a_i^2) on qubit i;
two variational layers follow, each a CNOT ring (0->1, 1->2, 2->3, 3->0)
and per-qubit RZ/RY/RZ rotations; the readout is the Pauli-Z expectation
per qubit, scaled by two trainable scalars.

Gradients are exact: the parameter-shift rule (+-pi/2) for every rotation
angle, chained through arctan and the affine compression for the encoding
side.  All shifted circuits run through one vectorized evaluator whose
batch rows each count as one circuit evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_QUBITS = 4
N_LAYERS = 2
DIM = 1 << N_QUBITS
SHIFT = np.pi / 2.0

# Z_SIGNS[b, q] = +1 if bit q of basis index b is 0 else -1
_BASIS = np.arange(DIM)
Z_SIGNS = 1.0 - 2.0 * ((_BASIS[:, None] >> np.arange(N_QUBITS)[None, :]) & 1)

# CNOT(c -> t) maps basis b to b XOR (bit_c(b) << t); compose the ring once
def _ring_gather() -> np.ndarray:
    dest = np.empty(DIM, dtype=np.intp)
    for b in range(DIM):
        i = b
        for c in range(N_QUBITS):
            t = (c + 1) % N_QUBITS
            i ^= ((i >> c) & 1) << t
        dest[b] = i
    inv = np.empty(DIM, dtype=np.intp)
    inv[dest] = np.arange(DIM)
    return inv


_RING_GATHER = _ring_gather()


@dataclass
class EvalCounter:
    """Counts circuit evaluations; one batch row = one evaluation."""

    count: int = 0

    def add(self, n: int = 1) -> None:
        self.count += n


@dataclass
class VqcParams:
    """All trainable values of one circuit block.

    in_proj/bias compress the classical input to 4 values, angles holds the
    two variational layers (layer, qubit, rotation slot), and out_scale /
    out_shift are the two scaling parameters applied to the readout.
    """

    in_proj: np.ndarray  # (4, d_in)
    bias: np.ndarray  # (4,)
    angles: np.ndarray  # (2, 4, 3)
    out_scale: np.ndarray  # ()
    out_shift: np.ndarray  # ()

    @property
    def d_in(self) -> int:
        return self.in_proj.shape[1]

    def tree(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {
            prefix + "in_proj": self.in_proj,
            prefix + "bias": self.bias,
            prefix + "angles": self.angles,
            prefix + "out_scale": self.out_scale,
            prefix + "out_shift": self.out_shift,
        }


@dataclass
class VqcCache:
    """Forward-pass data reused by the backward pass."""

    x: np.ndarray
    projected: np.ndarray  # a = in_proj @ x + bias
    enc_ry: np.ndarray  # arctan(a)
    enc_rz: np.ndarray  # arctan(a^2)
    expectations: np.ndarray  # pre-scaling <Z_i>


@dataclass
class VqcOutput:
    values: np.ndarray  # (4,) scaled readout
    cache: VqcCache = field(repr=False, default=None)


def init_vqc_params(d_in: int, rng: np.random.Generator) -> VqcParams:
    """Seeded initialization: small affine map, small angles, unit scaling."""
    k = 1.0 / np.sqrt(d_in)
    return VqcParams(
        in_proj=rng.uniform(-k, k, size=(N_QUBITS, d_in)),
        bias=np.zeros(N_QUBITS),
        angles=rng.uniform(-0.1 * np.pi, 0.1 * np.pi, size=(N_LAYERS, N_QUBITS, 3)),
        out_scale=np.array(1.0),
        out_shift=np.array(0.0),
    )


def zeros_like_params(params: VqcParams) -> VqcParams:
    return VqcParams(
        in_proj=np.zeros_like(params.in_proj),
        bias=np.zeros_like(params.bias),
        angles=np.zeros_like(params.angles),
        out_scale=np.zeros_like(params.out_scale),
        out_shift=np.zeros_like(params.out_shift),
    )


def _apply_ry(amps: np.ndarray, theta: np.ndarray, qubit: int) -> np.ndarray:
    """Batched RY on one qubit; theta has one angle per batch row."""
    batch = amps.shape[0]
    c = np.cos(theta / 2.0)[:, None, None]
    s = np.sin(theta / 2.0)[:, None, None]
    view = amps.reshape(batch, -1, 2, 1 << qubit)
    lo = view[:, :, 0, :].copy()
    hi = view[:, :, 1, :]
    view[:, :, 0, :] = c * lo - s * hi
    view[:, :, 1, :] = s * lo + c * hi
    return amps


def _apply_rz_all(amps: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Batched RZ on all 4 qubits at once; thetas is (batch, 4)."""
    amps *= np.exp(-0.5j * (thetas @ Z_SIGNS.T))
    return amps


def _run_circuits(enc_ry: np.ndarray, enc_rz: np.ndarray, var_angles: np.ndarray) -> np.ndarray:
    """Evaluate a batch of circuits that differ only in their angles.

    enc_ry/enc_rz are (batch, 4) encoding angles, var_angles is
    (batch, 2, 4, 3).  Returns the (batch, 4) Z expectations.
    """
    batch = enc_ry.shape[0]
    # H on every qubit maps |0000> to the uniform +1/4 superposition
    amps = np.full((batch, DIM), 0.25, dtype=complex)
    for q in range(N_QUBITS):
        _apply_ry(amps, enc_ry[:, q], q)
    _apply_rz_all(amps, enc_rz)
    for layer in range(N_LAYERS):
        amps = amps[:, _RING_GATHER]
        _apply_rz_all(amps, var_angles[:, layer, :, 0])
        for q in range(N_QUBITS):
            _apply_ry(amps, var_angles[:, layer, q, 1], q)
        _apply_rz_all(amps, var_angles[:, layer, :, 2])
    probs = np.abs(amps) ** 2
    return probs @ Z_SIGNS


def vqc_forward(params: VqcParams, x: np.ndarray, counter: EvalCounter | None = None) -> VqcOutput:
    """One circuit evaluation; returns scaled Z expectations plus the cache."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d_in,):
        raise ValueError(f"input shape {x.shape} does not match in_proj width {params.d_in}")
    a = params.in_proj @ x + params.bias
    enc_ry = np.arctan(a)
    enc_rz = np.arctan(a * a)
    e = _run_circuits(enc_ry[None, :], enc_rz[None, :], params.angles[None, :, :, :])[0]
    if counter is not None:
        counter.add(1)
    values = params.out_scale * e + params.out_shift
    return VqcOutput(values=values, cache=VqcCache(x, a, enc_ry, enc_rz, e))


# angle-slot layout for the shifted batch: 4 encoding RY, 4 encoding RZ,
# then the 24 variational angles in (layer, qubit, slot) order
_N_SLOTS = 2 * N_QUBITS + N_LAYERS * N_QUBITS * 3


def vqc_gradients(
    params: VqcParams,
    x: np.ndarray,
    upstream: np.ndarray,
    counter: EvalCounter | None = None,
) -> tuple[VqcParams, np.ndarray]:
    """Exact gradients of upstream . values w.r.t. params and the input.

    Costs one unshifted evaluation plus two per rotation angle (64 for the
    default shape), all run as a single batch.
    """
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if x.shape != (params.d_in,):
        raise ValueError(f"input shape {x.shape} does not match in_proj width {params.d_in}")
    a = params.in_proj @ x + params.bias
    enc_ry = np.arctan(a)
    enc_rz = np.arctan(a * a)

    base = np.concatenate([enc_ry, enc_rz, params.angles.ravel()])
    rows = np.repeat(base[None, :], 1 + 2 * _N_SLOTS, axis=0)
    for k in range(_N_SLOTS):
        rows[1 + 2 * k, k] += SHIFT
        rows[2 + 2 * k, k] -= SHIFT
    e_all = _run_circuits(
        rows[:, :N_QUBITS],
        rows[:, N_QUBITS : 2 * N_QUBITS],
        rows[:, 2 * N_QUBITS :].reshape(-1, N_LAYERS, N_QUBITS, 3),
    )
    if counter is not None:
        counter.add(rows.shape[0])
    e = e_all[0]
    # dE[k, i] = d<Z_i>/d(angle_k) by the parameter-shift rule
    d_e = 0.5 * (e_all[1::2] - e_all[2::2])

    de = upstream * float(params.out_scale)  # dL/d<Z_i>
    slot_grads = d_e @ de  # (n_slots,)

    g_ry = slot_grads[:N_QUBITS]
    g_rz = slot_grads[N_QUBITS : 2 * N_QUBITS]
    g_var = slot_grads[2 * N_QUBITS :].reshape(N_LAYERS, N_QUBITS, 3)

    # chain rule through the arctan encodings back to a = in_proj @ x + bias
    da = g_ry / (1.0 + a * a) + g_rz * (2.0 * a) / (1.0 + a**4)

    grads = VqcParams(
        in_proj=np.outer(da, x),
        bias=da,
        angles=g_var,
        out_scale=np.array(float(upstream @ e)),
        out_shift=np.array(float(np.sum(upstream))),
    )
    input_grads = params.in_proj.T @ da
    return grads, input_grads
