"""Quantum LSTM cell: six variational circuit blocks wired through the
classical gate algebra, with exact end-to-end gradients.

Per step, with v_t = concat(h_{t-1}, x_t):

    f_t = sigmoid(VQC1(v_t))          forget gate
    i_t = sigmoid(VQC2(v_t))          input gate
    g_t = tanh(VQC3(v_t))             candidate cell values
    c_t = f_t * c_{t-1} + i_t * g_t
    o_t = sigmoid(VQC4(v_t))          output gate
    h_t = sigmoid(VQC5(o_t * tanh(c_t)))
    y_t = VQC6(o_t * tanh(c_t))

The hidden size is pinned to 4 so circuit readouts map one-to-one onto gate
vectors.  A flag drops the sigmoid around VQC5 for the published variant of
the cell that emits the circuit value directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neural import sigmoid
from .vqc import EvalCounter, VqcParams, init_vqc_params, vqc_forward, vqc_gradients, zeros_like_params

HIDDEN = 4


@dataclass
class QlstmParams:
    """Six circuit blocks plus the scalar read-out head.

    vqc1-4 consume concat(h, x) (d_in = 4 + d_x); vqc5 and vqc6 consume the
    4-vector o*tanh(c).  sigma_hidden selects whether h_t passes through a
    sigmoid (default) or is the raw VQC5 output.
    """

    vqc1: VqcParams
    vqc2: VqcParams
    vqc3: VqcParams
    vqc4: VqcParams
    vqc5: VqcParams
    vqc6: VqcParams
    head_w: np.ndarray  # (4,)
    head_b: np.ndarray  # ()
    sigma_hidden: bool = True

    @property
    def d_x(self) -> int:
        return self.vqc1.d_in - HIDDEN

    def vqcs(self) -> tuple[VqcParams, ...]:
        return (self.vqc1, self.vqc2, self.vqc3, self.vqc4, self.vqc5, self.vqc6)

    def tree(self, prefix: str = "") -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for k, vqc in enumerate(self.vqcs(), start=1):
            out.update(vqc.tree(prefix=f"{prefix}vqc{k}."))
        out[prefix + "head_w"] = self.head_w
        out[prefix + "head_b"] = self.head_b
        return out


@dataclass
class QlstmState:
    h: np.ndarray  # (4,)
    c: np.ndarray  # (4,)
    y: np.ndarray  # (4,)


def init_qlstm_params(d_x: int, rng: np.random.Generator, sigma_hidden: bool = True) -> QlstmParams:
    if d_x < 1:
        raise ValueError(f"d_x must be >= 1, got {d_x}")
    k = 1.0 / np.sqrt(HIDDEN)
    return QlstmParams(
        vqc1=init_vqc_params(HIDDEN + d_x, rng),
        vqc2=init_vqc_params(HIDDEN + d_x, rng),
        vqc3=init_vqc_params(HIDDEN + d_x, rng),
        vqc4=init_vqc_params(HIDDEN + d_x, rng),
        vqc5=init_vqc_params(HIDDEN, rng),
        vqc6=init_vqc_params(HIDDEN, rng),
        head_w=rng.uniform(-k, k, size=HIDDEN),
        head_b=np.array(0.0),
        sigma_hidden=sigma_hidden,
    )


def zeros_like_qlstm(params: QlstmParams) -> QlstmParams:
    return QlstmParams(
        vqc1=zeros_like_params(params.vqc1),
        vqc2=zeros_like_params(params.vqc2),
        vqc3=zeros_like_params(params.vqc3),
        vqc4=zeros_like_params(params.vqc4),
        vqc5=zeros_like_params(params.vqc5),
        vqc6=zeros_like_params(params.vqc6),
        head_w=np.zeros_like(params.head_w),
        head_b=np.zeros_like(params.head_b),
        sigma_hidden=params.sigma_hidden,
    )


def initial_state() -> QlstmState:
    """h starts at the sigmoid image of zero, c and y at zero."""
    return QlstmState(h=np.full(HIDDEN, 0.5), c=np.zeros(HIDDEN), y=np.zeros(HIDDEN))


@dataclass
class QlstmStepCache:
    x: np.ndarray
    v: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c_prev: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    r: np.ndarray  # o * tanh(c), the input to vqc5/vqc6
    h: np.ndarray
    y: np.ndarray


def qlstm_cell_step(
    params: QlstmParams,
    x_t: np.ndarray,
    prev: QlstmState,
    counter: EvalCounter | None = None,
) -> tuple[QlstmState, QlstmStepCache]:
    """One recurrence step; exactly six circuit evaluations."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (params.d_x,):
        raise ValueError(f"x_t shape {x_t.shape} does not match d_x {params.d_x}")
    v = np.concatenate([prev.h, x_t])
    f = sigmoid(vqc_forward(params.vqc1, v, counter).values)
    i = sigmoid(vqc_forward(params.vqc2, v, counter).values)
    g = np.tanh(vqc_forward(params.vqc3, v, counter).values)
    c = f * prev.c + i * g
    o = sigmoid(vqc_forward(params.vqc4, v, counter).values)
    tanh_c = np.tanh(c)
    r = o * tanh_c
    h_raw = vqc_forward(params.vqc5, r, counter).values
    h = sigmoid(h_raw) if params.sigma_hidden else h_raw
    y = vqc_forward(params.vqc6, r, counter).values
    state = QlstmState(h=h, c=c, y=y)
    cache = QlstmStepCache(
        x=x_t, v=v, f=f, i=i, g=g, o=o, c_prev=prev.c, c=c, tanh_c=tanh_c, r=r, h=h, y=y
    )
    return state, cache


@dataclass
class QlstmCaches:
    steps: list[QlstmStepCache]
    y_final: np.ndarray = field(repr=False, default=None)


def qlstm_forward(
    params: QlstmParams,
    sequence: list[np.ndarray],
    counter: EvalCounter | None = None,
) -> tuple[float, QlstmCaches]:
    """Run the cell over the sequence; the scalar output is the linear head
    over y_T (sigmoid is applied by the caller for classification)."""
    if len(sequence) == 0:
        raise ValueError("sequence must be non-empty")
    state = initial_state()
    steps = []
    for x_t in sequence:
        state, cache = qlstm_cell_step(params, x_t, state, counter)
        steps.append(cache)
    logit = float(params.head_w @ state.y + params.head_b)
    return logit, QlstmCaches(steps=steps, y_final=state.y)


def _vqc_grad_into(
    acc: VqcParams,
    params: VqcParams,
    x: np.ndarray,
    upstream: np.ndarray,
    counter: EvalCounter | None,
) -> np.ndarray:
    """Accumulate one circuit's gradients; zero upstream is exactly zero
    everywhere, so the shifted evaluations are skipped in that case."""
    if not np.any(upstream):
        return np.zeros_like(x)
    g, dx = vqc_gradients(params, x, upstream, counter)
    acc.in_proj += g.in_proj
    acc.bias += g.bias
    acc.angles += g.angles
    acc.out_scale += g.out_scale
    acc.out_shift += g.out_shift
    return dx


def qlstm_backward(
    params: QlstmParams,
    caches: QlstmCaches,
    upstream: float,
    counter: EvalCounter | None = None,
) -> tuple[QlstmParams, np.ndarray]:
    """Exact gradients of upstream * logit for every parameter and input.

    Chains parameter-shift circuit gradients through the gate algebra,
    accumulating backwards through time.  Returns (gradients, dx) where dx
    is (T, d_x).
    """
    grads = zeros_like_qlstm(params)
    T = len(caches.steps)
    grads.head_w += upstream * caches.y_final
    grads.head_b += upstream
    dy = upstream * params.head_w
    dh = np.zeros(HIDDEN)
    dc = np.zeros(HIDDEN)
    dx = np.zeros((T, params.d_x))
    for t in range(T - 1, -1, -1):
        s = caches.steps[t]
        # h_t and y_t both read r = o * tanh(c)
        if params.sigma_hidden:
            dh_raw = dh * s.h * (1.0 - s.h)
        else:
            dh_raw = dh
        dr = _vqc_grad_into(grads.vqc5, params.vqc5, s.r, dh_raw, counter)
        dr += _vqc_grad_into(grads.vqc6, params.vqc6, s.r, dy, counter)
        do = dr * s.tanh_c
        dc = dc + dr * s.o * (1.0 - s.tanh_c * s.tanh_c)
        df = dc * s.c_prev
        di = dc * s.g
        dg = dc * s.i
        dc_prev = dc * s.f
        dv = _vqc_grad_into(grads.vqc1, params.vqc1, s.v, df * s.f * (1.0 - s.f), counter)
        dv += _vqc_grad_into(grads.vqc2, params.vqc2, s.v, di * s.i * (1.0 - s.i), counter)
        dv += _vqc_grad_into(grads.vqc3, params.vqc3, s.v, dg * (1.0 - s.g * s.g), counter)
        dv += _vqc_grad_into(grads.vqc4, params.vqc4, s.v, do * s.o * (1.0 - s.o), counter)
        dh = dv[:HIDDEN]
        dx[t] = dv[HIDDEN:]
        dc = dc_prev
        dy = np.zeros(HIDDEN)
    return grads, dx
