"""
최소 미분 가능 수치 코어

모델 그래프에 필요한 연산만 갖춘 역방향 자동미분 테이프, LSTM 셀,
활성화 함수, Adam 업데이트를 numpy float64로 구현한다.

사용 흐름:
    tape = Tape()
    p = tape.watch(store)              # 파라미터를 기울기 추적 변수로 등록
    loss = ...tape 연산으로 순전파...
    backward(tape, loss)               # store.grads에 기울기 누적
    adam_update(state, store)          # 파라미터 갱신 후 기울기 0으로 초기화

Tape(record=False)는 연산을 기록하지 않으므로 예측(샘플링) 경로에서 그대로 재사용한다.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, logsumexp
from scipy.special import softmax as _softmax

from arm3dnet.core.exceptions import GraphNotRecordedError, ShapeMismatchError

LOG_2PI = float(np.log(2.0 * np.pi))


# ============================================================
# 파라미터 저장소
# ============================================================
class ParamStore:
    """이름 붙은 파라미터 배열과 같은 형상의 기울기 버퍼."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"파라미터 이름 중복: {name}")
        array = np.array(value, dtype=np.float64, copy=True)
        self.params[name] = array
        self.grads[name] = np.zeros_like(array)
        return array

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for grad in self.grads.values():
            grad.fill(0.0)

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.grads.values())))

    def copy(self) -> "ParamStore":
        clone = ParamStore()
        for name, value in self.params.items():
            clone.add(name, value)
        return clone

    def load(self, values: dict[str, np.ndarray]) -> None:
        """같은 이름/형상의 값으로 덮어쓴다."""
        for name, value in values.items():
            if name not in self.params or self.params[name].shape != np.shape(value):
                raise ShapeMismatchError(
                    "ParamStore.load",
                    {name: np.shape(value), "expected": self.params.get(name, np.empty(0)).shape},
                )
            self.params[name][...] = value


def clip_grad_norm(store: ParamStore, max_norm: float | None) -> float:
    """전역 노름이 max_norm을 넘으면 모든 기울기를 같은 비율로 줄인다. 클리핑 전 노름을 반환한다."""
    norm = store.grad_norm()
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for grad in store.grads.values():
            grad *= scale
    return norm


# ============================================================
# 테이프 (역방향 누적)
# ============================================================
class Variable:
    __slots__ = ("value", "grad", "requires_grad")

    def __init__(self, value: np.ndarray, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(np.broadcast_to(g, self.value.shape), dtype=np.float64, copy=True)
        else:
            self.grad += g


class Tape:
    """
    고정 위상 테이프.

    연산 메서드마다 출력 Variable을 만들고, 입력 중 하나라도 기울기를 추적하면
    역전파 클로저를 순서대로 기록한다. backward()는 기록 역순으로 클로저를 실행한다.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._backward: list[Callable[[], None]] = []
        self._watched: dict[str, Variable] = {}
        self._store: ParamStore | None = None

    # ------------------------------------------------------------
    # 변수 생성
    # ------------------------------------------------------------
    def watch(self, store: ParamStore) -> dict[str, Variable]:
        self._store = store
        self._watched = {
            name: Variable(value, requires_grad=self.record) for name, value in store.params.items()
        }
        return self._watched

    @staticmethod
    def constant(value: np.ndarray) -> Variable:
        return Variable(value, requires_grad=False)

    def _op(self, value: np.ndarray, parents: tuple[Variable, ...], grad_fn: Callable[[np.ndarray], None]) -> Variable:
        requires = self.record and any(p.requires_grad for p in parents)
        out = Variable(value, requires_grad=requires)
        if requires:

            def _run() -> None:
                if out.grad is not None:
                    grad_fn(out.grad)

            self._backward.append(_run)
        return out

    # ------------------------------------------------------------
    # 선형 연산
    # ------------------------------------------------------------
    def linear(self, x: Variable, W: Variable, b: Variable | None = None) -> Variable:
        """x W^T + b. W는 (출력, 입력) 방향이다."""
        if x.shape[-1] != W.shape[1] or (b is not None and b.shape != (W.shape[0],)):
            raise ShapeMismatchError(
                "linear", {"x": x.shape, "W": W.shape, "b": b.shape if b is not None else ()}
            )
        value = x.value @ W.value.T
        if b is not None:
            value = value + b.value
        parents = (x, W) if b is None else (x, W, b)

        def grad_fn(g: np.ndarray) -> None:
            x.accumulate(g @ W.value)
            if x.value.ndim == 1:
                W.accumulate(np.outer(g, x.value))
                if b is not None:
                    b.accumulate(g)
            else:
                W.accumulate(g.T @ x.value)
                if b is not None:
                    b.accumulate(g.sum(axis=0))

        return self._op(value, parents, grad_fn)

    def matmul(self, a: Variable, b: Variable) -> Variable:
        if a.shape[-1] != b.shape[0]:
            raise ShapeMismatchError("matmul", {"a": a.shape, "b": b.shape})

        def grad_fn(g: np.ndarray) -> None:
            a.accumulate(g @ b.value.T)
            b.accumulate(a.value.T @ g)

        return self._op(a.value @ b.value, (a, b), grad_fn)

    def add(self, a: Variable, b: Variable) -> Variable:
        def grad_fn(g: np.ndarray) -> None:
            a.accumulate(g)
            b.accumulate(g)

        return self._op(a.value + b.value, (a, b), grad_fn)

    def mul(self, a: Variable, b: Variable) -> Variable:
        def grad_fn(g: np.ndarray) -> None:
            a.accumulate(g * b.value)
            b.accumulate(g * a.value)

        return self._op(a.value * b.value, (a, b), grad_fn)

    def add_const(self, a: Variable, c: float | np.ndarray) -> Variable:
        return self._op(a.value + c, (a,), lambda g: a.accumulate(g))

    def scale(self, a: Variable, c: float) -> Variable:
        return self._op(a.value * c, (a,), lambda g: a.accumulate(g * c))

    def sum(self, a: Variable) -> Variable:
        return self._op(np.asarray(a.value.sum()), (a,), lambda g: a.accumulate(np.full(a.shape, float(g))))

    # ------------------------------------------------------------
    # 활성화 함수
    # ------------------------------------------------------------
    def sigmoid(self, a: Variable) -> Variable:
        s = expit(a.value)
        return self._op(s, (a,), lambda g: a.accumulate(g * s * (1.0 - s)))

    def tanh(self, a: Variable) -> Variable:
        t = np.tanh(a.value)
        return self._op(t, (a,), lambda g: a.accumulate(g * (1.0 - t * t)))

    def softplus(self, a: Variable) -> Variable:
        return self._op(softplus(a.value), (a,), lambda g: a.accumulate(g * expit(a.value)))

    def exp(self, a: Variable) -> Variable:
        e = np.exp(a.value)
        return self._op(e, (a,), lambda g: a.accumulate(g * e))

    # ------------------------------------------------------------
    # 형상 연산
    # ------------------------------------------------------------
    def columns(self, a: Variable, start: int, stop: int) -> Variable:
        def grad_fn(g: np.ndarray) -> None:
            full = np.zeros_like(a.value)
            full[..., start:stop] = g
            a.accumulate(full)

        return self._op(a.value[..., start:stop], (a,), grad_fn)

    def concat(self, parts: list[Variable]) -> Variable:
        """마지막 축으로 이어 붙인다."""
        edges = np.cumsum([0] + [p.shape[-1] for p in parts])

        def grad_fn(g: np.ndarray) -> None:
            for part, lo, hi in zip(parts, edges[:-1], edges[1:]):
                part.accumulate(g[..., lo:hi])

        return self._op(np.concatenate([p.value for p in parts], axis=-1), tuple(parts), grad_fn)

    # ------------------------------------------------------------
    # 음의 로그우도 (융합 연산)
    # ------------------------------------------------------------
    def gmm_nll(self, logits: Variable, mu: Variable, sigma: Variable, z: np.ndarray) -> Variable:
        """
        -log Σ_k softmax(logits)_k N(z; mu_k, sigma_k^2) 를 행마다 계산한다.

        log-sum-exp로만 평가하며 밀도를 직접 지수화하지 않는다.
        기울기는 사후 책임도 r_k를 이용한 닫힌 형태로 계산한다.
        """
        z = np.asarray(z, dtype=np.float64)[..., None]
        log_w = log_softmax(logits.value, axis=-1)
        resid = (z - mu.value) / sigma.value
        log_joint = log_w - 0.5 * resid * resid - np.log(sigma.value) - 0.5 * LOG_2PI
        lse = logsumexp(log_joint, axis=-1)
        post = np.exp(log_joint - lse[..., None])

        def grad_fn(g: np.ndarray) -> None:
            g = np.asarray(g)[..., None]
            logits.accumulate(g * (np.exp(log_w) - post))
            mu.accumulate(-g * post * resid / sigma.value)
            sigma.accumulate(-g * post * (resid * resid - 1.0) / sigma.value)

        return self._op(-lse, (logits, mu, sigma), grad_fn)

    def gaussian_nll(self, mu: Variable, sigma: Variable, z: np.ndarray) -> Variable:
        z = np.asarray(z, dtype=np.float64)
        resid = (z - mu.value) / sigma.value
        value = 0.5 * resid * resid + np.log(sigma.value) + 0.5 * LOG_2PI

        def grad_fn(g: np.ndarray) -> None:
            mu.accumulate(-g * resid / sigma.value)
            sigma.accumulate(g * (1.0 - resid * resid) / sigma.value)

        return self._op(value, (mu, sigma), grad_fn)

    # ------------------------------------------------------------
    # 역전파
    # ------------------------------------------------------------
    def backward(self, loss: Variable) -> None:
        if not self._backward or not loss.requires_grad:
            raise GraphNotRecordedError()
        loss.grad = np.ones_like(loss.value)
        for grad_fn in reversed(self._backward):
            grad_fn()
        self._backward.clear()
        if self._store is not None:
            for name, var in self._watched.items():
                if var.grad is not None:
                    self._store.grads[name] += var.grad


def backward(tape: Tape, loss: Variable) -> ParamStore | None:
    """테이프에 기록된 순전파를 역으로 따라가 감시 중인 ParamStore에 기울기를 누적한다."""
    tape.backward(loss)
    return tape._store


# ============================================================
# 순수 함수 (단일 평가용)
# ============================================================
def dense_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Wx + b. 출력 차원은 W의 행 수다."""
    W, b, x = (np.asarray(a, dtype=np.float64) for a in (W, b, x))
    if W.ndim != 2 or x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ShapeMismatchError("dense_forward", {"W": W.shape, "b": b.shape, "x": x.shape})
    return x @ W.T + b


def softplus(x: np.ndarray | float) -> np.ndarray | float:
    """log(1 + exp(x)). 큰 x에서는 x + log1p(exp(-x)) 형태로 평가되어 넘침이 없다."""
    return np.logaddexp(0.0, x)


def softmax(v: np.ndarray) -> np.ndarray:
    """마지막 축 softmax (최대값을 빼서 계산)."""
    return _softmax(np.asarray(v, dtype=np.float64), axis=-1)


# ============================================================
# LSTM
# ============================================================
@dataclass(frozen=True)
class LstmCellParams:
    """
    게이트 순서는 (입력, 망각, 후보, 출력)이며 각 블록이 H행을 차지한다.
    W_ih: (4H, I), W_hh: (4H, H), b: (4H,)
    """

    W_ih: np.ndarray
    W_hh: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        h4, _ = np.shape(self.W_ih)
        if h4 % 4 or np.shape(self.W_hh) != (h4, h4 // 4) or np.shape(self.b) != (h4,):
            raise ShapeMismatchError(
                "LstmCellParams", {"W_ih": np.shape(self.W_ih), "W_hh": np.shape(self.W_hh), "b": np.shape(self.b)}
            )

    @property
    def hidden_size(self) -> int:
        return np.shape(self.W_hh)[1]

    @property
    def input_size(self) -> int:
        return np.shape(self.W_ih)[1]


def lstm_cell(
    tape: Tape,
    x: Variable,
    h_prev: Variable,
    c_prev: Variable,
    W_ih: Variable,
    W_hh: Variable,
    b: Variable,
) -> tuple[Variable, Variable]:
    """표준 LSTM 한 스텝 (테이프 연산). 입력은 (N, I), 상태는 (N, H)."""
    H = h_prev.shape[-1]
    gates = tape.add(tape.linear(x, W_ih, b), tape.linear(h_prev, W_hh))
    i = tape.sigmoid(tape.columns(gates, 0, H))
    f = tape.sigmoid(tape.columns(gates, H, 2 * H))
    g = tape.tanh(tape.columns(gates, 2 * H, 3 * H))
    o = tape.sigmoid(tape.columns(gates, 3 * H, 4 * H))
    c = tape.add(tape.mul(f, c_prev), tape.mul(i, g))
    h = tape.mul(o, tape.tanh(c))
    return h, c


def lstm_step(
    params: LstmCellParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """기울기 없이 LSTM 한 스텝을 평가한다. x는 (I,) 또는 (N, I)."""
    x, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x, h_prev, c_prev))
    if x.shape[-1] != params.input_size or h_prev.shape[-1] != params.hidden_size or h_prev.shape != c_prev.shape:
        raise ShapeMismatchError(
            "lstm_step", {"x": x.shape, "h_prev": h_prev.shape, "c_prev": c_prev.shape}
        )
    tape = Tape(record=False)
    const = tape.constant
    h, c = lstm_cell(
        tape, const(x), const(h_prev), const(c_prev), const(params.W_ih), const(params.W_hh), const(params.b)
    )
    return h.value, c.value


# ============================================================
# 초기화
# ============================================================
def init_dense(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_lstm(rng: np.random.Generator, input_size: int, hidden_size: int) -> LstmCellParams:
    """±1/sqrt(fan_in) 균등 초기화, 편향 0, 망각 게이트 편향 +1."""
    b = np.zeros(4 * hidden_size)
    b[hidden_size : 2 * hidden_size] = 1.0
    return LstmCellParams(
        W_ih=init_dense(rng, 4 * hidden_size, input_size),
        W_hh=init_dense(rng, 4 * hidden_size, hidden_size),
        b=b,
    )


# ============================================================
# Adam
# ============================================================
@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(state: AdamState, store: ParamStore) -> tuple[ParamStore, AdamState]:
    """
    편향 보정을 포함한 Adam 한 스텝. 스텝 카운터를 올리고 사용한 기울기는 0으로 만든다.
    """
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step

    for name, param in store.params.items():
        g = store.grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        m, v = state.m[name], state.v[name]

        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        param -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)

    store.zero_grad()
    return store, state
