"""
ARM3Dnet 모델 서비스

직전 타깃, 이전 순환 상태, 그래프 합성곱 공변량을 합쳐 스텝마다 혼합 분포를
내는 자기회귀 순환 모델을 조립한다.

스텝 t (0부터 시작)의 계산:
    z_prev = Z[:, t-1]   (t = 0이면 0)
    GC_t   = (W ∘ Ã_t) X_t          X_t에 z_prev 열을 붙일 수 있다 (gc_include_target)
    h_t    = LSTM([z_prev, GC_t], h_{t-1})   노드가 배치 축, 파라미터는 모든 노드가 공유
    θ_t    = head(h_t)              혼합 가중치/평균/표준편차

조건 구간은 관측값을 넣는 교사 강제(teacher forcing)로, 예측 구간은
뽑은 값을 다음 입력으로 되먹이는 조상 샘플링으로 진행한다.
"""

import logging

import numpy as np

from arm3dnet.core.exceptions import CovariatesUnavailableError, MissingTargetsError, ShapeMismatchError
from arm3dnet.models.density import GmmParams
from arm3dnet.models.forecast import ConditionedState, ForecastArtifact, RecurrentState, StepInput
from arm3dnet.models.graph import DynamicAdjacency
from arm3dnet.models.panel import TimeSeriesPanel
from arm3dnet.schemas.configs import Arm3dnetConfig
from arm3dnet.services.density import gmm_moments, gmm_sample, head_forward, params_from_head
from arm3dnet.services.graph import diffusion_op, init_edge_filter
from arm3dnet.services.nn_core import ParamStore, Tape, Variable, backward, init_dense, init_lstm, lstm_cell

logger = logging.getLogger(__name__)


# ============================================================
# 파라미터
# ============================================================
def _head_keys(cfg: Arm3dnetConfig) -> tuple[str, ...]:
    return ("p", "mu", "sigma") if cfg.likelihood == "gmm" else ("mu", "sigma")


def param_shapes(cfg: Arm3dnetConfig, n_nodes: int) -> dict[str, tuple[int, ...]]:
    """이름별 파라미터 형상. 체크포인트 검증에도 쓴다."""
    H, K = cfg.hidden_size, cfg.n_components
    shapes: dict[str, tuple[int, ...]] = {"graph.W": (n_nodes, n_nodes)}
    for layer in range(cfg.n_layers):
        inputs = 1 + cfg.gc_dim if layer == 0 else H
        shapes[f"lstm.{layer}.W_ih"] = (4 * H, inputs)
        shapes[f"lstm.{layer}.W_hh"] = (4 * H, H)
        shapes[f"lstm.{layer}.b"] = (4 * H,)
    for key in _head_keys(cfg):
        shapes[f"head.W_{key}"] = (K, H)
        shapes[f"head.b_{key}"] = (K,)
    return shapes


def init_params(cfg: Arm3dnetConfig, n_nodes: int, rng: np.random.Generator) -> ParamStore:
    store = ParamStore()
    store.add("graph.W", init_edge_filter(rng, n_nodes))
    for layer in range(cfg.n_layers):
        inputs = 1 + cfg.gc_dim if layer == 0 else cfg.hidden_size
        cell = init_lstm(rng, inputs, cfg.hidden_size)
        store.add(f"lstm.{layer}.W_ih", cell.W_ih)
        store.add(f"lstm.{layer}.W_hh", cell.W_hh)
        store.add(f"lstm.{layer}.b", cell.b)
    for key in _head_keys(cfg):
        store.add(f"head.W_{key}", init_dense(rng, cfg.n_components, cfg.hidden_size))
        store.add(f"head.b_{key}", np.zeros(cfg.n_components))
    return store


def _check_inputs(cfg: Arm3dnetConfig, params: ParamStore, panel: TimeSeriesPanel, graph: DynamicAdjacency) -> None:
    n = panel.n_nodes
    if graph.node_ids != panel.node_ids or graph.t_days < panel.t_days:
        raise ShapeMismatchError(
            "model", {"panel": (n, panel.t_days), "graph": (graph.n_nodes, graph.t_days)}
        )
    if panel.n_features != cfg.covariate_dim:
        raise ShapeMismatchError("model", {"covariates": panel.covariates.shape, "covariate_dim": (cfg.covariate_dim,)})
    if params["graph.W"].shape != (n, n):
        raise ShapeMismatchError("model", {"graph.W": params["graph.W"].shape, "panel": (n,)})


# ============================================================
# 한 스텝
# ============================================================
def _graph_conv(
    tape: Tape,
    cfg: Arm3dnetConfig,
    weights: dict[str, Variable],
    transition: np.ndarray,
    x: np.ndarray,
    z_prev: np.ndarray,
) -> Variable:
    if not cfg.use_covariates:
        return tape.constant(np.zeros((x.shape[0], cfg.gc_dim)))
    features = np.column_stack([x, z_prev]) if cfg.gc_include_target else x
    return diffusion_op(tape, weights["graph.W"], transition, tape.constant(features))


def _recur(
    tape: Tape,
    cfg: Arm3dnetConfig,
    weights: dict[str, Variable],
    z_prev: np.ndarray,
    gc: Variable,
    h: list[Variable],
    c: list[Variable],
) -> tuple[Variable | None, Variable, Variable, list[Variable], list[Variable]]:
    x = tape.concat([tape.constant(np.asarray(z_prev)[:, None]), gc])
    new_h, new_c = [], []
    for layer in range(cfg.n_layers):
        h_l, c_l = lstm_cell(
            tape,
            x,
            h[layer],
            c[layer],
            weights[f"lstm.{layer}.W_ih"],
            weights[f"lstm.{layer}.W_hh"],
            weights[f"lstm.{layer}.b"],
        )
        new_h.append(h_l)
        new_c.append(c_l)
        x = h_l
    logits, mu, sigma = head_forward(tape, x, weights, cfg.sigma_link, cfg.sigma_floor)
    return logits, mu, sigma, new_h, new_c


def _step_nll(tape: Tape, logits: Variable | None, mu: Variable, sigma: Variable, z: np.ndarray) -> Variable:
    if logits is None:
        return tape.gaussian_nll(mu, sigma, z[:, None])
    return tape.gmm_nll(logits, mu, sigma, z)


def graph_convolution(
    cfg: Arm3dnetConfig, params: ParamStore, transition: np.ndarray, x: np.ndarray, z_prev: np.ndarray
) -> np.ndarray:
    """한 날짜의 GC 행렬 (N, gc_dim)."""
    tape = Tape(record=False)
    return _graph_conv(tape, cfg, tape.watch(params), np.asarray(transition), np.asarray(x), np.asarray(z_prev)).value


def forward_step(cfg: Arm3dnetConfig, params: ParamStore, step: StepInput) -> tuple[GmmParams, RecurrentState]:
    """
    노드별로 [z_prev_i, gc_i]를 LSTM에 넣고 그 은닉 출력으로 혼합 파라미터를 만든다.

    Returns:
        (노드별 GmmParams (N, K), 새 순환 상태)
    """
    if step.gc.shape[1] != cfg.gc_dim or len(step.state.h) != cfg.n_layers:
        raise ShapeMismatchError(
            "forward_step", {"gc": step.gc.shape, "gc_dim": (cfg.gc_dim,), "layers": (len(step.state.h),)}
        )
    tape = Tape(record=False)
    weights = tape.watch(params)
    h = [tape.constant(a) for a in step.state.h]
    c = [tape.constant(a) for a in step.state.c]
    logits, mu, sigma, h, c = _recur(tape, cfg, weights, step.z_prev, tape.constant(step.gc), h, c)
    state = RecurrentState(h=tuple(v.value for v in h), c=tuple(v.value for v in c))
    return params_from_head(logits, mu, sigma), state


# ============================================================
# 교사 강제 전개
# ============================================================
def _unroll(
    tape: Tape,
    cfg: Arm3dnetConfig,
    weights: dict[str, Variable],
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    steps: int,
    loss_from: int | None,
) -> tuple[Variable | None, np.ndarray, list[Variable], list[Variable]]:
    """
    관측값을 넣으며 steps 스텝을 전개한다.

    Returns:
        (loss_from 이후 스텝 NLL 합 변수, (N, steps) 스텝별 NLL, 마지막 h, c)
    """
    n = panel.n_nodes
    zeros = np.zeros((n, cfg.hidden_size))
    h = [tape.constant(zeros) for _ in range(cfg.n_layers)]
    c = [tape.constant(zeros) for _ in range(cfg.n_layers)]
    nll = np.empty((n, steps))
    total = None
    z_prev = np.zeros(n)
    for t in range(steps):
        gc = _graph_conv(tape, cfg, weights, graph.transitions[t], panel.covariates[t], z_prev)
        logits, mu, sigma, h, c = _recur(tape, cfg, weights, z_prev, gc, h, c)
        z = panel.targets[:, t]
        step = _step_nll(tape, logits, mu, sigma, z)
        nll[:, t] = step.value.reshape(n)
        if loss_from is not None and t >= loss_from:
            term = tape.sum(step)
            total = term if total is None else tape.add(total, term)
        z_prev = z
    return total, nll, h, c


def condition(
    cfg: Arm3dnetConfig, params: ParamStore, panel: TimeSeriesPanel, graph: DynamicAdjacency
) -> ConditionedState:
    """
    조건 구간 [1, t0-1]을 교사 강제로 통과시킨다. 입력은 항상 관측값이며 샘플은 쓰지 않는다.

    Raises:
        MissingTargetsError: 조건 구간이 비어 있을 때
    """
    _check_inputs(cfg, params, panel, graph)
    if panel.cond_len < 1:
        raise MissingTargetsError(required=1, available=panel.cond_len)
    tape = Tape(record=False)
    _, nll, h, c = _unroll(tape, cfg, tape.watch(params), panel, graph, panel.cond_len, None)
    return ConditionedState(
        state=RecurrentState(h=tuple(v.value for v in h), c=tuple(v.value for v in c)),
        z_last=panel.targets[:, panel.cond_len - 1].copy(),
        step_nll=nll,
    )


def _loss_start(cfg: Arm3dnetConfig, panel: TimeSeriesPanel) -> int:
    return 0 if cfg.full_range_loss else panel.cond_len


def window_nll(
    cfg: Arm3dnetConfig, params: ParamStore, panel: TimeSeriesPanel, graph: DynamicAdjacency
) -> float:
    """예측 구간 (i, t) 전체에 대한 평균 NLL. 전 구간을 교사 강제로 평가한다."""
    _check_inputs(cfg, params, panel, graph)
    tape = Tape(record=False)
    _, nll, _, _ = _unroll(tape, cfg, tape.watch(params), panel, graph, panel.t_days, None)
    return float(nll[:, _loss_start(cfg, panel) :].mean())


def window_nll_grad(
    cfg: Arm3dnetConfig, params: ParamStore, panel: TimeSeriesPanel, graph: DynamicAdjacency
) -> float:
    """window_nll을 기록하며 계산하고 기울기를 params.grads에 누적한다. 손실 값을 반환한다."""
    _check_inputs(cfg, params, panel, graph)
    start = _loss_start(cfg, panel)
    tape = Tape()
    total, _, _, _ = _unroll(tape, cfg, tape.watch(params), panel, graph, panel.t_days, start)
    loss = tape.scale(total, 1.0 / (panel.n_nodes * (panel.t_days - start)))
    backward(tape, loss)
    return float(loss.value)


# ============================================================
# 조상 샘플링
# ============================================================
def prediction_inputs(
    cfg: Arm3dnetConfig, panel: TimeSeriesPanel, graph: DynamicAdjacency, horizon: int | None = None
) -> tuple[DynamicAdjacency, np.ndarray]:
    """
    예측 스텝별 전이 행렬과 공변량.

    기본은 조건 구간 마지막 날 값을 유지한다. use_future_covariates면 패널의 실제 값을 쓴다.

    Raises:
        CovariatesUnavailableError: 실제 공변량이 horizon보다 짧을 때
    """
    start = panel.cond_len
    horizon = horizon or panel.pred_len
    if cfg.use_future_covariates:
        available = min(panel.t_days, graph.t_days) - start
        if horizon > available:
            raise CovariatesUnavailableError(horizon, available)
        return graph.slice_days(start, horizon), panel.covariates[start : start + horizon]
    last = start - 1
    held = DynamicAdjacency(
        node_ids=graph.node_ids,
        per_day=np.repeat(graph.per_day[last][None], horizon, axis=0),
        transitions=np.repeat(graph.transitions[last][None], horizon, axis=0),
        threshold=graph.threshold,
        window=graph.window,
    )
    return held, np.repeat(panel.covariates[last][None], horizon, axis=0)


def ancestral_sample(
    cfg: Arm3dnetConfig,
    params: ParamStore,
    conditioned: ConditionedState,
    graph: DynamicAdjacency,
    covariates: np.ndarray,
    rng: np.random.Generator,
) -> ForecastArtifact:
    """
    S개 궤적을 독립 난수 스트림으로 뽑는다. 스텝마다 뽑은 값을 다음 z_prev로 되먹인다.

    graph와 covariates는 예측 스텝 순서로 정렬된 H일치 입력이다.
    """
    horizon = covariates.shape[0]
    if graph.t_days < horizon or covariates.shape[1] != graph.n_nodes:
        raise ShapeMismatchError("ancestral_sample", {"graph": graph.per_day.shape, "covariates": covariates.shape})
    n, S = graph.n_nodes, cfg.n_samples
    samples = np.empty((S, n, horizon))
    means = np.empty((S, n, horizon))

    tape = Tape(record=False)
    weights = tape.watch(params)
    for s, stream in enumerate(rng.spawn(S)):
        h = [tape.constant(a) for a in conditioned.state.h]
        c = [tape.constant(a) for a in conditioned.state.c]
        z_prev = conditioned.z_last
        for step in range(horizon):
            gc = _graph_conv(tape, cfg, weights, graph.transitions[step], covariates[step], z_prev)
            logits, mu, sigma, h, c = _recur(tape, cfg, weights, z_prev, gc, h, c)
            mixture = params_from_head(logits, mu, sigma)
            z_prev = np.asarray(gmm_sample(mixture, stream))
            samples[s, :, step] = z_prev
            means[s, :, step] = gmm_moments(mixture)[0]
    return ForecastArtifact.from_samples(graph.node_ids, samples, means)


def forecast(
    cfg: Arm3dnetConfig,
    params: ParamStore,
    panel: TimeSeriesPanel,
    graph: DynamicAdjacency,
    rng: np.random.Generator,
    horizon: int | None = None,
) -> ForecastArtifact:
    """조건 구간을 통과한 뒤 예측 구간 궤적을 뽑는다."""
    conditioned = condition(cfg, params, panel, graph)
    future_graph, covariates = prediction_inputs(cfg, panel, graph, horizon)
    return ancestral_sample(cfg, params, conditioned, future_graph, covariates, rng)
