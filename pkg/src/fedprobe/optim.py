"""AdamW with decoupled weight decay, stated functionally.

`adamw_step` returns a new (model, state) pair instead of mutating, which
keeps local training trivially replayable.  Step counters are tracked per
class row so that one-vs-all heads trained under a row mask behave exactly
like K independently-optimized binary classifiers: a row that never receives
a sample is neither moved nor decayed, and its bias correction starts from
its own first step.  With no mask this reduces to textbook AdamW.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heads import BatchGradient, HeadModel

__all__ = ["AdamWConfig", "AdamWState", "adamw_step", "sgd_step"]


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class AdamWState:
    """First/second-moment buffers shaped like the model, per-row step counts."""

    config: AdamWConfig
    m_weights: np.ndarray
    v_weights: np.ndarray
    m_bias: np.ndarray | None
    v_bias: np.ndarray | None
    steps: np.ndarray  # (K,) int64, per class row

    @classmethod
    def init(cls, model: HeadModel, config: AdamWConfig) -> "AdamWState":
        has_bias = model.bias is not None
        return cls(
            config,
            np.zeros_like(model.weights),
            np.zeros_like(model.weights),
            np.zeros_like(model.bias) if has_bias else None,
            np.zeros_like(model.bias) if has_bias else None,
            np.zeros(model.num_classes, dtype=np.int64),
        )


def _adamw_update(param, grad, m, v, t, cfg: AdamWConfig):
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad**2
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_param = param - cfg.lr * cfg.weight_decay * param - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_param, m, v


def adamw_step(model: HeadModel, grad: BatchGradient, state: AdamWState,
               row_mask: np.ndarray | None = None) -> tuple[HeadModel, AdamWState]:
    """One decoupled-AdamW step: ``w <- w - lr*wd*w - lr * m_hat/(sqrt(v_hat)+eps)``.

    `row_mask` restricts the update (decay included) to the given class rows;
    masked-out rows keep their parameters, moments, and step counts.
    """
    _check_shapes(model, grad)
    rows = np.ones(model.num_classes, dtype=bool) if row_mask is None else np.asarray(row_mask, bool)
    cfg = state.config
    steps = state.steps + rows
    # masked rows may still sit at t=0; clamp to keep the (discarded) bias
    # correction finite before np.where throws those rows away
    t_safe = np.maximum(steps, 1).astype(np.float64)
    t_col = t_safe[:, None]

    new_w, m_w, v_w = _adamw_update(model.weights, grad.d_weights, state.m_weights,
                                    state.v_weights, t_col, cfg)
    new_w = np.where(rows[:, None], new_w, model.weights)
    m_w = np.where(rows[:, None], m_w, state.m_weights)
    v_w = np.where(rows[:, None], v_w, state.v_weights)

    new_b = m_b = v_b = None
    if model.bias is not None:
        new_b, m_b, v_b = _adamw_update(model.bias, grad.d_bias, state.m_bias,
                                        state.v_bias, t_safe, cfg)
        new_b = np.where(rows, new_b, model.bias)
        m_b = np.where(rows, m_b, state.m_bias)
        v_b = np.where(rows, v_b, state.v_bias)

    return (
        HeadModel(new_w, new_b, model.kind),
        AdamWState(cfg, m_w, v_w, m_b, v_b, steps),
    )


def sgd_step(model: HeadModel, grad: BatchGradient, lr: float,
             row_mask: np.ndarray | None = None) -> HeadModel:
    """Plain-gradient step ``w <- w - lr * grad``; no decay, no moments."""
    _check_shapes(model, grad)
    rows = np.ones(model.num_classes, dtype=bool) if row_mask is None else np.asarray(row_mask, bool)
    new_w = np.where(rows[:, None], model.weights - lr * grad.d_weights, model.weights)
    new_b = None
    if model.bias is not None:
        new_b = np.where(rows, model.bias - lr * grad.d_bias, model.bias)
    return HeadModel(new_w, new_b, model.kind)


def _check_shapes(model: HeadModel, grad: BatchGradient) -> None:
    if grad.d_weights.shape != model.weights.shape:
        raise ValueError(
            f"gradient shape {grad.d_weights.shape} does not match model {model.weights.shape}"
        )
    if (model.bias is None) != (grad.d_bias is None):
        raise ValueError("model and gradient disagree on the presence of a bias")
    if not np.isfinite(grad.d_weights).all() or (
        grad.d_bias is not None and not np.isfinite(grad.d_bias).all()
    ):
        raise ValueError("refusing to apply a non-finite gradient")
