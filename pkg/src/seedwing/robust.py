"""PGD adversarial training for regression with a Lipschitz penalty.

The attack maximizes the squared-error loss inside an inf-norm ball clipped
to the data box; the penalty is the largest empirical Lipschitz quotient
|f(x) - f(x*)| / ||x - x*||_inf over the attacked batch, added to the clean
and adversarial MSE terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .mlp import Gradient, Network


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.01
    steps: int = 10
    step_size: float | None = None       # defaults to epsilon / 4
    restarts: int = 2

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def step(self) -> float:
        return self.epsilon / 4.0 if self.step_size is None else self.step_size


@dataclass(frozen=True)
class RobustTrainConfig:
    attack: AttackConfig = field(default_factory=AttackConfig)
    lambda_lip: float = 0.01
    epochs: int = 2000
    lr: float = 0.02
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self):
        if self.lambda_lip < 0:
            raise ValueError("lambda_lip must be >= 0")


def _project(X_adv, X0, eps, box_lo, box_hi):
    X_adv = np.minimum(np.maximum(X_adv, X0 - eps), X0 + eps)
    return np.minimum(np.maximum(X_adv, box_lo), box_hi)


def pgd_attack_batch(net: Network, X: np.ndarray, Y: np.ndarray,
                     cfg: AttackConfig, box, rng: np.random.Generator) -> np.ndarray:
    """Best-iterate PGD per row; the unperturbed point is always a candidate."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    box_lo = np.asarray(box[0], dtype=float)
    box_hi = np.asarray(box[1], dtype=float)

    best_X = X.copy()
    best_loss = (mlp.forward_batch(net, X) - Y) ** 2

    for restart in range(cfg.restarts):
        if restart == 0:
            cur = X.copy()
        else:
            cur = _project(X + rng.uniform(-cfg.epsilon, cfg.epsilon, size=X.shape),
                           X, cfg.epsilon, box_lo, box_hi)
        for _ in range(cfg.steps):
            g = mlp.input_gradient(net, cur, Y)
            cur = _project(cur + cfg.step * np.sign(g), X, cfg.epsilon, box_lo, box_hi)
            loss = (mlp.forward_batch(net, cur) - Y) ** 2
            better = loss > best_loss
            best_X[better] = cur[better]
            best_loss[better] = loss[better]
    return best_X


def pgd_attack(net: Network, x, y: float, cfg: AttackConfig, box,
               seed: int = 0) -> np.ndarray:
    """Worst-case input within the epsilon-ball around x (intersected with box)."""
    rng = np.random.default_rng(seed)
    return pgd_attack_batch(net, np.asarray(x, dtype=float)[None, :],
                            np.array([y]), cfg, box, rng)[0]


class CoincidentPairError(ValueError):
    pass


def lipschitz_penalty(net: Network, pairs) -> float:
    """Max |f(x) - f(x*)| / ||x - x*||_inf over the given (x, x*) pairs."""
    worst = 0.0
    for x, x_adv in pairs:
        d = float(np.max(np.abs(np.asarray(x) - np.asarray(x_adv))))
        if d == 0.0:
            raise CoincidentPairError("coincident pair in lipschitz_penalty")
        q = abs(mlp.forward(net, x) - mlp.forward(net, x_adv)) / d
        worst = max(worst, q)
    return worst


def empirical_lipschitz(net: Network, X: np.ndarray, cfg: AttackConfig, box,
                        seed: int = 0) -> float:
    """Fresh-PGD Lipschitz quotient maximized over the dataset."""
    rng = np.random.default_rng(seed)
    Y = mlp.forward_batch(net, X)
    X_adv = pgd_attack_batch(net, X, Y, cfg, box, rng)
    d = np.max(np.abs(X - X_adv), axis=1)
    keep = d > 0
    if not keep.any():
        return 0.0
    q = np.abs(mlp.forward_batch(net, X[keep]) - mlp.forward_batch(net, X_adv[keep])) / d[keep]
    return float(q.max())


def _lipschitz_term_gradient(net: Network, x, x_adv) -> Gradient:
    """Parameter gradient of |f(x) - f(x*)| / ||x - x*||_inf for one pair."""
    d = float(np.max(np.abs(x - x_adv)))
    sign = 1.0 if mlp.forward(net, x) >= mlp.forward(net, x_adv) else -1.0
    acts_a, pres_a = mlp._forward_trace(net, x[None, :])
    acts_b, pres_b = mlp._forward_trace(net, x_adv[None, :])
    one = np.ones((1, 1))
    ga = mlp._backprop_from_output(net, acts_a, pres_a, one * (sign / d))
    gb = mlp._backprop_from_output(net, acts_b, pres_b, one * (-sign / d))
    return ga.add_(gb)


def train_adversarial(net0: Network, X: np.ndarray, Y: np.ndarray,
                      cfg: RobustTrainConfig, box=None) -> Network:
    """Min-max training: every batch is attacked with PGD, and the loss is
    the mean of clean and adversarial MSE plus lambda_lip times the batch
    Lipschitz quotient (so epsilon -> 0, lambda = 0 is plain training)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if box is None:
        box = (X.min(axis=0), X.max(axis=0))
    rng = np.random.default_rng(cfg.seed)
    attack_rng = np.random.default_rng(cfg.seed + 1)
    cur = net0
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            Xb, Yb = X[idx], Y[idx]
            Xa = pgd_attack_batch(cur, Xb, Yb, cfg.attack, box, attack_rng)
            # equal-weight average of clean and adversarial terms, so the
            # epsilon->0 limit reproduces plain training exactly
            g = mlp.gradient(cur, Xb, Yb, loss="mse").scaled(0.5)
            g.add_(mlp.gradient(cur, Xa, Yb, loss="mse"), f=0.5)
            if cfg.lambda_lip > 0:
                d = np.max(np.abs(Xb - Xa), axis=1)
                live = np.flatnonzero(d > 0)
                if live.size:
                    fa = mlp.forward_batch(cur, Xb[live])
                    fb = mlp.forward_batch(cur, Xa[live])
                    k = live[int(np.argmax(np.abs(fa - fb) / d[live]))]
                    g.add_(_lipschitz_term_gradient(cur, Xb[k], Xa[k]),
                           f=cfg.lambda_lip)
            cur = mlp.apply_gradient(cur, g, cfg.lr)
        if not math.isfinite(mlp.mse(cur, X[:1], Y[:1])):
            raise mlp.TrainingDivergedError(epoch)
    final = mlp.rmse(cur, X, Y)
    if not math.isfinite(final):
        raise mlp.TrainingDivergedError(cfg.epochs - 1)
    meta = dict(cur.meta)
    meta.update({"kind": "adversarial", "epochs": cfg.epochs, "lr": cfg.lr,
                 "seed": cfg.seed, "batch_size": cfg.batch_size,
                 "epsilon": cfg.attack.epsilon, "pgd_steps": cfg.attack.steps,
                 "restarts": cfg.attack.restarts, "lambda_lip": cfg.lambda_lip,
                 "train_rmse": final})
    return Network(cur.layers, norm=cur.norm, meta=meta)
