"""scikit-learn style wrappers around the generator and the full agent."""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .demos import BatchConfig, DemoSet, NetConfig, bc_objective, pretrain_generator
from .errors import InvalidConfigError
from .harness import evaluate, preset, run_experiment
from .nn import AdamState, adam_step, forward, mlp_init


class BehaviorCloningRegressor(RegressorMixin, BaseEstimator):
    """Tanh MLP regressing actions on states, trained by minibatch Adam.

    ``fit`` treats the rows of ``X``/``y`` as one pool of state-action
    pairs. ``fit_demos`` trains from a :class:`DemoSet` with the
    trajectory-then-transition sampler used for generator pretraining.
    Targets must lie in ``[-1, 1]`` because of the tanh output.
    """

    def __init__(self, hidden=(32, 64, 32), n_iter=20_000, lr=1e-4, l2_coef=1e-4, batch_size=64, random_state=0):
        self.hidden = hidden
        self.n_iter = n_iter
        self.lr = lr
        self.l2_coef = l2_coef
        self.batch_size = batch_size
        self.random_state = random_state

    def _net_cfg(self) -> NetConfig:
        return NetConfig(tuple(self.hidden), "tanh", "tanh", self.lr, self.l2_coef)

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, dtype=np.float64, y_numeric=True)
        self._y_1d = y.ndim == 1
        y = y.reshape(len(y), -1)
        if np.abs(y).max() > 1.0:
            raise InvalidConfigError("targets must lie in [-1, 1]")
        if self.n_iter < 0 or self.batch_size < 1:
            raise InvalidConfigError("n_iter must be non-negative and batch_size positive")
        seed = int(self.random_state or 0)
        cfg = self._net_cfg()
        net = mlp_init(cfg.layer_sizes(X.shape[1], y.shape[1]), "tanh", "tanh", seed=seed)
        opt = AdamState.for_net(net, lr=self.lr, l2_coef=self.l2_coef)
        rng = np.random.default_rng([seed, 1])
        history = []
        for _ in range(self.n_iter):
            idx = rng.integers(0, len(X), size=min(self.batch_size, len(X)))
            loss, grad = bc_objective(net, X[idx], y[idx])
            adam_step(net, grad, opt)
            history.append(loss)
        self._finish(net, history, X.shape[1])
        return self

    def fit_demos(self, demos: DemoSet, n_traj=10):
        net, history = pretrain_generator(
            demos, self.n_iter, BatchConfig(n_traj, self.batch_size), self._net_cfg(), seed=int(self.random_state or 0)
        )
        self._y_1d = False
        self._finish(net, history, net.in_dim)
        return self

    def _finish(self, net, history, n_features):
        self.net_ = net
        self.loss_curve_ = history
        self.n_features_in_ = n_features

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        out = forward(self.net_, X)
        return out[:, 0] if self._y_1d else out


class TD3fGAgent(BaseEstimator):
    """A preset experiment run behind ``fit``/``predict``/``score``.

    ``fit`` ignores ``X`` and ``y``; the agent gathers its own data from the
    environment named in the preset. ``predict`` returns deterministic
    actions and ``score`` the mean evaluation return.
    """

    def __init__(self, preset="td3fg", total_steps=None, random_state=0, overrides=None):
        self.preset = preset
        self.total_steps = total_steps
        self.random_state = random_state
        self.overrides = overrides

    def make_config(self):
        config = preset(self.preset)
        if self.total_steps is not None:
            config = config.with_total_steps(int(self.total_steps))
        if self.overrides:
            config = dataclasses.replace(config, **self.overrides)
        return config

    def fit(self, X=None, y=None, demos: DemoSet | None = None):
        self.config_ = self.make_config()
        self.runlog_, self.nets_ = run_experiment(self.config_, int(self.random_state or 0), demos=demos, return_agent=True)
        self.n_features_in_ = self.nets_.obs_dim
        return self

    def predict(self, X):
        check_is_fitted(self, "nets_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.nets_.actor, X)

    def score(self, X=None, y=None, episodes=5, seed=12345):
        check_is_fitted(self, "nets_")
        return evaluate(self.nets_.actor, self.config_.env_spec(), episodes, seed).mean_return
