"""Dense + stacked gated-recurrent regressor with hand-written gradients.

Layer stack (names follow the reference summary table)::

    bn1 -> dn1 -> bn2 -> do2 -> dn2 -> resh -> bn3 -> lstm1 -> do3 -> bn4
        -> lstm2 -> do4 -> bn5 -> lstm3 -> bn6 -> xy

The recurrent layers see a length-1 sequence with zero initial state, so
each one is a single application of an LSTM cell. The recurrent kernel and
forget gate still exist (and are counted) but receive zero gradient.
"""

import numpy as np

from ..exceptions import InvalidParams, NonFiniteLoss
from .base import Regressor2D, check_fit_data, check_predict_data
from .preprocessing import RssiScaler


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _orthogonal(rng, rows, cols):
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


class Layer:
    trainable = ()
    frozen = ()

    def __init__(self, name):
        self.name = name
        self.grads = {}

    def forward(self, x, training, rng):
        return x

    def backward(self, dout):
        return dout

    def count_params(self):
        t = sum(getattr(self, p).size for p in self.trainable)
        nt = sum(getattr(self, p).size for p in self.frozen)
        return t, nt


class Dense(Layer):
    trainable = ("W", "b")

    def __init__(self, name, n_in, n_out, rng, relu=False):
        super().__init__(name)
        self.W = _glorot(rng, n_in, n_out)
        self.b = np.zeros(n_out)
        self.relu = relu

    def forward(self, x, training, rng):
        self._x = x
        z = x @ self.W + self.b
        if self.relu:
            self._mask = z > 0
            z = z * self._mask
        return z

    def backward(self, dout):
        if self.relu:
            dout = dout * self._mask
        self.grads["W"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.W.T


class BatchNorm(Layer):
    trainable = ("gamma", "beta")
    frozen = ("moving_mean", "moving_var")

    def __init__(self, name, n, momentum=0.99, eps=1e-3):
        super().__init__(name)
        self.gamma = np.ones(n)
        self.beta = np.zeros(n)
        self.moving_mean = np.zeros(n)
        self.moving_var = np.ones(n)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x, training, rng):
        if not training:
            return (x - self.moving_mean) / np.sqrt(self.moving_var + self.eps) * self.gamma + self.beta
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        self._inv_std = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv_std
        m = self.momentum
        self.moving_mean = m * self.moving_mean + (1 - m) * mu
        self.moving_var = m * self.moving_var + (1 - m) * var
        return self._xhat * self.gamma + self.beta

    def backward(self, dout):
        n = dout.shape[0]
        self.grads["gamma"] = (dout * self._xhat).sum(axis=0)
        self.grads["beta"] = dout.sum(axis=0)
        dxhat = dout * self.gamma
        return (self._inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - self._xhat * (dxhat * self._xhat).sum(axis=0)
        )


class Dropout(Layer):
    def __init__(self, name, rate):
        super().__init__(name)
        self.rate = rate

    def forward(self, x, training, rng):
        if not training or self.rate <= 0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask


class LSTMStep(Layer):
    """One LSTM cell step from zero state; gate order (i, f, c, o)."""

    trainable = ("W", "U", "b")

    def __init__(self, name, n_in, units, rng):
        super().__init__(name)
        self.units = units
        self.W = _glorot(rng, n_in, 4 * units)
        self.U = _orthogonal(rng, units, 4 * units)
        self.b = np.zeros(4 * units)
        self.b[units:2 * units] = 1.0  # forget-gate bias

    def forward(self, x, training, rng):
        u = self.units
        h0 = np.zeros((x.shape[0], u))
        c0 = np.zeros((x.shape[0], u))
        z = x @ self.W + h0 @ self.U + self.b
        i = _sigmoid(z[:, :u])
        f = _sigmoid(z[:, u:2 * u])
        g = np.tanh(z[:, 2 * u:3 * u])
        o = _sigmoid(z[:, 3 * u:])
        c = f * c0 + i * g
        tc = np.tanh(c)
        self._cache = (x, h0, c0, i, f, g, o, tc)
        return o * tc

    def backward(self, dh):
        x, h0, c0, i, f, g, o, tc = self._cache
        do = dh * tc
        dc = dh * o * (1.0 - tc**2)
        dz = np.concatenate(
            [dc * g * i * (1 - i), dc * c0 * f * (1 - f), dc * i * (1 - g**2), do * o * (1 - o)],
            axis=1,
        )
        self.grads["W"] = x.T @ dz
        self.grads["U"] = h0.T @ dz
        self.grads["b"] = dz.sum(axis=0)
        return dz @ self.W.T


class Reshape(Layer):
    """Marks the switch to a length-1 sequence; shapes stay (batch, features)."""


def build_stack(n_in, dense_units=(256, 256), lstm_units=(128, 64, 32),
                dropout_rates=(0.3, 0.2, 0.1), rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    d1, d2 = dense_units
    l1, l2, l3 = lstm_units
    r2, r3, r4 = dropout_rates
    return [
        BatchNorm("bn1", n_in),
        Dense("dn1", n_in, d1, rng, relu=True),
        BatchNorm("bn2", d1),
        Dropout("do2", r2),
        Dense("dn2", d1, d2, rng, relu=True),
        Reshape("resh"),
        BatchNorm("bn3", d2),
        LSTMStep("lstm1", d2, l1, rng),
        Dropout("do3", r3),
        BatchNorm("bn4", l1),
        LSTMStep("lstm2", l1, l2, rng),
        Dropout("do4", r4),
        BatchNorm("bn5", l2),
        LSTMStep("lstm3", l2, l3, rng),
        BatchNorm("bn6", l3),
        Dense("xy", l3, 2, rng),
    ]


def stack_forward(layers, x, training, rng=None):
    for layer in layers:
        x = layer.forward(x, training, rng)
    return x


def stack_backward(layers, dout):
    for layer in reversed(layers):
        dout = layer.backward(dout)
    return dout


def mse_loss(pred, target):
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def param_table(layers):
    """(name, trainable, non_trainable) per layer plus totals."""
    rows = [(layer.name, *layer.count_params()) for layer in layers]
    trainable = sum(r[1] for r in rows)
    frozen = sum(r[2] for r in rows)
    return rows, {"total": trainable + frozen, "trainable": trainable, "non_trainable": frozen}


def check_gradients(layers, x, y, eps=1e-6, seed=0):
    """Relative error between analytic and central-difference gradients.

    Runs in training mode; dropout masks are fixed by re-seeding before
    every forward pass. Returns ``{(layer, param): rel_error}`` with
    ``|a - n| / (|a| + |n|)`` over whole arrays (0 when both vanish).
    """
    def loss_at():
        return mse_loss(stack_forward(layers, x, True, np.random.default_rng(seed)), y)[0]

    pred = stack_forward(layers, x, True, np.random.default_rng(seed))
    _, dpred = mse_loss(pred, y)
    stack_backward(layers, dpred)
    analytic = {(l.name, p): l.grads[p].copy() for l in layers for p in l.trainable}

    errors = {}
    for layer in layers:
        for p in layer.trainable:
            arr = getattr(layer, p)
            num = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                up = loss_at()
                arr[idx] = orig - eps
                down = loss_at()
                arr[idx] = orig
                num[idx] = (up - down) / (2 * eps)
            a = analytic[(layer.name, p)]
            denom = np.linalg.norm(a) + np.linalg.norm(num)
            errors[(layer.name, p)] = 0.0 if denom < 1e-12 else float(np.linalg.norm(a - num) / denom)
    return errors


class _Adam:
    def __init__(self, layers, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-7):
        self.layers, self.lr, self.b1, self.b2, self.eps = layers, lr, beta1, beta2, eps
        self.t = 0
        self.m = {(l.name, p): np.zeros_like(getattr(l, p)) for l in layers for p in l.trainable}
        self.v = {k: np.zeros_like(a) for k, a in self.m.items()}

    def step(self):
        self.t += 1
        corr = np.sqrt(1 - self.b2**self.t) / (1 - self.b1**self.t)
        for layer in self.layers:
            for p in layer.trainable:
                key = (layer.name, p)
                g = layer.grads[p]
                self.m[key] = self.b1 * self.m[key] + (1 - self.b1) * g
                self.v[key] = self.b2 * self.v[key] + (1 - self.b2) * g * g
                setattr(layer, p, getattr(layer, p) - self.lr * corr * self.m[key] / (np.sqrt(self.v[key]) + self.eps))


class NNRegressor(Regressor2D):
    """The recurrent regressor trained with Adam on mean squared error.

    Inputs go through :class:`RssiScaler` (sentinel to 0, dBm to (0, 1]);
    targets are standardised internally and mapped back on predict.
    A validation split (by ``groups`` when given) drives early stopping
    on MPE and the best epoch's weights are kept.
    """

    def __init__(
        self,
        dense_units=(256, 256),
        lstm_units=(128, 64, 32),
        dropout_rates=(0.3, 0.2, 0.1),
        learning_rate=1e-3,
        batch_size=128,
        epochs=30,
        validation_fraction=0.1,
        patience=5,
        random_state=0,
    ):
        self.dense_units = dense_units
        self.lstm_units = lstm_units
        self.dropout_rates = dropout_rates
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.validation_fraction = validation_fraction
        self.patience = patience
        self.random_state = random_state

    def _check_params(self):
        if len(self.dense_units) != 2 or len(self.lstm_units) != 3 or len(self.dropout_rates) != 3:
            raise InvalidParams("stack needs 2 dense widths, 3 recurrent widths and 3 dropout rates")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise InvalidParams("learning_rate, batch_size and epochs must be positive")
        if not all(0 <= r < 1 for r in self.dropout_rates):
            raise InvalidParams("dropout rates must be in [0, 1)")

    def _split(self, n, groups, rng):
        if self.validation_fraction <= 0 or n < 10:
            return np.arange(n), np.array([], dtype=int)
        if groups is not None:
            groups = np.asarray(groups)
            uniq = np.unique(groups)
            n_val = max(1, int(round(self.validation_fraction * len(uniq))))
            if n_val >= len(uniq):
                return np.arange(n), np.array([], dtype=int)
            val_groups = rng.choice(uniq, size=n_val, replace=False)
            is_val = np.isin(groups, val_groups)
        else:
            is_val = np.zeros(n, dtype=bool)
            is_val[rng.choice(n, size=max(1, int(round(self.validation_fraction * n))), replace=False)] = True
        return np.flatnonzero(~is_val), np.flatnonzero(is_val)

    def fit(self, X, y, groups=None):
        self._check_params()
        X, y = check_fit_data(X, y)
        rng = np.random.default_rng(self.random_state)
        self.n_features_in_ = X.shape[1]
        self.scaler_ = RssiScaler().fit(X)
        Z = self.scaler_.transform(X)
        self.target_mean_ = y.mean(axis=0)
        self.target_scale_ = np.where(y.std(axis=0) > 0, y.std(axis=0), 1.0)
        T = (y - self.target_mean_) / self.target_scale_

        self.layers_ = build_stack(X.shape[1], self.dense_units, self.lstm_units, self.dropout_rates, rng)
        train_idx, val_idx = self._split(len(X), groups, rng)
        opt = _Adam(self.layers_, self.learning_rate)
        self.history_ = []
        best = (np.inf, None)
        stale = 0
        for epoch in range(self.epochs):
            order = rng.permutation(train_idx)
            losses = []
            for start in range(0, len(order), self.batch_size):
                batch = order[start:start + self.batch_size]
                if len(batch) < 2:
                    continue  # batch statistics need at least two rows
                pred = stack_forward(self.layers_, Z[batch], True, rng)
                loss, dpred = mse_loss(pred, T[batch])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}")
                stack_backward(self.layers_, dpred)
                opt.step()
                losses.append(loss)
            record = {"epoch": epoch, "train_mse": float(np.mean(losses)) if losses else float("nan")}
            if len(val_idx):
                val_pred = self._forward_meters(Z[val_idx])
                record["val_mpe"] = float(np.mean(np.hypot(*(val_pred - y[val_idx]).T)))
                if record["val_mpe"] < best[0]:
                    best = (record["val_mpe"], self._snapshot())
                    stale = 0
                else:
                    stale += 1
            self.history_.append(record)
            if len(val_idx) and stale >= self.patience:
                break
        if best[1] is not None:
            self._restore(best[1])
        return self

    def _snapshot(self):
        return [{p: getattr(l, p).copy() for p in l.trainable + l.frozen} for l in self.layers_]

    def _restore(self, snap):
        for layer, params in zip(self.layers_, snap):
            for p, arr in params.items():
                setattr(layer, p, arr)

    def _forward_meters(self, Z):
        out = stack_forward(self.layers_, Z, False)
        return out * self.target_scale_ + self.target_mean_

    def predict(self, X):
        X = check_predict_data(self, X)
        return self._forward_meters(self.scaler_.transform(X))

    def param_table(self):
        return param_table(self.layers_)

    def _get_state(self):
        arrays = {"target_mean_": self.target_mean_, "target_scale_": self.target_scale_}
        for layer in self.layers_:
            for p in layer.trainable + layer.frozen:
                arrays[f"{layer.name}.{p}"] = getattr(layer, p)
        scalars = {
            "n_features_in_": self.n_features_in_,
            "input_mapping": {"low_dbm": self.scaler_.low_dbm, "high_dbm": self.scaler_.high_dbm,
                              "missing": self.scaler_.missing},
        }
        return scalars, arrays

    def _set_state(self, scalars, arrays):
        self.n_features_in_ = scalars["n_features_in_"]
        self.scaler_ = RssiScaler(**scalars["input_mapping"]).fit(np.zeros((1, self.n_features_in_)))
        self.target_mean_ = arrays["target_mean_"]
        self.target_scale_ = arrays["target_scale_"]
        self.layers_ = build_stack(self.n_features_in_, self.dense_units, self.lstm_units, self.dropout_rates)
        for layer in self.layers_:
            for p in layer.trainable + layer.frozen:
                setattr(layer, p, arrays[f"{layer.name}.{p}"])
