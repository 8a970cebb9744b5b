"""Two-layer LSTM with a linear head, forward pass and backpropagation
through time.

Gate blocks are stacked in the order input, forget, candidate, output, so
for a layer with ``H`` units ``W`` is ``(4H, n_in)``, ``U`` is ``(4H, H)``
and ``b`` is ``(4H,)``.
"""
import numpy as np

from ..errors import ContractError
from .params import ParamModel, check_cache, uniform_init


def sigmoid(x):
    # split form avoids overflow warnings for large negative inputs
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LstmModel(ParamModel):
    """Stacked LSTM sequence-to-one regressor.

    Parameters
    ----------
    n_in : int
        Input channels per timestep.
    hidden : tuple of int
        Units per LSTM layer.
    n_out : int
        Outputs of the dense head applied to the last hidden state.
    lookback : int
        Expected sequence length.
    seed : int
        Seed for the uniform initialisation.
    """

    kind = "lstm"

    def __init__(self, n_in=9, hidden=(32, 64), n_out=3, lookback=20, seed=0):
        super().__init__()
        self.n_in = int(n_in)
        self.hidden = tuple(int(h) for h in hidden)
        self.n_out = int(n_out)
        self.lookback = int(lookback)
        self.seed = int(seed)
        self.epochs = 0
        rng = np.random.default_rng(seed)
        fan = self.n_in
        for li, h in enumerate(self.hidden, start=1):
            self.params[f"l{li}.W"] = uniform_init(rng, (4 * h, fan), fan)
            self.params[f"l{li}.U"] = uniform_init(rng, (4 * h, h), h)
            self.params[f"l{li}.b"] = np.zeros(4 * h)
            fan = h
        self.params["head.W"] = uniform_init(rng, (self.n_out, fan), fan)
        self.params["head.b"] = np.zeros(self.n_out)

    def meta(self):
        return {"n_in": self.n_in, "hidden": list(self.hidden), "n_out": self.n_out,
                "lookback": self.lookback, "seed": self.seed, "epochs": self.epochs}

    @classmethod
    def from_meta(cls, meta):
        m = cls(meta["n_in"], tuple(meta["hidden"]), meta["n_out"], meta["lookback"],
                meta["seed"])
        m.epochs = int(meta.get("epochs", 0))
        return m

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (self.lookback, self.n_in):
            raise ContractError(
                f"expected windows of shape ({self.lookback}, {self.n_in}), got {x.shape}")
        return x, single

    def forward(self, x):
        """Predict from ``(B, T, n_in)`` windows (or one ``(T, n_in)`` window).

        Returns ``(prediction, cache)``; the prediction is ``(B, n_out)``
        or ``(n_out,)`` for a single window.
        """
        x, single = self._check_input(x)
        layers = []
        seq = x
        for li, h in enumerate(self.hidden, start=1):
            lc = _layer_forward(seq, self.params[f"l{li}.W"], self.params[f"l{li}.U"],
                                self.params[f"l{li}.b"], h)
            layers.append(lc)
            seq = lc["h"]
        last = seq[:, -1]
        y = last @ self.params["head.W"].T + self.params["head.b"]
        cache = {"model_id": id(self), "version": self.version, "x": x, "layers": layers,
                 "single": single}
        return (y[0] if single else y), cache

    def predict(self, x, batch=4096):
        x, single = self._check_input(x)
        out = np.concatenate([self.forward(x[i:i + batch])[0] for i in range(0, len(x), batch)]) \
            if len(x) else np.zeros((0, self.n_out))
        return out[0] if single else out

    def backward(self, cache, grad_out):
        """Parameter gradients of ``sum(grad_out * prediction)``.

        ``grad_out`` has the prediction's shape.  Returns a dict keyed like
        :attr:`params`.
        """
        check_cache(self, cache)
        g = np.asarray(grad_out, dtype=float)
        if cache["single"]:
            g = g[None]
        layers = cache["layers"]
        n_batch = cache["x"].shape[0]
        if g.shape != (n_batch, self.n_out):
            raise ContractError(f"grad_out shape {g.shape} does not match prediction")
        grads = {}
        last = layers[-1]["h"][:, -1]
        grads["head.W"] = g.T @ last
        grads["head.b"] = g.sum(axis=0)
        dh_seq = np.zeros_like(layers[-1]["h"])
        dh_seq[:, -1] = g @ self.params["head.W"]
        for li in range(len(self.hidden), 0, -1):
            lc = layers[li - 1]
            inp = cache["x"] if li == 1 else layers[li - 2]["h"]
            dW, dU, db, dx = _layer_backward(lc, inp, dh_seq, self.params[f"l{li}.W"],
                                             self.params[f"l{li}.U"])
            grads[f"l{li}.W"], grads[f"l{li}.U"], grads[f"l{li}.b"] = dW, dU, db
            dh_seq = dx
        return {k: grads[k] for k in self.params}


def _layer_forward(x, W, U, b, h_units):
    n_batch, n_t, _ = x.shape
    H = h_units
    xw = x @ W.T + b
    gates = np.empty((n_batch, n_t, 4 * H))
    cs = np.empty((n_batch, n_t, H))
    tcs = np.empty((n_batch, n_t, H))
    hs = np.empty((n_batch, n_t, H))
    h = np.zeros((n_batch, H))
    c = np.zeros((n_batch, H))
    for t in range(n_t):
        z = xw[:, t] + h @ U.T
        gt = gates[:, t]
        gt[:, :2 * H] = sigmoid(z[:, :2 * H])
        gt[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        gt[:, 3 * H:] = sigmoid(z[:, 3 * H:])
        c = gt[:, H:2 * H] * c + gt[:, :H] * gt[:, 2 * H:3 * H]
        tc = np.tanh(c)
        h = gt[:, 3 * H:] * tc
        cs[:, t], tcs[:, t], hs[:, t] = c, tc, h
    return {"gates": gates, "c": cs, "tc": tcs, "h": hs, "H": H}


def _layer_backward(lc, x, dh_seq, W, U):
    H = lc["H"]
    gates, cs, tcs, hs = lc["gates"], lc["c"], lc["tc"], lc["h"]
    n_batch, n_t, _ = hs.shape
    dz = np.empty((n_batch, n_t, 4 * H))
    dh_next = np.zeros((n_batch, H))
    dc_next = np.zeros((n_batch, H))
    for t in range(n_t - 1, -1, -1):
        gt = gates[:, t]
        i, f, g, o = gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:]
        dh = dh_seq[:, t] + dh_next
        tc = tcs[:, t]
        dc = dh * o * (1.0 - tc * tc) + dc_next
        c_prev = cs[:, t - 1] if t > 0 else np.zeros_like(dc)
        d = dz[:, t]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        d[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ U
    flat = dz.reshape(-1, 4 * H)
    dW = flat.T @ x.reshape(-1, x.shape[2])
    dU = dz[:, 1:].reshape(-1, 4 * H).T @ hs[:, :-1].reshape(-1, H) if n_t > 1 \
        else np.zeros_like(U)
    db = flat.sum(axis=0)
    dx = dz @ W
    return dW, dU, db, dx
