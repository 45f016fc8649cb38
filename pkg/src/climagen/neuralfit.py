"""Small feed-forward regression networks trained by Levenberg-Marquardt.

One tanh hidden layer feeding a single linear output unit; n_hidden=0
degenerates to a direct affine map (plain linear regression through the same
optimizer). Inputs and the target are standardized to zero mean / unit std
inside the model, so the damped normal equations stay well conditioned when
predictors span W/m2 and m/s scales.

Training minimizes the summed squared residual with the classic damping
schedule: a step dw = -(J'J + lambda I)^-1 J'e is accepted when it lowers the
error (lambda /= 10) and rejected otherwise (lambda *= 10). The quadratic
mean error (1/N) sum (target - output)^2 is recorded per accepted iteration
and is non-increasing by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FitError, UsageError


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": np.asarray(self.mean).tolist(), "std": np.asarray(self.std).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(mean=np.asarray(d["mean"], dtype=float), std=np.asarray(d["std"], dtype=float))


@dataclass
class TrainingReport:
    eqm_history: list[float]
    final_lambda: float
    iterations: int
    stop_reason: str


@dataclass
class NeuralModel:
    inputs: list[str]
    n_hidden: int
    w_hidden: np.ndarray  # (n_hidden, n_in); direct input->output weights if n_hidden == 0
    b_hidden: np.ndarray  # (n_hidden,)
    w_out: np.ndarray  # (n_hidden,) or (n_in,) for the degenerate linear net
    b_out: float
    in_scaler: Scaler
    out_scaler: Scaler
    report: TrainingReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "n_hidden": self.n_hidden,
            "w_hidden": self.w_hidden.tolist(),
            "b_hidden": self.b_hidden.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out,
            "in_scaler": self.in_scaler.to_dict(),
            "out_scaler": self.out_scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralModel":
        return cls(
            inputs=list(d["inputs"]),
            n_hidden=int(d["n_hidden"]),
            w_hidden=np.asarray(d["w_hidden"], dtype=float).reshape(
                int(d["n_hidden"]) or 0, -1
            ) if int(d["n_hidden"]) else np.zeros((0, len(d["inputs"]))),
            b_hidden=np.asarray(d["b_hidden"], dtype=float),
            w_out=np.asarray(d["w_out"], dtype=float),
            b_out=float(d["b_out"]),
            in_scaler=Scaler.from_dict(d["in_scaler"]),
            out_scaler=Scaler.from_dict(d["out_scaler"]),
        )


def _n_params(n_in: int, n_hidden: int) -> int:
    if n_hidden == 0:
        return n_in + 1
    return n_hidden * n_in + n_hidden + n_hidden + 1


def _forward_scaled(model: NeuralModel, z: np.ndarray) -> np.ndarray:
    """Output in scaled target space for scaled inputs z (n, n_in)."""
    if model.n_hidden == 0:
        return z @ model.w_out + model.b_out
    h = np.tanh(z @ model.w_hidden.T + model.b_hidden)
    return h @ model.w_out + model.b_out


def forward(model: NeuralModel, x) -> np.ndarray | float:
    """Model output in original units for one input vector or an (n, n_in) batch."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    z = np.atleast_2d(arr)
    if z.shape[1] != len(model.inputs):
        raise UsageError(f"expected {len(model.inputs)} inputs, got shape {z.shape}")
    out = _forward_scaled(model, model.in_scaler.transform(z))
    out = model.out_scaler.inverse(out)
    return float(out[0]) if single else out


def eqm(model: NeuralModel, inputs, targets) -> float:
    """Quadratic mean error (1/N) sum (target - output)^2, original units."""
    t = np.asarray(targets, dtype=float)
    if t.size == 0:
        raise DataError("eqm needs at least one sample")
    y = np.atleast_1d(forward(model, inputs))
    if y.size != t.size:
        raise UsageError("inputs and targets are not aligned")
    return float(((t - y) ** 2).mean())


def _pack(model: NeuralModel) -> np.ndarray:
    if model.n_hidden == 0:
        return np.r_[model.w_out, model.b_out]
    return np.r_[model.w_hidden.ravel(), model.b_hidden, model.w_out, model.b_out]


def _unpack(model: NeuralModel, beta: np.ndarray) -> None:
    n_in, nh = len(model.inputs), model.n_hidden
    if nh == 0:
        model.w_out = beta[:n_in].copy()
        model.b_out = float(beta[n_in])
        return
    k = nh * n_in
    model.w_hidden = beta[:k].reshape(nh, n_in).copy()
    model.b_hidden = beta[k : k + nh].copy()
    model.w_out = beta[k + nh : k + 2 * nh].copy()
    model.b_out = float(beta[k + 2 * nh])


def jacobian(model: NeuralModel, inputs) -> np.ndarray:
    """Analytic rows d(residual)/d(weight) in scaled space, one per sample.

    Residuals are (scaled output - scaled target), so the Jacobian of the
    output alone is what LM needs; the bias column is all ones.
    """
    z = model.in_scaler.transform(np.atleast_2d(np.asarray(inputs, dtype=float)))
    n = z.shape[0]
    if model.n_hidden == 0:
        return np.column_stack([z, np.ones(n)])
    h = np.tanh(z @ model.w_hidden.T + model.b_hidden)  # (n, nh)
    sech2 = 1.0 - h * h
    d_wh = (model.w_out * sech2)[:, :, None] * z[:, None, :]  # (n, nh, n_in)
    d_bh = model.w_out * sech2  # (n, nh)
    d_wo = h
    d_bo = np.ones((n, 1))
    return np.column_stack([d_wh.reshape(n, -1), d_bh, d_wo, d_bo])


def train_lm(
    inputs,
    targets,
    n_hidden: int = 3,
    seed: int = 0,
    max_iter: int = 200,
    input_names: list[str] | None = None,
    lambda0: float = 1e-2,
    step_tol: float = 1e-9,
    eqm_tol: float = 1e-12,
) -> NeuralModel:
    """Fit a network by Levenberg-Marquardt with seeded uniform(-0.5, 0.5) init.

    Stops on max_iter, a step norm below step_tol, or an accepted-step eqm
    improvement below eqm_tol. Raises when the damped normal matrix stays
    singular past lambda = 1e10.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    t = np.asarray(targets, dtype=float).ravel()
    if x.shape[0] != t.size:
        raise UsageError("inputs and targets are not aligned")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(t)):
        raise DataError("training data must be finite")
    n_in = x.shape[1]
    names = input_names or [f"x{i + 1}" for i in range(n_in)]
    if len(names) != n_in:
        raise UsageError("input_names length mismatch")
    npar = _n_params(n_in, n_hidden)
    if t.size < 10 * npar:
        warnings.warn(
            f"only {t.size} samples for {npar} weights (recommend >= {10 * npar})",
            stacklevel=2,
        )

    in_std = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(n_in)
    in_scaler = Scaler(mean=x.mean(axis=0), std=np.where(in_std > 1e-12, in_std, 1.0))
    t_std = t.std(ddof=1) if t.size > 1 else 1.0
    out_scaler = Scaler(
        mean=np.asarray(t.mean()), std=np.asarray(t_std if t_std > 1e-12 else 1.0)
    )

    rng = np.random.default_rng(seed)
    beta = rng.uniform(-0.5, 0.5, size=npar)
    model = NeuralModel(
        inputs=names,
        n_hidden=n_hidden,
        w_hidden=np.zeros((n_hidden, n_in)),
        b_hidden=np.zeros(n_hidden),
        w_out=np.zeros(n_hidden if n_hidden else n_in),
        b_out=0.0,
        in_scaler=in_scaler,
        out_scaler=out_scaler,
    )
    _unpack(model, beta)

    z = in_scaler.transform(x)
    ts = out_scaler.transform(t)
    scale2 = float(out_scaler.std) ** 2  # scaled SSE -> original-unit eqm factor

    resid = _forward_scaled(model, z) - ts
    sse = float(resid @ resid)
    history = [sse / t.size * scale2]
    lam = lambda0
    stop = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        jac = jacobian(model, x)
        jtj = jac.T @ jac
        jte = jac.T @ resid
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.eye(npar), -jte)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                break
            lam *= 10.0
            if lam >= 1e10:
                raise FitError("stalled: damped normal matrix stayed singular")
        cand = beta + step
        _unpack(model, cand)
        resid_c = _forward_scaled(model, z) - ts
        sse_c = float(resid_c @ resid_c)
        if math.isfinite(sse_c) and sse_c <= sse:
            improvement = (sse - sse_c) / t.size * scale2
            beta, resid, sse = cand, resid_c, sse_c
            history.append(sse / t.size * scale2)
            lam = max(lam / 10.0, 1e-15)
            if float(np.linalg.norm(step)) < step_tol:
                stop = "step_tol"
                break
            if improvement < eqm_tol:
                stop = "eqm_tol"
                break
        else:
            _unpack(model, beta)  # roll back
            lam *= 10.0
            if lam >= 1e10:
                if float(np.linalg.norm(step)) < step_tol:
                    stop = "step_tol"
                    break
                raise FitError("stalled: no acceptable LM step below lambda 1e10")

    _unpack(model, beta)
    model.report = TrainingReport(
        eqm_history=history, final_lambda=lam, iterations=it, stop_reason=stop
    )
    return model


@dataclass
class SweepEntry:
    n_hidden: int
    train_eqm: float
    val_eqm: float


def sweep_hidden(
    inputs,
    targets,
    hidden_range=range(1, 9),
    seed: int = 0,
    max_iter: int = 200,
    input_names: list[str] | None = None,
    val_fraction: float = 0.2,
) -> tuple[NeuralModel, list[SweepEntry]]:
    """Size the hidden layer by a seeded 80/20 split: train each candidate,
    keep the one with minimal validation eqm (ties to the smaller net)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    t = np.asarray(targets, dtype=float).ravel()
    if x.shape[0] < 10:
        raise DataError("sweep needs at least 10 samples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(t.size)
    n_val = max(1, int(round(val_fraction * t.size)))
    val_ix, train_ix = perm[:n_val], perm[n_val:]

    entries: list[SweepEntry] = []
    best: tuple[float, int, NeuralModel] | None = None
    for nh in hidden_range:
        m = train_lm(
            x[train_ix], t[train_ix], n_hidden=nh, seed=seed,
            max_iter=max_iter, input_names=input_names,
        )
        entry = SweepEntry(
            n_hidden=nh,
            train_eqm=eqm(m, x[train_ix], t[train_ix]),
            val_eqm=eqm(m, x[val_ix], t[val_ix]),
        )
        entries.append(entry)
        if best is None or (entry.val_eqm, nh) < (best[0], best[1]):
            best = (entry.val_eqm, nh, m)
    assert best is not None

    # refit the winner on the full dataset
    final = train_lm(
        x, t, n_hidden=best[1], seed=seed, max_iter=max_iter, input_names=input_names
    )
    return final, entries
