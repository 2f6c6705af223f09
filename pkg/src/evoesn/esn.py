"""Echo state network core: state recurrence, readout training, free-run prediction.

The hidden state follows the leaky recurrence

    x(t) = (1 - a) * x(t-1) + a * f(W_in u(t) + W_h x(t-1) + W_fb y(t-1) + eps(t))

with a = 1 recovering the canonical update.  The readout is
y(t) = g(W_out [u(t); x(t)]) and is the only part trained (ridge regression).
Reservoir weights W_h live on a fixed sparsity layout; entries off the layout
stay exactly zero through every operation.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import CheckpointError, InitializationError, NumericError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ReservoirLayout:
    """Fixed positions of the unfrozen reservoir weights, in row-major order."""

    n_units: int
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("rows and cols must be 1-d arrays of equal length")
        flat = rows * self.n_units + cols
        if len(np.unique(flat)) != len(flat):
            raise ValueError("layout positions must be distinct")
        if not np.all(np.diff(flat) > 0):
            raise ValueError("layout positions must be sorted row-major")
        if len(flat) >= self.n_units**2:
            raise ValueError("layout must leave at least one frozen entry")
        if len(flat) and (flat[0] < 0 or flat[-1] >= self.n_units**2):
            raise ValueError("layout positions out of bounds")

    @property
    def m(self):
        return len(self.rows)

    @classmethod
    def sample(cls, n_units, density, seed):
        """Draw round(density * N^2) distinct positions uniformly at random."""
        m = int(round(density * n_units * n_units))
        rng = np.random.default_rng(seed)
        flat = rng.choice(n_units * n_units, size=m, replace=False)
        flat.sort()
        return cls(n_units, flat // n_units, flat % n_units)

    def scatter(self, values):
        """Place a length-M weight vector into a dense N x N matrix."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.m,):
            raise ValueError(f"expected {self.m} weights, got {values.shape}")
        w = np.zeros((self.n_units, self.n_units))
        w[self.rows, self.cols] = values
        return w

    def gather(self, w):
        """Read the layout-ordered weight vector out of a matrix."""
        return np.asarray(w, dtype=float)[self.rows, self.cols]


@dataclass(frozen=True)
class EsnHyper:
    """Reservoir hyperparameters; weight ranges are half-widths of uniform draws."""

    n_inputs: int = 1
    n_outputs: int = 1
    activation: str = "tanh"  # tanh | identity
    readout: str = "identity"  # g in the readout: identity | tanh
    leak_rate: float = 1.0
    noise_scale: float = 0.0
    input_bias: float | None = None  # constant extra input channel when set
    input_scaling: float = 1.0
    reservoir_scaling: float = 1.0
    feedback_scaling: float | None = None  # None: no feedback connections
    spectral_radius: float | None = None  # rescale target; None keeps raw scale
    ridge_lambda: float = 0.0

    def __post_init__(self):
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.readout not in ("tanh", "identity"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if not 0.0 < self.leak_rate <= 1.0:
            raise ValueError("leak_rate must be in (0, 1]")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if self.spectral_radius is not None and self.spectral_radius <= 0:
            raise ValueError("spectral_radius target must be positive")

    @property
    def n_in_total(self):
        return self.n_inputs + (1 if self.input_bias is not None else 0)


def _activation(name):
    return np.tanh if name == "tanh" else (lambda v: v)


@dataclass
class EsnModel:
    layout: ReservoirLayout
    hyper: EsnHyper
    w_in: np.ndarray
    w_h: np.ndarray
    w_fb: np.ndarray | None = None
    w_out: np.ndarray | None = None
    seed: int | None = None

    @property
    def n_units(self):
        return self.layout.n_units

    def with_reservoir(self, w_h):
        """Same model with a replacement reservoir matrix (readout untrained)."""
        return EsnModel(self.layout, self.hyper, self.w_in, w_h, self.w_fb, None, self.seed)


@dataclass
class StateTrajectory:
    """Post-washout reservoir states with the inputs/targets that produced them."""

    states: np.ndarray  # (T, N)
    inputs: np.ndarray  # (T, n_in_total)
    targets: np.ndarray  # (T, L)

    def __post_init__(self):
        if not (len(self.states) == len(self.inputs) == len(self.targets)):
            raise ValueError("states, inputs and targets must have equal length")
        for name in ("states", "inputs", "targets"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"non-finite values in trajectory {name}")


def spectral_radius(w):
    """Largest eigenvalue magnitude, by dense eigendecomposition."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise NumericError("matrix has non-finite entries")
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def rescale_spectral_radius(w, target):
    """Multiply by a positive scalar so the spectral radius equals ``target``."""
    rho = spectral_radius(w)
    if rho == 0.0:
        raise InitializationError("spectral radius is zero, cannot rescale")
    return w * (target / rho)


def init_esn(layout, hyper, seed):
    """Sample input/reservoir/feedback weights uniformly; rescale the reservoir.

    Draw order is fixed (input, reservoir values, feedback) so equal seeds give
    bit-identical models.
    """
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-hyper.input_scaling, hyper.input_scaling, (layout.n_units, hyper.n_in_total))
    values = rng.uniform(-hyper.reservoir_scaling, hyper.reservoir_scaling, layout.m)
    w_h = layout.scatter(values)
    if hyper.spectral_radius is not None:
        w_h = rescale_spectral_radius(w_h, hyper.spectral_radius)
    w_fb = None
    if hyper.feedback_scaling is not None:
        w_fb = rng.uniform(-hyper.feedback_scaling, hyper.feedback_scaling, (layout.n_units, hyper.n_outputs))
    return EsnModel(layout, hyper, w_in, w_h, w_fb, None, seed)


def step(model, x_prev, u, y_prev=None, noise=None):
    """One application of the leaky state recurrence.

    ``noise`` must already be scaled; the feedback term is skipped when the
    model has no feedback matrix or ``y_prev`` is None.
    """
    pre = model.w_in @ u + model.w_h @ x_prev
    if model.w_fb is not None and y_prev is not None:
        pre = pre + model.w_fb @ y_prev
    if noise is not None:
        pre = pre + noise
    a = model.hyper.leak_rate
    f = _activation(model.hyper.activation)
    return (1.0 - a) * x_prev + a * f(pre)


def _bias_column(hyper, length):
    if hyper.input_bias is None:
        return np.zeros((length, 0))
    return np.full((length, 1), hyper.input_bias)


def build_io(values, hyper, wiring):
    """Input and target arrays for a signal under the chosen wiring.

    wiring 'input': the signal arrives one step delayed on the input channel
    (one-step-ahead setup); wiring 'feedback': no signal input, the previous
    target reaches the reservoir through the feedback matrix.  A constant bias
    channel is appended when configured.  Targets are always the signal itself.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 1:
        values = values.T
    t = len(values)
    if wiring == "input":
        lagged = np.vstack([np.zeros((1, values.shape[1])), values[:-1]])
        inputs = np.hstack([lagged, _bias_column(hyper, t)])
    elif wiring == "feedback":
        inputs = _bias_column(hyper, t)
    else:
        raise ValueError(f"unknown wiring {wiring!r}")
    return inputs, values


def run_states(model, inputs, targets, noise_rng=None, x0=None, teacher_forced=True):
    """Advance the reservoir over a whole input block, returning all states.

    Teacher forcing feeds targets[t-1] into the feedback matrix; the first step
    uses a zero feedback value.  Raises on the first non-finite state, naming
    the step.
    """
    n = model.n_units
    t_total = len(inputs)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    states = np.zeros((t_total, n))
    scale = model.hyper.noise_scale
    use_fb = model.w_fb is not None and teacher_forced
    zero_fb = np.zeros(targets.shape[1]) if targets.ndim == 2 else np.zeros(1)
    for t in range(t_total):
        y_prev = (targets[t - 1] if t > 0 else zero_fb) if use_fb else None
        noise = noise_rng.uniform(-scale, scale, n) if (noise_rng is not None and scale > 0) else None
        x = step(model, x, inputs[t], y_prev, noise)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite reservoir state at step {t}")
        states[t] = x
    return states


def collect_states(model, inputs, targets, washout, noise_rng=None):
    """Teacher-forced state harvesting; washout states are dropped."""
    states = run_states(model, inputs, targets, noise_rng=noise_rng)
    return StateTrajectory(states[washout:], np.asarray(inputs)[washout:], np.asarray(targets)[washout:])


def train_readout(traj, ridge_lambda, readout="identity"):
    """Ridge regression of the readout on [input; state] features.

    With a tanh readout the regression runs in artanh-transformed target space,
    so targets must lie strictly inside (-1, 1).
    """
    if len(traj.states) == 0:
        raise ValueError("cannot train on an empty trajectory")
    x_feat = np.hstack([traj.inputs, traj.states]).T  # (n+N, T)
    z = traj.targets.T  # (L, T)
    if readout == "tanh":
        if np.any(np.abs(z) >= 1.0):
            raise ValueError("tanh readout requires targets strictly inside (-1, 1)")
        z = np.arctanh(z)
    gram = x_feat @ x_feat.T
    if ridge_lambda:
        gram = gram + ridge_lambda * np.eye(gram.shape[0])
    try:
        w_out_t = np.linalg.solve(gram, x_feat @ z.T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"normal matrix is singular ({exc}); use a positive ridge_lambda"
        ) from exc
    return w_out_t.T  # (L, n+N)


def readout_output(model, u, x):
    g = _activation(model.hyper.readout)
    return g(model.w_out @ np.concatenate([u, x]))


def free_run(model, x0, y0, horizon, wiring, clamp=None, noise_rng=None):
    """Closed-loop prediction: the model's own output is fed back each step.

    Under 'input' wiring the previous output becomes the next input sample;
    under 'feedback' wiring it enters through the feedback matrix.  When
    ``clamp`` = (lo, hi) is given the output is clipped into that range before
    being emitted and fed back, which keeps an unstable free run bounded
    instead of diverging.  Returns a (horizon, L) array.
    """
    if model.w_out is None:
        raise ValueError("readout is not trained")
    hyper = model.hyper
    x = np.asarray(x0, dtype=float).copy()
    y_prev = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    preds = np.zeros((horizon, hyper.n_outputs))
    bias = np.array([]) if hyper.input_bias is None else np.array([hyper.input_bias])
    scale = hyper.noise_scale
    for h in range(horizon):
        u = np.concatenate([y_prev, bias]) if wiring == "input" else bias
        noise = noise_rng.uniform(-scale, scale, model.n_units) if (noise_rng is not None and scale > 0) else None
        x = step(model, x, u, y_prev if wiring == "feedback" else None, noise)
        y = readout_output(model, u, x)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"non-finite prediction at free-run step {h}")
        if clamp is not None:
            y = np.clip(y, clamp[0], clamp[1])
        preds[h] = y
        y_prev = y
    return preds


def predict(model, values, warmup, horizon, wiring, clamp=None, x0=None):
    """Teacher-forced warm-up over ``values[:warmup]`` then ``horizon`` free-run steps."""
    if horizon == 0:
        return np.zeros((0, model.hyper.n_outputs))
    inputs, targets = build_io(values[: warmup + 1], model.hyper, wiring)
    x = np.zeros(model.n_units) if x0 is None else x0
    if warmup > 0:
        states = run_states(model, inputs[:warmup], targets[:warmup], x0=x)
        x = states[-1]
        y0 = targets[warmup - 1]
    else:
        y0 = np.zeros(model.hyper.n_outputs)
    return free_run(model, x, y0, horizon, wiring, clamp=clamp)


def one_step_predictions(model, values, wiring="input"):
    """Open-loop one-step-ahead outputs over a whole signal (true inputs each step)."""
    if model.w_out is None:
        raise ValueError("readout is not trained")
    inputs, targets = build_io(values, model.hyper, wiring)
    states = run_states(model, inputs, targets)
    feats = np.hstack([inputs, states])
    out = feats @ model.w_out.T
    if model.hyper.readout == "tanh":
        out = np.tanh(out)
    return out


def save_model(model, path):
    """Self-describing container: layout indices, weights, hyperparameters, seed."""
    hyper_json = json.dumps(asdict(model.hyper))
    np.savez(
        path,
        format_version=MODEL_FORMAT_VERSION,
        n_units=model.layout.n_units,
        layout_rows=model.layout.rows,
        layout_cols=model.layout.cols,
        reservoir_values=model.layout.gather(model.w_h),
        w_in=model.w_in,
        w_fb=model.w_fb if model.w_fb is not None else np.zeros((0, 0)),
        w_out=model.w_out if model.w_out is not None else np.zeros((0, 0)),
        hyper=hyper_json,
        seed=-1 if model.seed is None else model.seed,
    )


def load_model(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != MODEL_FORMAT_VERSION:
                raise CheckpointError(f"unsupported model format version {version}")
            layout = ReservoirLayout(int(data["n_units"]), data["layout_rows"], data["layout_cols"])
            hyper = EsnHyper(**json.loads(str(data["hyper"])))
            w_fb = data["w_fb"] if data["w_fb"].size else None
            w_out = data["w_out"] if data["w_out"].size else None
            seed = int(data["seed"])
            return EsnModel(
                layout,
                hyper,
                data["w_in"],
                layout.scatter(data["reservoir_values"]),
                w_fb,
                w_out,
                None if seed < 0 else seed,
            )
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot load model container: {exc}") from exc
