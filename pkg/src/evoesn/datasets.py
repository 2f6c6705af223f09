"""Benchmark series: Mackey-Glass and Lorenz generators, monthly sunspot loader.

All series come back as `TimeSeries` objects carrying split annotations and an
invertible record of whatever normalization was applied, so error metrics can
always be computed in original units.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError, ParseError


@dataclass(frozen=True)
class Splits:
    washout: int = 0
    train: int = 0
    validate: int = 0
    test: int = 0

    def __post_init__(self):
        if min(self.washout, self.train, self.validate, self.test) < 0:
            raise ConfigurationError("split lengths must be nonnegative")

    @property
    def total(self):
        return self.washout + self.train + self.validate + self.test

    @property
    def train_end(self):
        return self.washout + self.train

    @property
    def validate_end(self):
        return self.washout + self.train + self.validate


class IdentityTransform:
    kind = "identity"

    def apply(self, x):
        return np.asarray(x, dtype=float)

    def invert(self, y):
        return np.asarray(y, dtype=float)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class AffineTransform:
    """stored = scale * raw + shift"""

    scale: float
    shift: float = 0.0
    kind = "affine"

    def apply(self, x):
        return self.scale * np.asarray(x, dtype=float) + self.shift

    def invert(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale, "shift": self.shift}


@dataclass(frozen=True)
class TanhSquash:
    """stored = tanh(raw - center); keeps bounded positive signals inside (-1, 1)."""

    center: float = 1.0
    kind = "tanh"

    def apply(self, x):
        return np.tanh(np.asarray(x, dtype=float) - self.center)

    def invert(self, y):
        return np.arctanh(np.asarray(y, dtype=float)) + self.center

    def to_dict(self):
        return {"kind": self.kind, "center": self.center}


def transform_from_dict(d):
    kind = d["kind"]
    if kind == "identity":
        return IdentityTransform()
    if kind == "affine":
        return AffineTransform(d["scale"], d["shift"])
    if kind == "tanh":
        return TanhSquash(d["center"])
    raise ValueError(f"unknown transform kind {kind!r}")


@dataclass(frozen=True)
class TimeSeries:
    """Normalized signal of shape (T, d) with split annotations."""

    values: np.ndarray
    dt: float
    splits: Splits
    transform: object = field(default_factory=IdentityTransform)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise NumericError("series contains non-finite values")
        if self.splits.total > len(values):
            raise ConfigurationError(
                f"splits need {self.splits.total} points but the series has {len(values)}"
            )

    def __len__(self):
        return len(self.values)

    @property
    def n_series(self):
        return self.values.shape[1]

    def raw(self):
        """Values in original units (normalization inverted)."""
        return self.transform.invert(self.values)

    def with_splits(self, splits):
        return TimeSeries(self.values, self.dt, splits, self.transform)


@dataclass(frozen=True)
class MgsParams:
    """Delay-differential benchmark dy/dt = alpha*y(t-tau)/(1+y(t-tau)^beta) - gamma*y."""

    alpha: float = 0.2
    beta: float = 10.0
    gamma: float = 0.1
    tau: float = 17.0
    integration_step: float = 0.1
    subsample: int = 10
    method: str = "euler"  # euler | rk4

    def __post_init__(self):
        if self.tau <= 0 or self.integration_step <= 0:
            raise ConfigurationError("tau and integration_step must be positive")
        if self.subsample < 1:
            raise ConfigurationError("subsample must be a positive integer")
        ratio = self.tau / self.integration_step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError(
                f"tau={self.tau} is not an integer multiple of integration_step={self.integration_step}"
            )
        if abs(self.subsample * self.integration_step - 1.0) > 1e-9:
            raise ConfigurationError("subsample * integration_step must equal 1.0 (unit sampling)")
        if self.method not in ("euler", "rk4"):
            raise ConfigurationError(f"unknown integration method {self.method!r}")

    @property
    def delay_steps(self):
        return int(round(self.tau / self.integration_step))


def _mgs_rhs(params, y, y_tau):
    return params.alpha * y_tau / (1.0 + y_tau**params.beta) - params.gamma * y


def generate_mackey_glass(params, total_len, seed, splits=None, squash=False):
    """Integrate the delay equation and emit ``total_len`` unit-time samples.

    The delay history is seeded uniform on (0, 1.3) and a transient of
    10 * tau time units is integrated and discarded before emission, so the
    emitted trajectory sits on the attractor regardless of initialization.
    With ``squash`` the stored signal is tanh(y - 1).
    """
    if total_len <= 0:
        raise ConfigurationError("total_len must be positive")
    dt = params.integration_step
    delay = params.delay_steps
    rng = np.random.default_rng(seed)
    history = rng.uniform(0.0, 1.3, delay + 1)
    transient = int(round(10 * params.tau / dt))
    n_steps = transient + total_len * params.subsample

    buf = history.copy()  # circular buffer over the last delay+1 values
    idx = 0  # position of y(t - tau)
    y = buf[-1]
    out = np.empty(total_len)
    emitted = 0
    rk4 = params.method == "rk4"
    for k in range(n_steps):
        y_tau = buf[idx]
        if rk4:
            # delayed value at mid-step by linear interpolation in the buffer
            y_tau_mid = 0.5 * (y_tau + buf[(idx + 1) % len(buf)])
            y_tau_end = buf[(idx + 1) % len(buf)]
            k1 = _mgs_rhs(params, y, y_tau)
            k2 = _mgs_rhs(params, y + 0.5 * dt * k1, y_tau_mid)
            k3 = _mgs_rhs(params, y + 0.5 * dt * k2, y_tau_mid)
            k4 = _mgs_rhs(params, y + dt * k3, y_tau_end)
            y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        else:
            y = y + dt * _mgs_rhs(params, y, y_tau)
        if not np.isfinite(y):
            raise NumericError(f"integration diverged at step {k}")
        buf[idx] = y
        idx = (idx + 1) % len(buf)
        if k >= transient and (k - transient + 1) % params.subsample == 0:
            out[emitted] = y
            emitted += 1
            if emitted == total_len:
                break
    transform = TanhSquash(1.0) if squash else IdentityTransform()
    return TimeSeries(transform.apply(out), 1.0, splits or Splits(), transform)


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    step: float = 0.01
    initial_state: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigurationError("step must be positive")


def _lorenz_rhs(p, s):
    x, y, z = s
    return np.array([p.sigma * (y - x), p.r * x - y - x * z, x * y - p.b * z])


def generate_lorenz(params, total_len, splits=None, transient=1000, rescale=0.01):
    """Fixed-step RK4 trajectory; returns the x coordinate scaled by ``rescale``.

    Deterministic: no randomness is involved, so identical parameters give
    bit-identical output.
    """
    if total_len <= 0:
        raise ConfigurationError("total_len must be positive")
    s = np.array(params.initial_state, dtype=float)
    h = params.step
    out = np.empty(total_len)
    n_steps = transient + total_len
    emitted = 0
    for k in range(n_steps):
        k1 = _lorenz_rhs(params, s)
        k2 = _lorenz_rhs(params, s + 0.5 * h * k1)
        k3 = _lorenz_rhs(params, s + 0.5 * h * k2)
        k4 = _lorenz_rhs(params, s + h * k3)
        s = s + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if not np.all(np.isfinite(s)):
            raise NumericError(f"integration diverged at step {k}")
        if k >= transient:
            out[emitted] = s[0]
            emitted += 1
    transform = AffineTransform(scale=rescale)
    return TimeSeries(transform.apply(out), h, splits or Splits(), transform)


SUNSPOT_SPLITS = Splits(washout=100, train=1600, validate=500, test=1076)
_SUNSPOT_END = (2021, 12)  # study window ends Dec 2021 -> 3276 monthly points


def load_sunspots(path, splits=SUNSPOT_SPLITS, end=_SUNSPOT_END):
    """Parse a semicolon-delimited monthly mean sunspot file.

    Expected row layout: year; month; decimal year; mean value; std; #obs;
    provisional marker.  Rows after ``end`` (year, month) are ignored.  Values
    are min-max normalized to [0, 1] over the training segment.
    """
    raw = []
    missing = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(";")]
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: expected at least 4 fields, got {len(parts)}")
            try:
                year = int(parts[0])
                month = int(parts[1])
                value = float(parts[3])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            if end is not None and (year, month) > end:
                continue
            if value == -1:
                missing.append(f"{year}-{month:02d}")
                continue
            raw.append(value)
    if missing:
        raise ParseError(f"missing-value sentinel (-1) at: {', '.join(missing)}")
    if not raw:
        raise ParseError("no data rows found")
    raw = np.array(raw)
    if splits.washout + splits.train + splits.validate > len(raw):
        raise ConfigurationError(
            f"series of length {len(raw)} is too short for splits "
            f"{splits.washout}+{splits.train}+{splits.validate}"
        )
    splits = Splits(splits.washout, splits.train, splits.validate, len(raw) - splits.validate_end)
    tr = raw[splits.washout : splits.train_end]
    lo, hi = tr.min(), tr.max()
    if hi == lo:
        raise ConfigurationError("training segment is constant, cannot min-max normalize")
    transform = AffineTransform(scale=1.0 / (hi - lo), shift=-lo / (hi - lo))
    return TimeSeries(transform.apply(raw), 1.0, splits, transform)


def export_series(series, path, delimiter="\t"):
    """Two-column (index, value) text file of the stored signal, for plotting."""
    values = series.values
    with open(path, "w") as fh:
        for i in range(len(values)):
            row = delimiter.join(format(v, ".12g") for v in values[i])
            fh.write(f"{i}{delimiter}{row}\n")


def load_series_file(path, splits=None, dt=1.0, delimiter=None):
    """Read a delimited text series (last column = value, optional index column)."""
    try:
        data = np.loadtxt(path, delimiter=delimiter)
    except Exception as exc:
        raise ParseError(f"cannot read series file {path}: {exc}") from exc
    if data.ndim == 1:
        values = data
    else:
        values = data[:, -1]
    return TimeSeries(values, dt, splits or Splits())


def write_surrogate_sunspots(path, seed=1848):
    """Write a synthetic monthly series in the sunspot file format.

    Stand-in for the real observational record when it is not available:
    quasi-periodic cycles of varying amplitude and length plus observation
    noise, spanning Jan 1749 - Dec 2021 (3276 rows).  Statistical character is
    similar to the real series; values are not the observed ones.
    """
    rng = np.random.default_rng(seed)
    n = 3276
    values = np.empty(n)
    t = 0
    level = 0.0
    while t < n:
        period = rng.uniform(118, 144)  # months per cycle
        amp = rng.uniform(90, 230)
        skew = rng.uniform(0.35, 0.5)  # rising phase fraction
        length = int(round(period))
        for k in range(length):
            if t >= n:
                break
            phase = k / length
            shape = np.sin(np.pi * (phase / (2 * skew)))**2 if phase < skew else np.sin(
                np.pi * (0.5 + (phase - skew) / (2 * (1 - skew)))
            ) ** 2
            base = amp * shape
            level = 0.55 * level + 0.45 * base  # smooth cycle-to-cycle blending
            noisy = level * (1.0 + 0.16 * rng.standard_normal()) + 3.5 * rng.standard_normal()
            values[t] = max(noisy, 0.0)
            t += 1
    with open(path, "w") as fh:
        year, month = 1749, 1
        for v in values:
            frac = year + (month - 0.5) / 12.0
            fh.write(f"{year};{month:02d};{frac:.3f};{v:6.1f}; -1.0;   -1;1\n")
            month += 1
            if month > 12:
                month = 1
                year += 1
    return path
