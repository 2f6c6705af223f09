"""Genetic search over reservoir weights in DCT coefficient space.

Individuals are coefficient vectors.  Evaluating one means: zero-pad to the
layout size, inverse-DCT into a weight vector, scatter it onto the fixed
layout, optionally rescale to the target spectral radius, ridge-train the
readout, and score closed-loop (or one-step) prediction on frozen validation
windows.  The windows, the input/feedback matrices and the noise stream are
all drawn once per run, so fitness comparisons between individuals are paired
and re-evaluating a chromosome always returns the same number.
"""

import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import codec, esn, metrics
from .errors import CheckpointError, EvoEsnError, NumericError

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FitnessSpec:
    """How a decoded reservoir is scored on the validation region."""

    n_tasks: int = 12
    horizon: int = 300
    metric: str = "nrmse"  # nrmse | nmse
    mode: str = "free_run"  # free_run | one_step

    def __post_init__(self):
        if self.metric not in ("nrmse", "nmse"):
            raise ValueError(f"unknown fitness metric {self.metric!r}")
        if self.mode not in ("free_run", "one_step"):
            raise ValueError(f"unknown fitness mode {self.mode!r}")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 20
    generations: int = 70
    tournament_size: int = 3
    crossover_prob: float = 0.5
    mutation_prob: float = 0.15
    mutation_sigma: float | None = None  # None: sigma_scale * std of gen-0 coefficients
    sigma_scale: float = 0.1
    mutation_indpb: float = 1.0  # fraction of genes perturbed per mutation
    sigma_decay: float = 1.0  # per-generation multiplier on sigma
    n_coefficients: int = 500
    rescale_spectral_radius: bool = True
    elitism: bool = False  # reinject the best-so-far each generation
    penalty_fitness: float = 1e6
    stall_generations: int = 25
    stall_tolerance: float = 1e-6

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0 < self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        for name in ("crossover_prob", "mutation_prob", "mutation_indpb"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.n_coefficients < 1:
            raise ValueError("n_coefficients must be positive")


@dataclass
class EvalContext:
    """Frozen per-run context shared by every fitness evaluation."""

    series_values: np.ndarray  # stored-space signal, (T, 1)
    splits: object
    wiring: str
    layout: esn.ReservoirLayout
    hyper: esn.EsnHyper
    w_in: np.ndarray
    w_fb: np.ndarray | None
    fitness: FitnessSpec
    window_starts: np.ndarray
    noise_seed: int
    clamp: tuple | None
    rescale: bool
    penalty: float


def make_context(series, wiring, layout, hyper, fitness, seed, clamp=None, rescale=True,
                 penalty=1e6):
    """Draw the shared input/feedback matrices and freeze validation windows."""
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-hyper.input_scaling, hyper.input_scaling, (layout.n_units, hyper.n_in_total))
    w_fb = None
    if hyper.feedback_scaling is not None:
        w_fb = rng.uniform(-hyper.feedback_scaling, hyper.feedback_scaling, (layout.n_units, hyper.n_outputs))
    splits = series.splits
    if fitness.mode == "free_run":
        span = splits.validate - fitness.horizon
        if span < fitness.n_tasks:
            raise ValueError(
                f"validation region of {splits.validate} points cannot hold "
                f"{fitness.n_tasks} windows of horizon {fitness.horizon}"
            )
        offsets = rng.choice(span, size=fitness.n_tasks, replace=False)
        starts = np.sort(offsets) + splits.train_end
    else:
        starts = np.array([splits.train_end])
    return EvalContext(
        series_values=series.values,
        splits=splits,
        wiring=wiring,
        layout=layout,
        hyper=hyper,
        w_in=w_in,
        w_fb=w_fb,
        fitness=fitness,
        window_starts=starts,
        noise_seed=int(rng.integers(0, 2**63 - 1)),
        clamp=clamp,
        rescale=rescale,
        penalty=penalty,
    )


def _context_model(ctx, w_h):
    return esn.EsnModel(ctx.layout, ctx.hyper, ctx.w_in, w_h, ctx.w_fb)


def sample_canonical_coefficients(ctx, n_coefficients, seed):
    """Encode a freshly sampled canonical reservoir as a coefficient vector."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(-ctx.hyper.reservoir_scaling, ctx.hyper.reservoir_scaling, ctx.layout.m)
    w_h = ctx.layout.scatter(values)
    if ctx.hyper.spectral_radius is not None:
        w_h = esn.rescale_spectral_radius(w_h, ctx.hyper.spectral_radius)
    return codec.encode(w_h, ctx.layout, n_coefficients)


def evaluate_fitness(coeffs, ctx):
    """Decode, train, score; numeric blow-ups yield the penalty value, not an exception."""
    try:
        w_h = codec.decode(coeffs, ctx.layout)
        if ctx.rescale and ctx.hyper.spectral_radius is not None:
            rho = esn.spectral_radius(w_h)
            if rho == 0.0:
                return ctx.penalty
            w_h = w_h * (ctx.hyper.spectral_radius / rho)
        model = _context_model(ctx, w_h)
        splits = ctx.splits
        values = ctx.series_values
        inputs, targets = esn.build_io(values[: splits.validate_end], ctx.hyper, ctx.wiring)
        noise_rng = np.random.default_rng(ctx.noise_seed)
        states = esn.run_states(model, inputs[: splits.train_end], targets[: splits.train_end],
                                noise_rng=noise_rng)
        traj = esn.StateTrajectory(
            states[splits.washout :],
            inputs[splits.washout : splits.train_end],
            targets[splits.washout : splits.train_end],
        )
        model.w_out = esn.train_readout(traj, ctx.hyper.ridge_lambda, ctx.hyper.readout)
        if ctx.fitness.mode == "one_step":
            return _one_step_fitness(model, ctx)
        return _free_run_fitness(model, ctx, states[-1])
    except (NumericError, np.linalg.LinAlgError, FloatingPointError):
        return ctx.penalty


def _free_run_fitness(model, ctx, x_train_end):
    """Mean windowed error: teacher-force through validation, branch free runs."""
    splits = ctx.splits
    values = ctx.series_values
    horizon = ctx.fitness.horizon
    inputs, targets = esn.build_io(values[: splits.validate_end], ctx.hyper, ctx.wiring)
    norm_var = float(np.var(values[splits.train_end : splits.validate_end]))
    x = x_train_end
    errs = []
    si = 0
    starts = ctx.window_starts
    for t in range(splits.train_end, splits.validate_end):
        while si < len(starts) and starts[si] == t:
            preds = esn.free_run(model, x, values[t - 1], horizon, ctx.wiring, clamp=ctx.clamp)
            tgt = values[t : t + horizon, 0]
            if ctx.fitness.metric == "nrmse":
                errs.append(np.sqrt(np.mean((tgt - preds[:, 0]) ** 2) / norm_var))
            else:
                errs.append(np.mean((tgt - preds[:, 0]) ** 2) / norm_var)
            si += 1
        x = esn.step(model, x, inputs[t], targets[t - 1] if model.w_fb is not None else None)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state at validation step {t}")
    fit = float(np.mean(errs))
    return fit if np.isfinite(fit) else ctx.penalty


def _one_step_fitness(model, ctx):
    """Open-loop error over the validation region (single-step lookahead tasks)."""
    splits = ctx.splits
    values = ctx.series_values
    preds = esn.one_step_predictions(model, values[: splits.validate_end], ctx.wiring)
    tgt = values[splits.train_end : splits.validate_end, 0]
    out = preds[splits.train_end : splits.validate_end, 0]
    norm_var = float(np.var(tgt))
    if ctx.fitness.metric == "nrmse":
        fit = float(np.sqrt(np.mean((tgt - out) ** 2) / norm_var))
    else:
        fit = float(np.mean((tgt - out) ** 2) / norm_var)
    return fit if np.isfinite(fit) else ctx.penalty


# Worker-side context for parallel evaluation (set once per pool via initializer).
_WORKER_CTX = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _eval_in_worker(coeffs):
    return evaluate_fitness(coeffs, _WORKER_CTX)


class _Evaluator:
    """Maps chromosomes to fitnesses, serially or over a process pool.

    Parallel evaluation is bit-identical to serial evaluation because every
    evaluation is a pure function of (chromosome, context).
    """

    def __init__(self, ctx, workers=None):
        if workers is None:
            workers = int(os.environ.get("EVOESN_WORKERS", "1"))
        self.ctx = ctx
        self.pool = None
        if workers > 1:
            self.pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                            initargs=(ctx,))

    def __call__(self, chromosomes):
        if not chromosomes:
            return []
        if self.pool is None:
            return [evaluate_fitness(c, self.ctx) for c in chromosomes]
        return list(self.pool.map(_eval_in_worker, chromosomes))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None


@dataclass
class GaState:
    population: list
    fitnesses: list
    generation: int
    hall_of_fame: tuple  # (coefficients, fitness)
    rng_state: dict
    mutation_sigma: float
    history: list = field(default_factory=list)

    def best(self):
        return self.hall_of_fame


def init_population(config, ctx, seed, workers=None):
    """Generation 0: encoded independently-sampled canonical reservoirs, all evaluated."""
    seq = np.random.SeedSequence(seed)
    child_seeds = seq.spawn(config.population_size + 1)
    population = [
        sample_canonical_coefficients(ctx, config.n_coefficients, child_seeds[i])
        for i in range(config.population_size)
    ]
    evaluator = _Evaluator(ctx, workers)
    try:
        fitnesses = evaluator(population)
    finally:
        evaluator.close()
    sigma = config.mutation_sigma
    if sigma is None:
        sigma = config.sigma_scale * float(np.std(np.concatenate(population)))
    best = int(np.argmin(fitnesses))
    rng = np.random.default_rng(child_seeds[config.population_size])
    state = GaState(
        population=population,
        fitnesses=list(map(float, fitnesses)),
        generation=0,
        hall_of_fame=(population[best].copy(), float(fitnesses[best])),
        rng_state=rng.bit_generator.state,
        mutation_sigma=float(sigma),
        history=[],
    )
    state.history.append(_history_row(state, 0.0))
    return state


def _history_row(state, wall_time):
    fits = np.asarray(state.fitnesses, dtype=float)
    return {
        "generation": state.generation,
        "best": float(fits.min()),
        "mean": float(fits.mean()),
        "std": float(fits.std()),
        "hof": float(state.hall_of_fame[1]),
        "wall_time": float(wall_time),
    }


def _tournament(rng, fitnesses, k):
    cand = rng.integers(0, len(fitnesses), size=k)
    fit = np.array([fitnesses[c] for c in cand])
    winners = cand[fit == fit.min()]
    if len(winners) == 1:
        return int(winners[0])
    return int(winners[rng.integers(0, len(winners))])  # ties broken by the run RNG


def _two_point_crossover(a, b, rng):
    n = len(a)
    c1, c2 = sorted(rng.choice(np.arange(1, n), size=2, replace=False))
    a2, b2 = a.copy(), b.copy()
    a2[c1:c2], b2[c1:c2] = b[c1:c2].copy(), a[c1:c2].copy()
    return a2, b2


def run_ga(state, ctx, config, generations=None, workers=None, on_generation=None):
    """Advance the evolutionary loop; returns the same state object, updated.

    Per generation: tournament selection, two-point crossover on adjacent
    mated pairs, Gaussian mutation, re-evaluation of modified individuals
    only, hall-of-fame update.  Stops early once the hall of fame has improved
    by less than ``stall_tolerance`` (relative) for ``stall_generations``
    consecutive generations.
    """
    if generations is None:
        generations = config.generations
    rng = np.random.default_rng()
    rng.bit_generator.state = state.rng_state
    evaluator = _Evaluator(ctx, workers)
    pop_n = config.population_size
    try:
        for _ in range(generations):
            t_start = time.perf_counter()
            idx = [_tournament(rng, state.fitnesses, config.tournament_size) for _ in range(pop_n)]
            offspring = [state.population[i].copy() for i in idx]
            fitness = [state.fitnesses[i] for i in idx]
            for i in range(1, pop_n, 2):
                if rng.random() < config.crossover_prob and len(offspring[i]) >= 2:
                    offspring[i - 1], offspring[i] = _two_point_crossover(
                        offspring[i - 1], offspring[i], rng
                    )
                    fitness[i - 1] = fitness[i] = None
            sigma = state.mutation_sigma * config.sigma_decay**state.generation
            for i in range(pop_n):
                if rng.random() < config.mutation_prob:
                    pert = rng.normal(0.0, sigma, len(offspring[i]))
                    if config.mutation_indpb < 1.0:
                        pert = np.where(rng.random(len(pert)) < config.mutation_indpb, pert, 0.0)
                    offspring[i] = offspring[i] + pert
                    fitness[i] = None
            todo = [i for i in range(pop_n) if fitness[i] is None]
            for i, fit in zip(todo, evaluator([offspring[i] for i in todo])):
                fitness[i] = float(fit)
            if config.elitism:
                worst = int(np.argmax(fitness))
                offspring[worst] = state.hall_of_fame[0].copy()
                fitness[worst] = state.hall_of_fame[1]
            state.population = offspring
            state.fitnesses = fitness
            state.generation += 1
            best = int(np.argmin(fitness))
            if fitness[best] < state.hall_of_fame[1]:
                state.hall_of_fame = (offspring[best].copy(), float(fitness[best]))
            state.rng_state = rng.bit_generator.state
            state.history.append(_history_row(state, time.perf_counter() - t_start))
            if on_generation is not None:
                on_generation(state)
            if _stalled(state.history, config):
                break
    finally:
        evaluator.close()
    return state


def _stalled(history, config):
    window = config.stall_generations
    if window <= 0 or len(history) <= window:
        return False
    past = history[-window - 1]["hof"]
    now = history[-1]["hof"]
    if past == 0:
        return now == 0
    return (past - now) / abs(past) < config.stall_tolerance


def save_checkpoint(state, path):
    """Atomic pickle of the full GA state; a resumed run replays identically."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "population": [np.asarray(c) for c in state.population],
        "fitnesses": list(state.fitnesses),
        "generation": state.generation,
        "hall_of_fame": (np.asarray(state.hall_of_fame[0]), state.hall_of_fame[1]),
        "rng_state": state.rng_state,
        "mutation_sigma": state.mutation_sigma,
        "history": state.history,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        pickle.dump(payload, fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        version = payload["format_version"]
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format version {version}")
        return GaState(
            population=[np.asarray(c) for c in payload["population"]],
            fitnesses=list(payload["fitnesses"]),
            generation=payload["generation"],
            hall_of_fame=(np.asarray(payload["hall_of_fame"][0]), payload["hall_of_fame"][1]),
            rng_state=payload["rng_state"],
            mutation_sigma=payload["mutation_sigma"],
            history=list(payload["history"]),
        )
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc


def write_history(history, path, delimiter="\t"):
    """Per-generation records as delimited text."""
    cols = ["generation", "best", "mean", "std", "hof", "wall_time"]
    with open(path, "w") as fh:
        fh.write(delimiter.join(cols) + "\n")
        for row in history:
            fh.write(delimiter.join(format(row[c], ".10g") for c in cols) + "\n")
