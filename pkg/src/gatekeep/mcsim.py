"""Monte Carlo estimation of the overall familywise error rate.

For a given strategy and a truth assignment (which hypotheses are true
nulls), each replicate draws a p-value vector, runs the strategy, and
records whether any true null was rejected. The estimate comes with its
binomial standard error; strong control means the estimate stays at or
below the global level (up to noise) for every truth assignment.

Reproducibility contract: replicate r draws from a counter-based stream
keyed by (seed, r), so results are bit-identical for a given config no
matter how replicates are scheduled or batched.

P-value generation: every hypothesis gets a standard normal score; under
the equicorrelated model the scores share a common factor with correlation
rho. False nulls get a one-sided mean shift delta, and scores map to
p-values through the upper-tail normal transform, which makes true-null
p-values exactly Uniform(0, 1).

The replicate loop does not call the scalar engine; it uses a vectorized
twin (`batch_run`) that evaluates all replicates at once. The twin is held
to the scalar engine by agreement tests, never used in its place outside
simulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import GatekeepError, InvalidSpecError, SpecFormatError
from .graph import GraphSpec, spec_from_json, spec_to_json, validate_spec

MODEL_KINDS = ("independent_uniform", "equicorrelated_normal")

TRUE_NULL = "true_null"
FALSE_NULL = "false_null"


@dataclass(frozen=True)
class PValueModel:
    """How replicate p-values are generated.

    delta is the one-sided normal shift applied to false nulls; rho is the
    common-factor correlation (equicorrelated_normal only).
    """

    kind: str = "independent_uniform"
    rho: float = 0.0
    delta: float = 3.0


@dataclass(frozen=True)
class SimConfig:
    spec: GraphSpec
    truth: Mapping[str, str]
    model: PValueModel = field(default_factory=PValueModel)
    reps: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class SimResult:
    fwer_hat: float
    se: float
    rejections_per_hypothesis: Mapping[str, int]
    reps: int
    seed: int


def _check_config(config: SimConfig) -> None:
    outcome = validate_spec(config.spec)
    if not outcome.ok:
        raise InvalidSpecError(outcome.violations)
    labels = set(config.spec.labels())
    missing = sorted(labels - set(config.truth))
    extra = sorted(set(config.truth) - labels)
    if missing or extra:
        raise ValueError(f"truth labels mismatch: missing {missing}, extra {extra}")
    bad = sorted(
        label for label, t in config.truth.items() if t not in (TRUE_NULL, FALSE_NULL)
    )
    if bad:
        raise ValueError(f"truth values must be true_null/false_null; bad: {bad}")
    m = config.model
    if m.kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {m.kind!r}")
    if m.kind == "equicorrelated_normal":
        if not 0.0 <= m.rho < 1.0:
            raise ValueError(f"rho {m.rho!r} outside [0, 1)")
    elif m.rho != 0.0:
        raise ValueError("rho only applies to equicorrelated_normal")
    if m.delta < 0.0:
        raise ValueError(f"delta {m.delta!r} must be nonnegative")
    if config.reps < 1:
        raise ValueError(f"reps {config.reps!r} must be at least 1")


def draw_scores(
    seed: int, reps: int, n: int, kind: str = "independent_uniform", rho: float = 0.0
) -> np.ndarray:
    """Draw the (reps, n) matrix of standard normal scores.

    Row r comes entirely from the stream keyed by (seed, r); the result
    depends only on the arguments, never on batching.
    """
    out = np.empty((reps, n))
    base = (seed % (1 << 64)) << 64
    if kind == "equicorrelated_normal":
        a = math.sqrt(rho)
        b = math.sqrt(1.0 - rho)
        for r in range(reps):
            rng = np.random.Generator(np.random.Philox(key=base | r))
            vals = rng.standard_normal(n + 1)
            out[r] = a * vals[0] + b * vals[1:]
    else:
        for r in range(reps):
            rng = np.random.Generator(np.random.Philox(key=base | r))
            out[r] = rng.standard_normal(n)
    return out


def simulate_fwer(config: SimConfig, _scores: np.ndarray | None = None) -> SimResult:
    """Estimate the overall FWER of `config.spec` under `config.truth`.

    With no true nulls the estimate is exactly 0. `_scores` lets sweeps
    reuse one score matrix across truth assignments sharing a seed/model;
    it must come from :func:`draw_scores` with this config's parameters.
    """
    _check_config(config)
    labels = config.spec.labels()
    n = len(labels)
    false_mask = np.array(
        [config.truth[label] == FALSE_NULL for label in labels], dtype=bool
    )
    true_mask = ~false_mask

    if _scores is None:
        _scores = draw_scores(
            config.seed, config.reps, n, config.model.kind, config.model.rho
        )
    elif _scores.shape != (config.reps, n):
        raise ValueError(f"score matrix shape {_scores.shape} != ({config.reps}, {n})")
    pmat = ndtr(-(_scores + config.model.delta * false_mask))

    rejected = batch_run(config.spec, pmat)
    counts = rejected.sum(axis=0)
    if true_mask.any():
        hits = (rejected & true_mask).any(axis=1)
        fwer_hat = float(hits.mean())
    else:
        fwer_hat = 0.0
    se = math.sqrt(fwer_hat * (1.0 - fwer_hat) / config.reps)
    return SimResult(
        fwer_hat=fwer_hat,
        se=se,
        rejections_per_hypothesis={
            label: int(counts[k]) for k, label in enumerate(labels)
        },
        reps=config.reps,
        seed=config.seed,
    )


class SweepError(GatekeepError):
    """One or more sweep elements failed; the rest were still computed.

    `errors` holds (index, exception) pairs; `results` maps the indices
    that succeeded to their SimResult.
    """

    def __init__(self, errors, results):
        self.errors = tuple(errors)
        self.results = dict(results)
        detail = "; ".join(f"config {i}: {exc}" for i, exc in self.errors)
        super().__init__(f"{len(self.errors)} sweep element(s) failed: {detail}")


def sweep(configs: Sequence[SimConfig]) -> list[SimResult]:
    """simulate_fwer for each config, in order.

    Score matrices are shared across configs that agree on (seed, reps,
    model, hypothesis count), which makes truth-assignment sweeps cheap.
    A failing element does not stop the others; if any failed, a SweepError
    carrying all element errors (and the successful results) is raised.
    """
    cache: dict[tuple, np.ndarray] = {}
    results: dict[int, SimResult] = {}
    errors: list[tuple[int, Exception]] = []
    for i, config in enumerate(configs):
        try:
            key = (
                config.seed,
                config.reps,
                len(config.spec.labels()),
                config.model.kind,
                config.model.rho,
            )
            if key not in cache:
                cache[key] = draw_scores(*key[:3], kind=key[3], rho=key[4])
            results[i] = simulate_fwer(config, _scores=cache[key])
        except Exception as exc:  # noqa: BLE001 - per-element isolation
            errors.append((i, exc))
    if errors:
        raise SweepError(errors, results)
    return [results[i] for i in range(len(configs))]


def truth_mask(config: SimConfig) -> str:
    """'1'/'0' per hypothesis (spec label order): 1 marks a true null."""
    return "".join(
        "1" if config.truth[label] == TRUE_NULL else "0"
        for label in config.spec.labels()
    )


def sweep_to_csv(configs: Sequence[SimConfig], results: Sequence[SimResult]) -> str:
    """One CSV row per config: truth mask, estimate, standard error, reps, seed."""
    lines = ["truth_mask,fwer_hat,se,reps,seed"]
    for config, result in zip(configs, results):
        lines.append(
            f"{truth_mask(config)},{result.fwer_hat!r},{result.se!r},"
            f"{result.reps},{result.seed}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Vectorized strategy evaluation (all replicates at once)
# ---------------------------------------------------------------------------


def batch_run(spec: GraphSpec, pmat: np.ndarray) -> np.ndarray:
    """Evaluate the strategy on every row of `pmat` simultaneously.

    `pmat` has one column per hypothesis in `spec.labels()` order. Returns
    a boolean matrix of the same shape: True where rejected. Agrees with
    `engine.run` row by row.
    """
    outcome = validate_spec(spec)
    if not outcome.ok:
        raise InvalidSpecError(outcome.violations)
    labels = spec.labels()
    pmat = np.asarray(pmat, dtype=float)
    if pmat.ndim != 2 or pmat.shape[1] != len(labels):
        raise ValueError(f"p matrix must be (reps, {len(labels)})")
    if pmat.size and (pmat.min() < 0.0 or pmat.max() > 1.0):
        raise ValueError("p-values outside [0, 1]")

    reps = pmat.shape[0]
    col = {label: k for k, label in enumerate(labels)}
    name_of = {fam.index: fam.name for fam in spec.families()}
    levels = {fam.name: np.full(reps, fam.initial_alpha) for fam in spec.families()}
    rejected = np.zeros_like(pmat, dtype=bool)

    for fam in spec.families():
        level = levels[fam.name]
        cols = np.array([col[label] for label in fam.labels])
        if fam.procedure.kind == "fixed_sequence":
            positions = [fam.labels.index(label) for label in fam.procedure.order]
            rej = _batch_test_fixed_sequence(positions, pmat[:, cols], level)
        else:
            rej = _batch_test(fam.procedure, pmat[:, cols], level)
        e_star = _batch_bound(fam.procedure, ~rej, level)
        spendable = np.maximum(level - e_star, 0.0)
        for dst, g in spec.transitions.outgoing(fam.index).items():
            if g > 0.0:
                levels[name_of[dst]] = levels[name_of[dst]] + spendable * g
        rejected[:, cols] = rej
    return rejected


def _batch_test(proc, pmat: np.ndarray, level: np.ndarray) -> np.ndarray:
    """Vectorized twin of procedures.test_family over replicate rows."""
    reps, n = pmat.shape
    if proc.kind == "bonferroni":
        w = np.array(proc.weights) if proc.weights else np.full(n, 1.0 / n)
        thr = w[None, :] * level[:, None]
        return (pmat <= thr) & (thr > 0.0)

    if proc.kind == "holm":
        w = np.array(proc.weights) if proc.weights else np.full(n, 1.0 / n)
        active = np.ones((reps, n), dtype=bool)
        for _ in range(n):
            total = (active * w[None, :]).sum(axis=1)
            thr = (w[None, :] / np.maximum(total, 1e-300)[:, None]) * level[:, None]
            thr = np.where((total > 0.0)[:, None], thr, 0.0)
            eligible = active & (pmat <= thr) & (thr > 0.0)
            if not eligible.any():
                break
            active &= ~eligible
        return ~active

    if proc.kind == "truncated_holm":
        # Step-down; rejecting any batch of currently eligible hypotheses
        # only raises later thresholds, so iterating to a fixed point gives
        # the same set as the one-at-a-time walk.
        active = np.ones((reps, n), dtype=bool)
        for _ in range(n):
            n_rem = active.sum(axis=1)
            coef = proc.gamma / np.maximum(n_rem, 1) + (1.0 - proc.gamma) / n
            thr = coef[:, None] * level[:, None]
            eligible = active & (pmat <= thr) & (thr > 0.0)
            if not eligible.any():
                break
            active &= ~eligible
        return ~active

    if proc.kind in ("hochberg", "truncated_hochberg"):
        gamma = 1.0 if proc.kind == "hochberg" else proc.gamma
        order = np.argsort(pmat, axis=1, kind="stable")
        sorted_p = np.take_along_axis(pmat, order, axis=1)
        i = np.arange(1, n + 1)
        coef = gamma / (n - i + 1) + (1.0 - gamma) / n
        thr = coef[None, :] * level[:, None]
        ok = (sorted_p <= thr) & (thr > 0.0)
        n_reject = np.max(np.where(ok, i[None, :], 0), axis=1)
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.broadcast_to(np.arange(n), order.shape), axis=1)
        return ranks < n_reject[:, None]

    # fixed_sequence: proc.order resolved to family positions by the caller's
    # label order, which matches pmat's column order for this family.
    raise ValueError(f"unsupported procedure kind {proc.kind!r}")


def _batch_test_fixed_sequence(
    positions: Sequence[int], pmat: np.ndarray, level: np.ndarray
) -> np.ndarray:
    ok = (pmat[:, positions] <= level[:, None]) & (level > 0.0)[:, None]
    streak = np.logical_and.accumulate(ok, axis=1)
    rejected = np.zeros_like(pmat, dtype=bool)
    rejected[:, positions] = streak
    return rejected


def _batch_bound(proc, accepted: np.ndarray, level: np.ndarray) -> np.ndarray:
    """Vectorized twin of procedures.error_rate_bound."""
    n = accepted.shape[1]
    count = accepted.sum(axis=1)
    nonempty = count > 0
    if proc.kind == "bonferroni":
        w = np.array(proc.weights) if proc.weights else np.full(n, 1.0 / n)
        bound = level * (accepted * w[None, :]).sum(axis=1)
    elif proc.kind in ("holm", "hochberg", "fixed_sequence"):
        bound = np.where(nonempty, level, 0.0)
    else:  # truncated_holm, truncated_hochberg
        factor = proc.gamma + (1.0 - proc.gamma) * count / n
        bound = np.where(nonempty, factor * level, 0.0)
    return np.minimum(np.maximum(bound, 0.0), level)


# ---------------------------------------------------------------------------
# JSON / file formats
# ---------------------------------------------------------------------------


def sim_config_to_json(config: SimConfig, indent: int | None = 2) -> str:
    obj = {
        "spec": json.loads(spec_to_json(config.spec)),
        "truth": dict(sorted(config.truth.items())),
        "model": {
            "kind": config.model.kind,
            "rho": config.model.rho,
            "delta": config.model.delta,
        },
        "reps": config.reps,
        "seed": config.seed,
    }
    return json.dumps(obj, indent=indent, sort_keys=True)


def _config_from_obj(obj, seed: int | None) -> SimConfig:
    if not isinstance(obj, dict):
        raise SpecFormatError("config must be an object")
    for key in ("spec", "truth", "reps"):
        if key not in obj:
            raise SpecFormatError(f"config missing required key {key!r}")
    spec = spec_from_json(json.dumps(obj["spec"]))
    truth = obj["truth"]
    if not isinstance(truth, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in truth.items()
    ):
        raise SpecFormatError("truth must map labels to true_null/false_null")
    model_obj = obj.get("model", {})
    if not isinstance(model_obj, dict):
        raise SpecFormatError("model must be an object")
    model = PValueModel(
        kind=model_obj.get("kind", "independent_uniform"),
        rho=float(model_obj.get("rho", 0.0)),
        delta=float(model_obj.get("delta", 3.0)),
    )
    if not isinstance(obj["reps"], int):
        raise SpecFormatError("reps must be an integer")
    effective_seed = obj.get("seed", seed)
    if effective_seed is None:
        raise SpecFormatError("no seed: provide one in the config or via --seed")
    if not isinstance(effective_seed, int):
        raise SpecFormatError("seed must be an integer")
    return SimConfig(spec, dict(truth), model, obj["reps"], effective_seed)


def sim_configs_from_json(text: str, seed: int | None = None) -> list[SimConfig]:
    """Parse one config object or a list of them; `seed` fills missing seeds."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"not valid JSON: {exc}") from None
    if isinstance(obj, list):
        return [_config_from_obj(entry, seed) for entry in obj]
    return [_config_from_obj(obj, seed)]


def sim_result_to_json(result: SimResult, indent: int | None = 2) -> str:
    obj = {
        "fwer_hat": result.fwer_hat,
        "se": result.se,
        "rejections_per_hypothesis": dict(
            sorted(result.rejections_per_hypothesis.items())
        ),
        "reps": result.reps,
        "seed": result.seed,
    }
    return json.dumps(obj, indent=indent, sort_keys=True)
