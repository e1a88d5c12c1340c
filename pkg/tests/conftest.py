"""Shared strategy builders and generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import gatekeep as gk
from gatekeep import procedures as proc

# Nine-endpoint dose-comparison p-values used by the golden tests: three
# families (one per endpoint), three dose levels each.
TABLE_PVALUES = {
    "H11": 0.005, "H12": 0.011, "H13": 0.018,
    "H21": 0.009, "H22": 0.026, "H23": 0.013,
    "H31": 0.010, "H32": 0.006, "H33": 0.051,
}

NINE = tuple(sorted(TABLE_PVALUES))


def two_layer_fixed_sequence_spec() -> gk.GraphSpec:
    """Fixed-sequence locals; secondary families share layer 2 and split
    the primary family's unspent level equally."""
    return gk.make_spec(
        0.05,
        [
            [("F1", ["H11", "H12", "H13"], 0.04,
              proc.fixed_sequence(["H11", "H12", "H13"]))],
            [("F2", ["H21", "H22", "H23"], 0.005,
              proc.fixed_sequence(["H21", "H22", "H23"])),
             ("F3", ["H31", "H32", "H33"], 0.005,
              proc.fixed_sequence(["H31", "H32", "H33"]))],
        ],
        {("F1", "F2"): 0.5, ("F1", "F3"): 0.5},
    )


def three_layer_step_up_spec() -> gk.GraphSpec:
    """Truncated-Hochberg locals on the first two layers, Hochberg last;
    the primary family splits 0.8/0.2 between the two secondaries."""
    return gk.make_spec(
        0.05,
        [
            [("F1", ["H11", "H12", "H13"], 0.04, proc.truncated_hochberg(0.5))],
            [("F2", ["H21", "H22", "H23"], 0.005, proc.truncated_hochberg(0.5))],
            [("F3", ["H31", "H32", "H33"], 0.005, proc.hochberg())],
        ],
        {("F1", "F2"): 0.8, ("F1", "F3"): 0.2, ("F2", "F3"): 1.0},
    )


def serial_chain_spec(gamma: float = 0.5) -> gk.GraphSpec:
    """Three-family chain, all level starts at the front: alpha, 0, 0."""
    return gk.make_spec(
        0.05,
        [
            [("F1", ["H11", "H12", "H13"], 0.05, proc.truncated_holm(gamma))],
            [("F2", ["H21", "H22", "H23"], 0.0, proc.truncated_holm(gamma))],
            [("F3", ["H31", "H32", "H33"], 0.0, proc.holm())],
        ],
        {("F1", "F2"): 1.0, ("F2", "F3"): 1.0},
    )


def parallel_split_spec(gamma: float = 0.5) -> gk.GraphSpec:
    """Chain variant where F1 also feeds F3 directly (0.8 / 0.2 split) and
    every family starts with its own nonzero level."""
    return gk.make_spec(
        0.05,
        [
            [("F1", ["H11", "H12", "H13"], 0.04, proc.truncated_holm(gamma))],
            [("F2", ["H21", "H22", "H23"], 0.005, proc.truncated_holm(gamma))],
            [("F3", ["H31", "H32", "H33"], 0.005, proc.holm())],
        ],
        {("F1", "F2"): 0.8, ("F1", "F3"): 0.2, ("F2", "F3"): 1.0},
    )


def all_true_null(spec: gk.GraphSpec) -> dict[str, str]:
    return {label: "true_null" for label in spec.labels()}


# ---------------------------------------------------------------------------
# Random strategy generation for property tests
# ---------------------------------------------------------------------------


def random_procedure(rng: np.random.Generator, labels) -> gk.LocalProcedureSpec:
    n = len(labels)
    kind = str(rng.choice(list(proc.KINDS)))
    if kind in ("truncated_holm", "truncated_hochberg"):
        return gk.LocalProcedureSpec(kind, gamma=float(rng.uniform(0.0, 0.95)))
    if kind == "fixed_sequence":
        order = list(labels)
        rng.shuffle(order)
        return proc.fixed_sequence(order)
    if kind in ("bonferroni", "holm") and rng.random() < 0.5:
        w = rng.dirichlet(np.ones(n))
        return gk.LocalProcedureSpec(kind, weights=tuple(float(x) for x in w))
    return gk.LocalProcedureSpec(kind)


def random_spec(
    rng: np.random.Generator,
    max_layers: int = 3,
    max_families: int = 2,
    max_size: int = 4,
    kinds: tuple[str, ...] | None = None,
) -> gk.GraphSpec:
    """A random valid strategy; every draw is derived from `rng`."""
    alpha = float(rng.uniform(0.01, 0.2))
    n_layers = int(rng.integers(1, max_layers + 1))
    label_counter = 0
    layers = []
    names = []
    for i in range(n_layers):
        layer = []
        for j in range(int(rng.integers(1, max_families + 1))):
            size = int(rng.integers(1, max_size + 1))
            labels = [f"H{label_counter + k + 1}" for k in range(size)]
            label_counter += size
            name = f"F{i + 1}{j + 1}"
            if kinds is None:
                procedure = random_procedure(rng, labels)
            else:
                kind = str(rng.choice(list(kinds)))
                if kind == "fixed_sequence":
                    order = list(labels)
                    rng.shuffle(order)
                    procedure = proc.fixed_sequence(order)
                elif kind in ("truncated_holm", "truncated_hochberg"):
                    procedure = gk.LocalProcedureSpec(kind, gamma=float(rng.uniform(0, 0.95)))
                else:
                    procedure = gk.LocalProcedureSpec(kind)
            layer.append((name, labels, 0.0, procedure))
            names.append((i, name))
        layers.append(layer)

    # initial levels: a random sub-allocation of alpha
    shares = rng.dirichlet(np.ones(len(names))) * alpha * float(rng.uniform(0.3, 1.0))
    k = 0
    for layer in layers:
        for idx in range(len(layer)):
            name, labels, _, procedure = layer[idx]
            layer[idx] = (name, labels, float(shares[k]), procedure)
            k += 1

    transitions = {}
    for li, src in names:
        targets = [name for lj, name in names if lj > li]
        if not targets:
            continue
        raw = rng.uniform(0.0, 1.0, size=len(targets))
        raw *= float(rng.uniform(0.0, 1.0)) / max(raw.sum(), 1e-9)
        for t, g in zip(targets, raw):
            if g > 1e-3:
                transitions[(src, t)] = float(min(g, 1.0))
    return gk.make_spec(alpha, layers, transitions)


def random_pvalues(rng: np.random.Generator, spec: gk.GraphSpec) -> dict[str, float]:
    # Mix of small and moderate values so transfers actually fire.
    return {
        label: float(rng.uniform(0.0, 0.3 if rng.random() < 0.7 else 1.0))
        for label in spec.labels()
    }


def rejected_labels(report: gk.TestReport) -> frozenset[str]:
    return frozenset(l for l, d in report.decisions.items() if d == "S")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
