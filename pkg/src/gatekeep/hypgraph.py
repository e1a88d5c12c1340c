"""Hypothesis-level sequentially rejective graphical procedure.

This is the classical one-vertex-per-hypothesis formulation: each hypothesis
carries a weight (its share of the global level), and rejecting a hypothesis
redistributes its weight and rewires the remaining transition coefficients.
It serves as an independent oracle for the family-based engine: strategies
expressible in both forms must reject exactly the same hypotheses.

Serial constraints ("test H3 only after H1 AND H2 are rejected") need edges
with infinitesimally small coefficients. Those are handled exactly, not with
a tiny float: every weight and coefficient is carried as real + eps parts,
where eps is a positive infinitesimal. An edge listed in `epsilon_edges`
contributes `cell * eps` instead of `cell`, and the other edges out of that
source are scaled by (1 - C*eps) so each row still sums to 1 in the limit.
Second-order eps terms are dropped; a threshold whose real part is zero but
whose eps part is positive rejects only p = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import InvalidSpecError, SpecFormatError
from .graph import (
    GraphSpec,
    SUM_TOL,
    ValidationOutcome,
    make_spec,
)
from . import procedures as proc

_REAL_EPS = 1e-14

Dual = tuple[float, float]  # (real part, eps coefficient)


def _add(x: Dual, y: Dual) -> Dual:
    return (x[0] + y[0], x[1] + y[1])


def _mul(x: Dual, y: Dual) -> Dual:
    return (x[0] * y[0], x[0] * y[1] + x[1] * y[0])


def _div(num: Dual, den: Dual) -> Dual:
    a, b = num
    c, d = den
    if c > _REAL_EPS:
        return (a / c, (b * c - a * d) / (c * c))
    if d > _REAL_EPS and abs(a) <= _REAL_EPS:
        # Real parts vanish together (mutual full-transfer cycle); the
        # limit is the ratio of the eps parts.
        return (b / d, 0.0)
    return (0.0, 0.0)


@dataclass(frozen=True)
class HypothesisGraph:
    """Weighted directed graph over individual hypotheses.

    `transitions[j][k]` is the coefficient from hypothesis j to k; when
    (j, k) appears in `epsilon_edges` the cell holds the multiplier of an
    infinitesimal coefficient instead. Indices are 0-based positions in
    `labels`.
    """

    alpha: float
    labels: tuple[str, ...]
    weights: tuple[float, ...]
    transitions: tuple[tuple[float, ...], ...]
    epsilon_edges: frozenset[tuple[int, int]] = frozenset()


def validate_graph(graph: HypothesisGraph) -> ValidationOutcome:
    """Check all structural invariants; report every violation."""
    v: list[str] = []
    n = len(graph.labels)
    if n == 0:
        v.append("no hypotheses")
    if len(set(graph.labels)) != n:
        v.append("duplicate hypothesis labels")
    if not 0.0 <= graph.alpha <= 1.0:
        v.append(f"alpha {graph.alpha!r} outside [0, 1]")
    if len(graph.weights) != n:
        v.append(f"{len(graph.weights)} weights for {n} hypotheses")
    else:
        if any(w < 0 for w in graph.weights):
            v.append("negative weight")
        if sum(graph.weights) > 1.0 + SUM_TOL:
            v.append(f"weights sum to {sum(graph.weights)!r} > 1")
    if len(graph.transitions) != n or any(len(row) != n for row in graph.transitions):
        v.append(f"transition matrix is not {n}x{n}")
        return ValidationOutcome(tuple(v))
    for j, k in graph.epsilon_edges:
        if not (0 <= j < n and 0 <= k < n) or j == k:
            v.append(f"epsilon edge ({j}, {k}) out of range or diagonal")
    for j in range(n):
        real_sum = 0.0
        eps_sum = 0.0
        for k in range(n):
            g = graph.transitions[j][k]
            if j == k:
                if g != 0.0:
                    v.append(f"nonzero diagonal at {j}")
                continue
            if not 0.0 <= g <= 1.0:
                v.append(f"coefficient {g!r} at ({j}, {k}) outside [0, 1]")
            if (j, k) in graph.epsilon_edges:
                eps_sum += g
            else:
                real_sum += g
        if real_sum > 1.0 + SUM_TOL:
            v.append(f"row {j} sums to {real_sum!r} > 1")
        if eps_sum > 1.0 + SUM_TOL:
            v.append(f"row {j} epsilon multipliers sum to {eps_sum!r} > 1")
    return ValidationOutcome(tuple(v))


def _dual_transitions(graph: HypothesisGraph) -> list[list[Dual]]:
    n = len(graph.labels)
    dual: list[list[Dual]] = []
    for j in range(n):
        c_total = sum(
            graph.transitions[j][k] for k in range(n) if (j, k) in graph.epsilon_edges
        )
        row: list[Dual] = []
        for k in range(n):
            g = graph.transitions[j][k]
            if (j, k) in graph.epsilon_edges:
                row.append((0.0, g))
            else:
                # scale by (1 - c_total*eps) so the row sums to 1 exactly
                row.append((g, -g * c_total))
        dual.append(row)
    return dual


def _rejects(p: float, w: Dual, alpha: float) -> bool:
    threshold = w[0] * alpha
    if p < threshold:
        return True
    if p == threshold:
        if w[1] > 0.0:
            return True
        return w[1] == 0.0 and w[0] > 0.0
    return False


def run_hypothesis_graph(
    graph: HypothesisGraph,
    pvalues: Mapping[str, float],
    pick: Callable[[list[int]], int] | None = None,
    trace: list | None = None,
) -> frozenset[str]:
    """Run the sequentially rejective procedure; return rejected labels.

    `pick` chooses which eligible hypothesis to reject next (default: the
    lowest index); the final rejection set does not depend on the choice.
    When `trace` is a list, one (rejected_label, {label: weight}) snapshot
    of the still-active dual weights is appended per rejection.
    """
    outcome = validate_graph(graph)
    if not outcome.ok:
        raise InvalidSpecError(outcome.violations)
    missing = sorted(set(graph.labels) - set(pvalues))
    extra = sorted(set(pvalues) - set(graph.labels))
    if missing or extra:
        raise ValueError(f"p-value labels mismatch: missing {missing}, extra {extra}")
    for label in graph.labels:
        if not 0.0 <= pvalues[label] <= 1.0:
            raise ValueError(f"p-value {pvalues[label]!r} for {label} outside [0, 1]")

    n = len(graph.labels)
    p = [pvalues[label] for label in graph.labels]
    w: list[Dual] = [(x, 0.0) for x in graph.weights]
    g = _dual_transitions(graph)
    active = set(range(n))
    rejected: set[int] = set()

    while True:
        eligible = sorted(j for j in active if _rejects(p[j], w[j], graph.alpha))
        if not eligible:
            break
        j = pick(eligible) if pick is not None else eligible[0]
        if j not in eligible:
            raise ValueError(f"pick returned ineligible index {j}")
        active.remove(j)
        rejected.add(j)
        for l in active:
            w[l] = _add(w[l], _mul(w[j], g[j][l]))
        if trace is not None:
            trace.append(
                (graph.labels[j], {graph.labels[l]: w[l] for l in sorted(active)})
            )
        new_g = [row[:] for row in g]
        for l in active:
            for k in active:
                if l == k:
                    continue
                num = _add(g[l][k], _mul(g[l][j], g[j][k]))
                den = _add((1.0, 0.0), _mul((-1.0, 0.0), _mul(g[l][j], g[j][l])))
                quotient = _div(num, den)
                new_g[l][k] = (max(quotient[0], 0.0), quotient[1])
        g = new_g

    return frozenset(graph.labels[j] for j in rejected)


# ---------------------------------------------------------------------------
# Paired benchmark strategies (hypothesis-level graph + family-level twin)
# ---------------------------------------------------------------------------


def _matrix(n: int, cells: Mapping[tuple[int, int], float]) -> tuple[tuple[float, ...], ...]:
    return tuple(
        tuple(cells.get((j, k), 0.0) for k in range(n)) for j in range(n)
    )


def bonferroni_gate_pair(alpha: float) -> tuple[HypothesisGraph, GraphSpec]:
    """Two singleton gatekeepers each feeding one Holm-tested pair.

    Layer 1 holds {H1} and {H2} at alpha/2 under Bonferroni; each passes its
    full unspent level to the pair {H3, H4}, tested by Holm.
    """
    half = alpha / 2.0
    hyp = HypothesisGraph(
        alpha=alpha,
        labels=("H1", "H2", "H3", "H4"),
        weights=(0.5, 0.5, 0.0, 0.0),
        transitions=_matrix(
            4,
            {
                (0, 2): 0.5, (0, 3): 0.5,
                (1, 2): 0.5, (1, 3): 0.5,
                (2, 3): 1.0, (3, 2): 1.0,
            },
        ),
    )
    fam = make_spec(
        alpha,
        [
            [
                ("F11", ["H1"], half, proc.bonferroni()),
                ("F12", ["H2"], half, proc.bonferroni()),
            ],
            [("F21", ["H3", "H4"], 0.0, proc.holm())],
        ],
        {("F11", "F21"): 1.0, ("F12", "F21"): 1.0},
    )
    return hyp, fam


def serial_holm_gate_single(alpha: float) -> tuple[HypothesisGraph, GraphSpec]:
    """A Holm-tested pair that must be fully rejected before one follow-up.

    The hypothesis-level form needs infinitesimal edges into H3; the
    family-level form is just two layers with a full transfer.
    """
    hyp = HypothesisGraph(
        alpha=alpha,
        labels=("H1", "H2", "H3"),
        weights=(0.5, 0.5, 0.0),
        transitions=_matrix(
            3,
            {(0, 1): 1.0, (1, 0): 1.0, (0, 2): 1.0, (1, 2): 1.0},
        ),
        epsilon_edges=frozenset({(0, 2), (1, 2)}),
    )
    fam = make_spec(
        alpha,
        [
            [("F1", ["H1", "H2"], alpha, proc.holm())],
            [("F2", ["H3"], 0.0, proc.bonferroni())],
        ],
        {("F1", "F2"): 1.0},
    )
    return hyp, fam


def serial_holm_gate_weighted_pair(
    alpha: float, w1: float, w2: float
) -> tuple[HypothesisGraph, GraphSpec]:
    """A Holm-tested pair serially gating a weighted-Holm pair.

    Once both gatekeepers are rejected the full level splits w1 : w2 between
    H3 and H4 (w1 + w2 must be 1).
    """
    if abs(w1 + w2 - 1.0) > SUM_TOL or w1 < 0 or w2 < 0:
        raise ValueError(f"weights ({w1}, {w2}) must be nonnegative and sum to 1")
    hyp = HypothesisGraph(
        alpha=alpha,
        labels=("H1", "H2", "H3", "H4"),
        weights=(0.5, 0.5, 0.0, 0.0),
        transitions=_matrix(
            4,
            {
                (0, 1): 1.0, (1, 0): 1.0,
                (0, 2): w1, (0, 3): w2,
                (1, 2): w1, (1, 3): w2,
                (2, 3): 1.0, (3, 2): 1.0,
            },
        ),
        epsilon_edges=frozenset({(0, 2), (0, 3), (1, 2), (1, 3)}),
    )
    fam = make_spec(
        alpha,
        [
            [("F1", ["H1", "H2"], alpha, proc.holm())],
            [("F2", ["H3", "H4"], 0.0, proc.holm(weights=(w1, w2)))],
        ],
        {("F1", "F2"): 1.0},
    )
    return hyp, fam


def truncated_holm_gate(alpha: float, gamma: float) -> tuple[HypothesisGraph, GraphSpec]:
    """Parallel gatekeeping: a truncated-Holm pair feeding a Holm pair.

    The truncation parameter interpolates between Bonferroni (gamma=0,
    maximal transfer) and Holm (gamma -> 1, maximal within-family power).
    """
    spread = (1.0 - gamma) / 2.0
    hyp = HypothesisGraph(
        alpha=alpha,
        labels=("H1", "H2", "H3", "H4"),
        weights=(0.5, 0.5, 0.0, 0.0),
        transitions=_matrix(
            4,
            {
                (0, 1): gamma, (0, 2): spread, (0, 3): spread,
                (1, 0): gamma, (1, 2): spread, (1, 3): spread,
                (2, 3): 1.0, (3, 2): 1.0,
            },
        ),
    )
    fam = make_spec(
        alpha,
        [
            [("F1", ["H1", "H2"], alpha, proc.truncated_holm(gamma))],
            [("F2", ["H3", "H4"], 0.0, proc.holm())],
        ],
        {("F1", "F2"): 1.0},
    )
    return hyp, fam


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def graph_to_json(graph: HypothesisGraph, indent: int | None = 2) -> str:
    obj = {
        "alpha": graph.alpha,
        "hypotheses": list(graph.labels),
        "weights": list(graph.weights),
        "transitions": [list(row) for row in graph.transitions],
        "epsilon_edges": sorted([j, k] for j, k in graph.epsilon_edges),
    }
    return json.dumps(obj, indent=indent, sort_keys=True)


def graph_from_json(text: str) -> HypothesisGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SpecFormatError("top level must be an object")
    for key in ("alpha", "hypotheses", "weights", "transitions"):
        if key not in obj:
            raise SpecFormatError(f"missing required key {key!r}")
    labels = obj["hypotheses"]
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise SpecFormatError("hypotheses must be a list of labels")
    weights = obj["weights"]
    if not isinstance(weights, list) or not all(
        isinstance(x, (int, float)) for x in weights
    ):
        raise SpecFormatError("weights must be a list of numbers")
    rows = obj["transitions"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise SpecFormatError("transitions must be a matrix")
    for row in rows:
        if not all(isinstance(x, (int, float)) for x in row):
            raise SpecFormatError("transitions must be numeric")
    eps = []
    for entry in obj.get("epsilon_edges", []):
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(i, int) for i in entry)
        ):
            raise SpecFormatError("epsilon_edges must be [j, k] index pairs")
        eps.append((entry[0], entry[1]))
    return HypothesisGraph(
        alpha=float(obj["alpha"]),
        labels=tuple(labels),
        weights=tuple(float(x) for x in weights),
        transitions=tuple(tuple(float(x) for x in row) for row in rows),
        epsilon_edges=frozenset(eps),
    )
