"""Execution engine for family-based gatekeeping strategies.

Layers are processed first to last. Testing a family consumes its current
critical value; the unspent part, level - e*(accepted), is split among
later families according to the family's outgoing transition coefficients,
whose entries are then zeroed. Families inside one layer never exchange
critical value (such edges are invalid), so within-layer order cannot
change the outcome; `run` uses declared order for a deterministic audit
trail.

`step` advances one family at a time and never mutates its input state, so
callers can fork execution paths. `replay` re-derives every level, bound
and transfer from a report's rejection sets, catching corrupted or
hand-edited reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

from .errors import InvalidSpecError, SpecFormatError
from .graph import GraphSpec, ValidationOutcome, validate_spec
from .procedures import FamilyTestInput, error_rate_bound, test_family

REPLAY_TOL = 1e-12


@dataclass(frozen=True)
class Transfer:
    """Critical value passed to one later family after a test."""

    target: str
    amount: float


@dataclass(frozen=True)
class FamilyOutcome:
    """Audit record for one tested family."""

    family: str
    level_used: float
    rejected: frozenset[str]
    accepted: frozenset[str]
    e_star: float
    transfers: tuple[Transfer, ...]


@dataclass(frozen=True)
class TestReport:
    """Per-family outcomes in execution order plus the global decision map.

    `decisions` maps every hypothesis label to "S" (significant) or "NS".
    """

    outcomes: tuple[FamilyOutcome, ...]
    decisions: Mapping[str, str]


@dataclass(frozen=True)
class ExecutionState:
    """Snapshot between steps: untested families, current levels, live edges."""

    remaining: tuple[frozenset[str], ...]
    current_alpha: Mapping[str, float]
    current_g: Mapping[tuple[str, str], float]


def initial_state(spec: GraphSpec) -> ExecutionState:
    name_of = {fam.index: fam.name for fam in spec.families()}
    return ExecutionState(
        remaining=tuple(
            frozenset(fam.name for fam in layer) for layer in spec.layers
        ),
        current_alpha={fam.name: fam.initial_alpha for fam in spec.families()},
        current_g={
            (name_of[src], name_of[dst]): g
            for (src, dst), g in spec.transitions.items()
        },
    )


def step(
    spec: GraphSpec,
    state: ExecutionState,
    family: str,
    pvalues: Mapping[str, float],
) -> tuple[FamilyOutcome, ExecutionState]:
    """Test one family and return (outcome, next state); `state` is unchanged.

    The family must be untested and belong to the earliest layer that still
    has untested families.
    """
    layer_idx = None
    for i, layer in enumerate(state.remaining):
        if layer:
            layer_idx = i
            break
    if layer_idx is None:
        raise ValueError("all families already tested")
    if family not in state.remaining[layer_idx]:
        for later in state.remaining[layer_idx + 1 :]:
            if family in later:
                raise ValueError(
                    f"family {family!r} is not eligible yet: "
                    f"layer {layer_idx + 1} still has untested families"
                )
        raise ValueError(f"family {family!r} is not an untested family")

    fam = spec.family(family)
    level = state.current_alpha[family]
    pvec = tuple(pvalues[label] for label in fam.labels)
    rejected_idx = test_family(
        fam.procedure, FamilyTestInput(pvec, level, fam.labels)
    )
    accepted_idx = frozenset(range(1, fam.size + 1)) - rejected_idx
    e_star = error_rate_bound(fam.procedure, accepted_idx, fam.size, level)
    spendable = max(level - e_star, 0.0)

    order = {f.name: pos for pos, f in enumerate(spec.families())}
    outgoing = [
        (dst, g)
        for (src, dst), g in state.current_g.items()
        if src == family and g > 0.0
    ]
    transfers = tuple(
        Transfer(dst, spendable * g)
        for dst, g in sorted(outgoing, key=lambda e: order[e[0]])
    )

    new_alpha = dict(state.current_alpha)
    for t in transfers:
        new_alpha[t.target] += t.amount
    new_g = {
        edge: g for edge, g in state.current_g.items() if edge[0] != family
    }
    new_remaining = tuple(
        layer - {family} if i == layer_idx else layer
        for i, layer in enumerate(state.remaining)
    )

    outcome = FamilyOutcome(
        family=family,
        level_used=level,
        rejected=frozenset(fam.labels[k - 1] for k in rejected_idx),
        accepted=frozenset(fam.labels[k - 1] for k in accepted_idx),
        e_star=e_star,
        transfers=transfers,
    )
    return outcome, ExecutionState(new_remaining, new_alpha, new_g)


def run(spec: GraphSpec, pvalues: Mapping[str, float]) -> TestReport:
    """Execute the whole strategy on one p-value map.

    Raises InvalidSpecError if the spec has constraint violations and
    ValueError if `pvalues` does not cover exactly the spec's labels.
    """
    outcome = validate_spec(spec)
    if not outcome.ok:
        raise InvalidSpecError(outcome.violations)
    labels = spec.labels()
    missing = sorted(set(labels) - set(pvalues))
    extra = sorted(set(pvalues) - set(labels))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing p-values for {missing}")
        if extra:
            parts.append(f"p-values for unknown labels {extra}")
        raise ValueError("; ".join(parts))

    state = initial_state(spec)
    outcomes = []
    for layer in spec.layers:
        for fam in layer:
            result, state = step(spec, state, fam.name, pvalues)
            outcomes.append(result)
    decisions = {}
    for result in outcomes:
        for label in result.rejected:
            decisions[label] = "S"
        for label in result.accepted:
            decisions[label] = "NS"
    return TestReport(tuple(outcomes), decisions)


def replay(report: TestReport, spec: GraphSpec) -> ValidationOutcome:
    """Re-derive every level, e* and transfer from the report's rejection sets.

    Returns ok when the report is exactly what the engine would have
    produced (within 1e-12) given those rejections. Structural mismatches
    between report and spec raise ValueError.
    """
    check = validate_spec(spec)
    if not check.ok:
        raise InvalidSpecError(check.violations)
    seen = [o.family for o in report.outcomes]
    expected = sorted(fam.name for fam in spec.families())
    if sorted(seen) != expected:
        raise ValueError(
            f"report covers families {sorted(seen)}, spec has {expected}"
        )

    v: list[str] = []
    state = initial_state(spec)
    for o in report.outcomes:
        fam = spec.family(o.family)
        where = f"family {o.family}"
        layer_idx = next(i for i, layer in enumerate(state.remaining) if layer)
        if o.family not in state.remaining[layer_idx]:
            raise ValueError(
                f"{where}: tested out of order (layer {layer_idx + 1} was current)"
            )

        if o.rejected | o.accepted != set(fam.labels) or (o.rejected & o.accepted):
            raise ValueError(
                f"{where}: rejected/accepted do not partition the hypotheses"
            )

        level = state.current_alpha[o.family]
        if abs(o.level_used - level) > REPLAY_TOL:
            v.append(
                f"{where}: level_used {o.level_used!r}, re-derived {level!r}"
            )
        accepted_idx = frozenset(
            k for k, label in enumerate(fam.labels, start=1) if label in o.accepted
        )
        e_star = error_rate_bound(fam.procedure, accepted_idx, fam.size, level)
        if abs(o.e_star - e_star) > REPLAY_TOL:
            v.append(f"{where}: e_star {o.e_star!r}, re-derived {e_star!r}")
        spendable = max(level - e_star, 0.0)

        derived = {
            dst: spendable * g
            for (src, dst), g in state.current_g.items()
            if src == o.family and g > 0.0
        }
        reported = {t.target: t.amount for t in o.transfers}
        if len(reported) != len(o.transfers):
            raise ValueError(f"{where}: duplicate transfer target")
        for dst in sorted(set(derived) | set(reported)):
            if dst not in derived:
                v.append(f"{where}: unexpected transfer to {dst}")
            elif dst not in reported:
                v.append(f"{where}: missing transfer to {dst}")
            elif abs(derived[dst] - reported[dst]) > REPLAY_TOL:
                v.append(
                    f"{where}: transfer to {dst} is {reported[dst]!r}, "
                    f"re-derived {derived[dst]!r}"
                )

        new_alpha = dict(state.current_alpha)
        for dst, amount in derived.items():
            new_alpha[dst] += amount
        state = ExecutionState(
            tuple(
                layer - {o.family} if i == layer_idx else layer
                for i, layer in enumerate(state.remaining)
            ),
            new_alpha,
            {e: g for e, g in state.current_g.items() if e[0] != o.family},
        )

    all_labels = set(spec.labels())
    decided = set(report.decisions)
    if decided != all_labels:
        raise ValueError(
            f"decisions cover {sorted(decided)}, spec labels are {sorted(all_labels)}"
        )
    for o in report.outcomes:
        for label in o.rejected:
            if report.decisions[label] != "S":
                v.append(f"decision for {label} is {report.decisions[label]!r}, not S")
        for label in o.accepted:
            if report.decisions[label] != "NS":
                v.append(f"decision for {label} is {report.decisions[label]!r}, not NS")
    return ValidationOutcome(tuple(v))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def report_to_json(report: TestReport, indent: int | None = 2) -> str:
    obj = {
        "outcomes": [
            {
                "family": o.family,
                "level": o.level_used,
                "rejected": sorted(o.rejected),
                "accepted": sorted(o.accepted),
                "e_star": o.e_star,
                "transfers": [
                    {"to": t.target, "amount": t.amount} for t in o.transfers
                ],
            }
            for o in report.outcomes
        ],
        "decisions": dict(sorted(report.decisions.items())),
    }
    return json.dumps(obj, indent=indent, sort_keys=True)


def report_from_json(text: str) -> TestReport:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or "outcomes" not in obj or "decisions" not in obj:
        raise SpecFormatError("report must have 'outcomes' and 'decisions'")
    outcomes = []
    for entry in obj["outcomes"]:
        try:
            outcomes.append(
                FamilyOutcome(
                    family=entry["family"],
                    level_used=float(entry["level"]),
                    rejected=frozenset(entry["rejected"]),
                    accepted=frozenset(entry["accepted"]),
                    e_star=float(entry["e_star"]),
                    transfers=tuple(
                        Transfer(t["to"], float(t["amount"]))
                        for t in entry["transfers"]
                    ),
                )
            )
        except (KeyError, TypeError) as exc:
            raise SpecFormatError(f"malformed outcome entry: {exc}") from None
    decisions = obj["decisions"]
    if not isinstance(decisions, dict):
        raise SpecFormatError("decisions must be an object")
    return TestReport(tuple(outcomes), dict(decisions))
