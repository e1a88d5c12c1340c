"""Family-graph data model: layers of hypothesis families, initial critical
values, and the transition coefficients that route unspent critical value
from earlier layers to later ones.

A strategy is a directed acyclic graph whose nodes are families. Layer and
family addressing is 1-based throughout: family (i, j) is the j-th family of
the i-th layer. Constraints enforced by :func:`validate_spec`:

  * every transition coefficient lies in [0, 1];
  * coefficients only point at strictly later layers;
  * each family's outgoing coefficients sum to at most 1;
  * the initial critical values sum to at most the global level.

Sum constraints get 1e-12 of slack so strategies written as decimal
literals (0.8 + 0.2) validate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import InvalidSpecError, SpecFormatError
from .procedures import KINDS, LocalProcedureSpec, check_procedure

SUM_TOL = 1e-12

FamilyIndex = tuple[int, int]


@dataclass(frozen=True)
class HypothesisRef:
    """One hypothesis: its (layer, family, position) address and label."""

    layer: int
    family: int
    index: int
    label: str


@dataclass(frozen=True)
class FamilySpec:
    """A family of hypotheses with its local procedure and initial level."""

    index: FamilyIndex
    name: str
    hypotheses: tuple[HypothesisRef, ...]
    initial_alpha: float
    procedure: LocalProcedureSpec

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(h.label for h in self.hypotheses)

    @property
    def size(self) -> int:
        return len(self.hypotheses)


@dataclass(frozen=True)
class TransitionCoefficients:
    """Sparse map from ordered family pair to coefficient; absent means 0."""

    entries: Mapping[tuple[FamilyIndex, FamilyIndex], float]

    def get(self, src: FamilyIndex, dst: FamilyIndex) -> float:
        return self.entries.get((src, dst), 0.0)

    def outgoing(self, src: FamilyIndex) -> dict[FamilyIndex, float]:
        return {d: g for (s, d), g in self.entries.items() if s == src}

    def items(self):
        return sorted(self.entries.items())


@dataclass(frozen=True)
class GraphSpec:
    """A complete strategy: global level, layered families, transitions."""

    global_alpha: float
    layers: tuple[tuple[FamilySpec, ...], ...]
    transitions: TransitionCoefficients

    def families(self) -> Iterator[FamilySpec]:
        """All families in execution order (layer by layer, declared order)."""
        for layer in self.layers:
            yield from layer

    def family(self, name: str) -> FamilySpec:
        for fam in self.families():
            if fam.name == name:
                return fam
        raise KeyError(name)

    def family_at(self, index: FamilyIndex) -> FamilySpec:
        i, j = index
        return self.layers[i - 1][j - 1]

    def labels(self) -> tuple[str, ...]:
        return tuple(h.label for fam in self.families() for h in fam.hypotheses)

    @property
    def n_families(self) -> int:
        return sum(len(layer) for layer in self.layers)


@dataclass(frozen=True)
class ValidationOutcome:
    """Result of a structural check: ok, or the full list of violations."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def make_spec(
    alpha: float,
    layers: Sequence[Sequence[tuple[str, Sequence[str], float, LocalProcedureSpec]]],
    transitions: Mapping[tuple[str, str], float] | None = None,
) -> GraphSpec:
    """Build a GraphSpec from name-keyed pieces.

    `layers` is a list of layers; each layer lists families as
    (name, hypothesis_labels, initial_alpha, procedure) tuples. `transitions`
    maps (source_name, target_name) to a coefficient. Raises
    SpecFormatError when names do not resolve; constraint checking is left
    to :func:`validate_spec`.
    """
    built_layers: list[tuple[FamilySpec, ...]] = []
    index_of: dict[str, FamilyIndex] = {}
    for i, layer in enumerate(layers, start=1):
        fams = []
        for j, (name, labels, a0, proc) in enumerate(layer, start=1):
            if name in index_of:
                raise SpecFormatError(f"duplicate family name {name!r}")
            index_of[name] = (i, j)
            hyps = tuple(
                HypothesisRef(i, j, k, str(label))
                for k, label in enumerate(labels, start=1)
            )
            fams.append(FamilySpec((i, j), name, hyps, float(a0), proc))
        built_layers.append(tuple(fams))
    entries: dict[tuple[FamilyIndex, FamilyIndex], float] = {}
    for (src, dst), g in (transitions or {}).items():
        for name in (src, dst):
            if name not in index_of:
                raise SpecFormatError(f"transition references unknown family {name!r}")
        key = (index_of[src], index_of[dst])
        if key in entries:
            raise SpecFormatError(f"duplicate transition {src!r} -> {dst!r}")
        entries[key] = float(g)
    return GraphSpec(float(alpha), tuple(built_layers), TransitionCoefficients(entries))


def validate_spec(spec: GraphSpec) -> ValidationOutcome:
    """Check every structural constraint; report all violations, no short-circuit."""
    v: list[str] = []
    if not 0.0 <= spec.global_alpha <= 1.0:
        v.append(f"global alpha {spec.global_alpha!r} outside [0, 1]")
    if not spec.layers:
        v.append("no layers")

    names: dict[str, FamilyIndex] = {}
    labels: dict[str, str] = {}
    alpha_sum = 0.0
    for i, layer in enumerate(spec.layers, start=1):
        if not layer:
            v.append(f"layer {i} is empty")
        for j, fam in enumerate(layer, start=1):
            where = f"family {fam.name}"
            if fam.index != (i, j):
                v.append(f"{where}: index {fam.index} does not match position ({i}, {j})")
            if fam.name in names:
                v.append(f"duplicate family name {fam.name!r}")
            names[fam.name] = (i, j)
            if fam.size < 1:
                v.append(f"{where}: no hypotheses")
            if not 0.0 <= fam.initial_alpha <= 1.0:
                v.append(f"{where}: initial alpha {fam.initial_alpha!r} outside [0, 1]")
            alpha_sum += fam.initial_alpha
            for k, hyp in enumerate(fam.hypotheses, start=1):
                if (hyp.layer, hyp.family, hyp.index) != (i, j, k):
                    v.append(
                        f"{where}: hypothesis {hyp.label!r} addressed "
                        f"({hyp.layer}, {hyp.family}, {hyp.index}), expected ({i}, {j}, {k})"
                    )
                if hyp.label in labels:
                    v.append(
                        f"duplicate hypothesis label {hyp.label!r} "
                        f"(in {labels[hyp.label]} and {fam.name})"
                    )
                labels[hyp.label] = fam.name
            for problem in check_procedure(fam.procedure, fam.size, fam.labels):
                v.append(f"{where}: {problem}")

    if alpha_sum > spec.global_alpha + SUM_TOL:
        v.append(
            f"initial alphas sum to {alpha_sum!r}, "
            f"exceeding global alpha {spec.global_alpha!r}"
        )

    known = set(names.values())
    row_sums: dict[FamilyIndex, float] = {}
    for (src, dst), g in spec.transitions.items():
        edge = f"transition {src} -> {dst}"
        if src not in known or dst not in known:
            v.append(f"{edge}: unknown family")
            continue
        if not 0.0 <= g <= 1.0:
            v.append(f"{edge}: coefficient {g!r} outside [0, 1]")
        if src[0] >= dst[0]:
            v.append(
                f"backward edge {edge}: coefficient must be 0 "
                f"unless the target layer is strictly later"
            )
        row_sums[src] = row_sums.get(src, 0.0) + g
    for src in sorted(row_sums):
        total = row_sums[src]
        if total > 1.0 + SUM_TOL:
            v.append(f"row sum {total!r} > 1 for family {spec.family_at(src).name}")

    return ValidationOutcome(tuple(v))


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    """Compact, deterministic float rendering for labels ("0.8", "1")."""
    if x == int(x):
        return str(int(x))
    return repr(x)


def to_dot(spec: GraphSpec) -> str:
    """Render the family graph as deterministic DOT text.

    One node per family labeled "name (alpha)", one edge per nonzero
    coefficient labeled with its value. Identical specs produce identical
    bytes. Raises InvalidSpecError if the spec does not validate.
    """
    outcome = validate_spec(spec)
    if not outcome.ok:
        raise InvalidSpecError(outcome.violations)
    lines = ["digraph families {", "  rankdir=LR;"]
    for fam in spec.families():
        lines.append(
            f'  "{fam.name}" [label="{fam.name} ({format_float(fam.initial_alpha)})"];'
        )
    for (src, dst), g in spec.transitions.items():
        if g == 0.0:
            continue
        src_name = spec.family_at(src).name
        dst_name = spec.family_at(dst).name
        lines.append(f'  "{src_name}" -> "{dst_name}" [label="{format_float(g)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _procedure_to_obj(proc: LocalProcedureSpec) -> dict:
    obj: dict = {"kind": proc.kind}
    if proc.gamma is not None:
        obj["gamma"] = proc.gamma
    if proc.weights is not None:
        obj["weights"] = list(proc.weights)
    if proc.order is not None:
        obj["order"] = list(proc.order)
    return obj


def _procedure_from_obj(obj, where: str) -> LocalProcedureSpec:
    if not isinstance(obj, dict):
        raise SpecFormatError(f"{where}: procedure must be an object")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SpecFormatError(f"{where}: unknown procedure kind {kind!r}")
    gamma = obj.get("gamma")
    if gamma is not None and not isinstance(gamma, (int, float)):
        raise SpecFormatError(f"{where}: gamma must be a number")
    weights = obj.get("weights")
    if weights is not None:
        if not isinstance(weights, list) or not all(
            isinstance(w, (int, float)) for w in weights
        ):
            raise SpecFormatError(f"{where}: weights must be a list of numbers")
        weights = tuple(float(w) for w in weights)
    order = obj.get("order")
    if order is not None:
        if not isinstance(order, list) or not all(isinstance(s, str) for s in order):
            raise SpecFormatError(f"{where}: order must be a list of labels")
        order = tuple(order)
    return LocalProcedureSpec(
        kind, gamma=None if gamma is None else float(gamma), weights=weights, order=order
    )


def spec_to_json(spec: GraphSpec, indent: int | None = 2) -> str:
    """Serialize to the spec-file schema; lossless float round-trip."""
    name_of = {fam.index: fam.name for fam in spec.families()}
    obj = {
        "alpha": spec.global_alpha,
        "layers": [
            [
                {
                    "id": fam.name,
                    "hypotheses": list(fam.labels),
                    "alpha": fam.initial_alpha,
                    "procedure": _procedure_to_obj(fam.procedure),
                }
                for fam in layer
            ]
            for layer in spec.layers
        ],
        "transitions": [
            {"from": name_of[src], "to": name_of[dst], "g": g}
            for (src, dst), g in spec.transitions.items()
        ],
    }
    return json.dumps(obj, indent=indent, sort_keys=True)


def spec_from_json(text: str) -> GraphSpec:
    """Parse the spec-file schema. Raises SpecFormatError on malformed input."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SpecFormatError("top level must be an object")
    for key in ("alpha", "layers"):
        if key not in obj:
            raise SpecFormatError(f"missing required key {key!r}")
    alpha = obj["alpha"]
    if not isinstance(alpha, (int, float)):
        raise SpecFormatError("alpha must be a number")
    if not isinstance(obj["layers"], list):
        raise SpecFormatError("layers must be a list of lists")

    layers = []
    for i, layer in enumerate(obj["layers"], start=1):
        if not isinstance(layer, list):
            raise SpecFormatError(f"layer {i} must be a list")
        fams = []
        for j, fam in enumerate(layer, start=1):
            where = f"layer {i}, family {j}"
            if not isinstance(fam, dict):
                raise SpecFormatError(f"{where}: must be an object")
            for key in ("id", "hypotheses", "alpha", "procedure"):
                if key not in fam:
                    raise SpecFormatError(f"{where}: missing key {key!r}")
            if not isinstance(fam["id"], str):
                raise SpecFormatError(f"{where}: id must be a string")
            hyps = fam["hypotheses"]
            if not isinstance(hyps, list) or not all(isinstance(h, str) for h in hyps):
                raise SpecFormatError(f"{where}: hypotheses must be a list of labels")
            if not isinstance(fam["alpha"], (int, float)):
                raise SpecFormatError(f"{where}: alpha must be a number")
            proc = _procedure_from_obj(fam["procedure"], where)
            fams.append((fam["id"], hyps, float(fam["alpha"]), proc))
        layers.append(fams)

    transitions: dict[tuple[str, str], float] = {}
    for t, entry in enumerate(obj.get("transitions", []), start=1):
        where = f"transition {t}"
        if not isinstance(entry, dict):
            raise SpecFormatError(f"{where}: must be an object")
        for key in ("from", "to", "g"):
            if key not in entry:
                raise SpecFormatError(f"{where}: missing key {key!r}")
        if not isinstance(entry["g"], (int, float)):
            raise SpecFormatError(f"{where}: g must be a number")
        pair = (entry["from"], entry["to"])
        if pair in transitions:
            raise SpecFormatError(f"{where}: duplicate edge {pair[0]!r} -> {pair[1]!r}")
        transitions[pair] = float(entry["g"])

    return make_spec(alpha, layers, transitions)
