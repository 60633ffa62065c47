"""Exact discrete joint distributions and their entropy queries.

Conventions used throughout the package:

- every information quantity is in bits (logarithms are base two), and
  ``0 * log 0`` counts as zero;
- a joint is a dense float64 table whose axes follow the variable order,
  so the C-order flattening runs through the *last* variable fastest;
- negative probabilities of magnitude at most 1e-12 are clamped to zero
  (they only arise from parsers and float round-trips), anything more
  negative is rejected as corrupt input;
- the joint state space is capped (default ``2**24`` states); constructors
  refuse larger tables and name the violated constraint.

Entropies are computed by plug-in summation over the dense table. There is
no factored representation: the toolkit targets small variable counts where
exact enumeration is the whole point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapExceededError, FormatError, NumericsError, ValidationError

DEFAULT_STATE_CAP = 2**24
# Parsers and round-trips may produce values this far below zero; clamp them.
PROB_CLAMP = 1e-12
PROB_SUM_TOL = 1e-9
# Entropy sums this far below zero are float round-off; below it, a bug.
ENTROPY_CLAMP = 1e-12


@dataclass(frozen=True)
class VariableMeta:
    """Name and arity of one categorical variable (values ``0..arity-1``)."""

    name: str
    arity: int

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValidationError("variable name must be a non-empty string")
        if not isinstance(self.arity, int) or self.arity < 1:
            raise ValidationError(
                f"variable {self.name!r}: arity must be an integer >= 1, got {self.arity!r}"
            )


def _check_state_cap(arities: Sequence[int], max_states: int) -> int:
    states = 1
    for a in arities:
        states *= int(a)
    if states > max_states:
        raise CapExceededError(
            f"joint state space has {states} states, cap is {max_states}",
            constraint="state_cap",
        )
    return states


def _validated_variables(variables: Iterable[VariableMeta]) -> tuple[VariableMeta, ...]:
    metas = tuple(variables)
    if not metas:
        raise ValidationError("a distribution needs at least one variable")
    names = [m.name for m in metas]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate variable names: {sorted(names)}")
    return metas


@dataclass(frozen=True, eq=False)
class Distribution:
    """Immutable exact joint distribution over named categorical variables.

    ``table`` has shape ``tuple(arity_i)``; it is validated, copied, and
    frozen on construction, so a ``Distribution`` can be shared freely.
    """

    variables: tuple[VariableMeta, ...]
    table: np.ndarray

    def __init__(
        self,
        variables: Iterable[VariableMeta],
        table: np.ndarray,
        *,
        max_states: int = DEFAULT_STATE_CAP,
    ):
        metas = _validated_variables(variables)
        shape = tuple(m.arity for m in metas)
        _check_state_cap(shape, max_states)
        arr = np.asarray(table, dtype=np.float64)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise ValidationError(
                f"table has {arr.size} entries, expected {int(np.prod(shape, dtype=np.int64))}"
            )
        arr = arr.reshape(shape).copy(order="C")
        low = arr.min(initial=0.0)
        if low < -PROB_CLAMP:
            raise ValidationError(
                f"probability {low} is more negative than the {-PROB_CLAMP} clamp allows"
            )
        np.clip(arr, 0.0, None, out=arr)
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities sum to {total}, expected 1 within {PROB_SUM_TOL}")
        arr.setflags(write=False)
        object.__setattr__(self, "variables", metas)
        object.__setattr__(self, "table", arr)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.variables)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(m.arity for m in self.variables)

    def index_of(self, name: str) -> int:
        for i, m in enumerate(self.variables):
            if m.name == name:
                return i
        raise ValidationError(f"no variable named {name!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of integer category values under a fixed variable order."""

    variables: tuple[VariableMeta, ...]
    rows: np.ndarray

    def __init__(self, variables: Iterable[VariableMeta], rows: np.ndarray):
        metas = _validated_variables(variables)
        arr = np.asarray(rows, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != len(metas):
            raise ValidationError(
                f"rows must be a 2-d array with {len(metas)} columns, got shape {arr.shape}"
            )
        for j, meta in enumerate(metas):
            col = arr[:, j]
            if col.size and (col.min() < 0 or col.max() >= meta.arity):
                raise ValidationError(
                    f"column {meta.name!r} has values outside 0..{meta.arity - 1}"
                )
        arr = arr.copy(order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "variables", metas)
        object.__setattr__(self, "rows", arr)

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])


def empirical_distribution(
    dataset: Dataset,
    *,
    alpha: float = 0.0,
    max_states: int = DEFAULT_STATE_CAP,
) -> Distribution:
    """Plug-in joint estimate from ``dataset``.

    ``alpha`` adds the same pseudocount to every joint state before
    normalizing (0 keeps the raw relative frequencies). The dataset must be
    non-empty unless ``alpha > 0``.
    """
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    arities = tuple(m.arity for m in dataset.variables)
    states = _check_state_cap(arities, max_states)
    if dataset.n_rows == 0 and alpha == 0.0:
        raise ValidationError("cannot estimate a distribution from zero rows with alpha=0")
    counts = np.zeros(states, dtype=np.float64)
    if dataset.n_rows:
        flat = np.ravel_multi_index(dataset.rows.T, arities)
        np.add.at(counts, flat, 1.0)
    counts += alpha
    counts /= counts.sum()
    return Distribution(dataset.variables, counts, max_states=max_states)


def _axes_tuple(dist: Distribution, variables: Sequence[int] | None) -> tuple[int, ...]:
    if variables is None:
        return tuple(range(dist.n))
    axes = tuple(int(v) for v in variables)
    if len(set(axes)) != len(axes):
        raise ValidationError(f"variable indices must be distinct, got {axes}")
    for v in axes:
        if not 0 <= v < dist.n:
            raise ValidationError(f"variable index {v} out of range for n={dist.n}")
    return axes


def marginal(dist: Distribution, variables: Sequence[int]) -> Distribution:
    """Marginal distribution over ``variables``, kept in the given order."""
    axes = _axes_tuple(dist, variables)
    if not axes:
        raise ValidationError("marginal needs at least one variable")
    drop = tuple(i for i in range(dist.n) if i not in axes)
    table = dist.table.sum(axis=drop) if drop else dist.table
    order = tuple(sorted(axes))
    if axes != order:
        table = np.moveaxis(table, [order.index(a) for a in axes], range(len(axes)))
    return Distribution([dist.variables[a] for a in axes], table)


def _entropy_of_flat(probabilities: np.ndarray) -> float:
    p = probabilities.reshape(-1)
    nz = p[p > 0.0]
    h = float(-(nz * np.log2(nz)).sum()) if nz.size else 0.0
    if h < 0.0:
        if h >= -ENTROPY_CLAMP:
            return 0.0
        raise NumericsError(f"entropy sum came out {h}, beyond float round-off")
    return h


def entropy(dist: Distribution, variables: Sequence[int] | None = None) -> float:
    """Shannon entropy, in bits, of the joint marginal over ``variables``
    (all variables when omitted)."""
    axes = _axes_tuple(dist, variables)
    drop = tuple(i for i in range(dist.n) if i not in axes)
    table = dist.table.sum(axis=drop) if drop else dist.table
    return _entropy_of_flat(np.asarray(table))


def conditional_entropy(
    dist: Distribution,
    target: int | Sequence[int],
    given: Sequence[int] = (),
) -> float:
    """H(target | given) in bits, via H(target, given) - H(given).

    States of the conditioning set with zero probability contribute nothing,
    which is the plug-in convention for empirical joints as well.
    """
    tgt = (int(target),) if isinstance(target, (int, np.integer)) else tuple(int(t) for t in target)
    giv = tuple(int(g) for g in given)
    if set(tgt) & set(giv):
        raise ValidationError(f"target {tgt} and conditioning set {giv} overlap")
    h_joint = entropy(dist, tgt + giv)
    h_given = entropy(dist, giv) if giv else 0.0
    value = h_joint - h_given
    if value < 0.0:
        if value >= -ENTROPY_CLAMP:
            return 0.0
        raise NumericsError(f"conditional entropy came out {value}, beyond float round-off")
    return value


def mutual_information(dist: Distribution, a: int, b: int) -> float:
    """I(a; b) in bits. Evaluation order is canonicalized so the result is
    exactly symmetric in its arguments; values within 1e-12 below zero are
    clamped to zero."""
    if a == b:
        raise ValidationError("mutual information needs two distinct variables")
    lo, hi = (a, b) if a < b else (b, a)
    value = entropy(dist, (lo,)) + entropy(dist, (hi,)) - entropy(dist, (lo, hi))
    if value < 0.0:
        if value >= -ENTROPY_CLAMP:
            return 0.0
        raise NumericsError(f"mutual information came out {value}, beyond float round-off")
    return value


def binary_entropy_bits(p: float) -> float:
    """Entropy in bits of a Bernoulli(p) variable."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"Bernoulli bias must be in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def bernoulli_bias_for_entropy(bits: float) -> float:
    """The bias ``p`` in (0, 1/2] with ``binary_entropy_bits(p) == bits``.

    Solved by bisection on the monotone branch; the returned bias matches the
    requested entropy to full float precision (far inside 1e-10).
    """
    if not 0.0 < bits <= 1.0:
        raise ValidationError(f"entropy target must be in (0, 1], got {bits}")
    if bits == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binary_entropy_bits(mid) < bits:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# File formats.
#
# CSV dataset: first row is the variable names, every later row one sample of
# integer category values. Arity defaults to (max observed + 1) per column; a
# JSON sidecar mapping name -> arity overrides that when rare categories may
# be missing from the sample.
#
# Exact distribution JSON:
#   {"variables": [{"name": ..., "arity": ...}, ...],
#    "probabilities": [...]}
# with probabilities flattened in C order (last variable fastest).
# ---------------------------------------------------------------------------


def read_dataset_csv(path: str, arities: Mapping[str, int] | None = None) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV, expected a header row") from None
        names = [h.strip() for h in header]
        if any(not n for n in names):
            raise FormatError(f"{path}: blank column name in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(names)} values, got {len(row)}"
                )
            try:
                rows.append([int(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer value ({exc})") from None
    data = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(names))
    metas = []
    for j, name in enumerate(names):
        if arities is not None and name in arities:
            arity = int(arities[name])
        elif data.shape[0]:
            arity = int(data[:, j].max()) + 1
        else:
            raise FormatError(f"{path}: no rows and no declared arity for {name!r}")
        metas.append(VariableMeta(name, arity))
    return Dataset(metas, data)


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([m.name for m in dataset.variables])
        for row in dataset.rows:
            writer.writerow([int(v) for v in row])


def read_arity_sidecar(path: str) -> dict[str, int]:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: arity sidecar must be a JSON object of name -> arity")
    out: dict[str, int] = {}
    for name, arity in raw.items():
        if not isinstance(arity, int) or arity < 1:
            raise FormatError(f"{path}: arity for {name!r} must be an integer >= 1")
        out[name] = arity
    return out


def read_distribution_json(path: str, *, max_states: int = DEFAULT_STATE_CAP) -> Distribution:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict) or "variables" not in raw or "probabilities" not in raw:
        raise FormatError(f"{path}: expected keys 'variables' and 'probabilities'")
    try:
        metas = [VariableMeta(str(v["name"]), int(v["arity"])) for v in raw["variables"]]
    except (TypeError, KeyError) as exc:
        raise FormatError(f"{path}: malformed variable entry ({exc})") from None
    probs = raw["probabilities"]
    if not isinstance(probs, list):
        raise FormatError(f"{path}: 'probabilities' must be a flat list")
    try:
        return Distribution(metas, np.asarray(probs, dtype=np.float64), max_states=max_states)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_distribution_json(dist: Distribution, path: str) -> None:
    doc = {
        "variables": [{"name": m.name, "arity": m.arity} for m in dist.variables],
        "probabilities": [float(v) for v in dist.table.reshape(-1)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
