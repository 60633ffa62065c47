"""CNF-to-distribution compiler: the three-layer hardness construction.

Given a restricted CNF (see :mod:`polytreelab.cnf`), build a layered
network of discrete variables whose optimal polytree score encodes the
maximum number of simultaneously satisfiable clauses:

* layer 1: one binary node per clause, an independent coin of bias ``p``
  chosen so its entropy is exactly half a bit;
* layer 2, per CNF variable: a fair satellite coin ``R`` and a principal
  16-state node ``X`` packing four bits ``(g1, g2, P, N)``. ``P`` and ``N``
  are fresh fair coins. The gadget bits tie ``X`` to the three clauses the
  variable occurs in: with ``Ca, Cb`` the two same-polarity occurrence
  clauses and ``Cc`` the remaining one, ``g1 = Ca xor Cb`` and
  ``g2 = R xor Cc xor W`` where ``W`` is one extra private coin of bias
  ``p``. No wiring of the gadget bits over the six visible ancestor coins
  alone reproduces the required conditional-entropy table, so the wiring is
  widened by this one private coin (the test suite re-derives that
  impossibility by enumeration);
* layer 3: chain nodes, the ``i``-th valued ``N_i xor P_{i+1}``, which glue
  consecutive principals into one connected skeleton.

Conditioning a principal node on subsets of its neighbours lowers its
entropy by exactly ``delta = 1 - H(2p(1-p))`` for ``{R}``, half a bit for
``{R, C}``, ``1 - delta`` for the same-polarity clause pair, and
``1/2 - delta`` for mixed clause pairs. Summed over an assignment
satisfying ``m'`` clauses, the second layer's score drops by
``m' (1/2 - delta) + n delta``, which is what makes optimal polytree
recovery as hard as maximising satisfied clauses.

Optionally each satellite is shielded by two blocker nodes ``A`` and ``B``
(``k`` i.i.d. coins of bias ``q`` each) and expands to the tuple
``(R, A1 xor B1, ..., Ak xor Bk)``; the build asserts
``k (H(2q(1-q)) - H(q)) > 1`` so that adopting both blockers as parents is
the only attractive option. This expansion is off by default.

Full joints over all coins are astronomically large, so the compiled
object is a sampler plus an exact entropy-query engine that enumerates
only the ancestor coins of the queried nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cnf import CnfFormula, best_assignment, satisfied_clauses
from .distribution import (
    Dataset,
    VariableMeta,
    bernoulli_bias_for_entropy,
    binary_entropy_bits,
)
from .errors import CapExceededError, ValidationError
from .structure import Structure, is_polytree, max_indegree

ENTROPY_QUERY_MAX_COINS = 20
HALF_BIT_TOLERANCE = 1e-10
DEFAULT_CLAUSE_BIAS = bernoulli_bias_for_entropy(0.5)
DEFAULT_BLOCKER_COPIES = 5


@dataclass(frozen=True)
class GadgetParams:
    """Knobs of the construction.

    ``clause_bias`` is the bias ``p`` of every clause coin and must carry
    exactly half a bit of entropy. ``delta`` is derived. Blockers are the
    optional satellite shield; when enabled, ``blocker_bias`` defaults to
    ``p`` and ``blocker_copies`` to 5, and the information constraint
    ``k (H(2q(1-q)) - H(q)) > 1`` is asserted.
    """

    clause_bias: float = DEFAULT_CLAUSE_BIAS
    include_inedge_blockers: bool = False
    blocker_bias: float | None = None
    blocker_copies: int | None = None

    def __post_init__(self) -> None:
        p = self.clause_bias
        if not 0.0 < p < 0.5:
            raise ValidationError(f"clause_bias must be in (0, 0.5), got {p}")
        if abs(binary_entropy_bits(p) - 0.5) > HALF_BIT_TOLERANCE:
            raise ValidationError(
                "clause_bias must carry exactly half a bit of entropy "
                f"(H({p}) = {binary_entropy_bits(p)})"
            )
        if self.include_inedge_blockers:
            q = self.effective_blocker_bias
            k = self.effective_blocker_copies
            if not 0.0 < q < 0.5:
                raise ValidationError(f"blocker_bias must be in (0, 0.5), got {q}")
            if k < 1:
                raise ValidationError(f"blocker_copies must be >= 1, got {k}")
            margin = k * (binary_entropy_bits(2 * q * (1 - q)) - binary_entropy_bits(q))
            if margin <= 1.0:
                raise ValidationError(
                    "blocker parameters too weak: need "
                    f"k*(H(2q(1-q)) - H(q)) > 1, got {margin:.6f}"
                )
        elif self.blocker_bias is not None or self.blocker_copies is not None:
            raise ValidationError(
                "blocker_bias/blocker_copies require include_inedge_blockers"
            )

    @property
    def xor_bias(self) -> float:
        p = self.clause_bias
        return 2 * p * (1 - p)

    @property
    def delta_bits(self) -> float:
        return 1.0 - binary_entropy_bits(self.xor_bias)

    @property
    def effective_blocker_bias(self) -> float:
        q = self.blocker_bias
        return self.clause_bias if q is None else q

    @property
    def effective_blocker_copies(self) -> int:
        k = self.blocker_copies
        return DEFAULT_BLOCKER_COPIES if k is None else int(k)


@dataclass(frozen=True)
class GadgetNode:
    """One network node and the ancestor coins that determine its value.

    Coin-order conventions per kind:

    * ``clause``: ``(coin,)``; value is the coin.
    * ``satellite``: ``(r,)`` or ``(r, a1..ak, b1..bk)``; value packs ``r``
      as the low bit and ``a_t xor b_t`` as bit ``t``.
    * ``blocker``: ``(c1..ck)``; value packs coin ``t`` as bit ``t-1``.
    * ``principal``: ``(ca, cb, cc, r, w, prev, next)``; value is
      ``(ca xor cb)*8 + (r xor cc xor w)*4 + prev*2 + next``.
    * ``chain``: ``(next_i, prev_i+1)``; value is their xor.
    """

    name: str
    kind: str
    layer: int
    arity: int
    coins: tuple[str, ...]


@dataclass(frozen=True)
class SatisfyingPlan:
    """A structure candidate derived from a CNF assignment.

    ``allocation`` maps each satisfied clause index to the variable whose
    principal node adopts that clause node as a parent; every satisfied
    clause is allocated exactly once (a variable can host at most as many
    clauses as it has occurrences of its assigned polarity, and greedy
    allocation in clause order never gets stuck).
    """

    assignment: tuple[int, ...]
    satisfied_count: int
    allocation: dict[int, int]
    structure: Structure
    node_names: tuple[str, ...]


@dataclass(frozen=True)
class GadgetCheckRow:
    name: str
    observed_bits: float
    expected_bits: float
    passed: bool


@dataclass(frozen=True)
class GadgetAudit:
    """Outcome of auditing a compiled gadget against its analytic targets."""

    rows: tuple[GadgetCheckRow, ...]
    assignment: tuple[int, ...]
    satisfied_count: int
    observed_drop_bits: float
    expected_drop_bits: float
    structure_is_polytree: bool
    structure_max_indegree: int

    @property
    def ok(self) -> bool:
        return (
            all(row.passed for row in self.rows)
            and self.structure_is_polytree
            and self.structure_max_indegree <= 2
        )


class CompiledGadget:
    """Layered sampler with exact small-scope entropy queries."""

    def __init__(self, formula: CnfFormula, params: GadgetParams):
        self.formula = formula
        self.params = params
        self.coin_biases: dict[str, float] = {}
        self.nodes: tuple[GadgetNode, ...] = self._build_nodes()
        self._node_by_name = {node.name: node for node in self.nodes}
        self._index_by_name = {node.name: i for i, node in enumerate(self.nodes)}

    def _build_nodes(self) -> tuple[GadgetNode, ...]:
        p = self.params.clause_bias
        blockers = self.params.include_inedge_blockers
        q = self.params.effective_blocker_bias
        k = self.params.effective_blocker_copies
        nodes: list[GadgetNode] = []

        def coin(name: str, bias: float) -> str:
            self.coin_biases[name] = bias
            return name

        for j in range(1, self.formula.num_clauses + 1):
            nodes.append(GadgetNode(f"C{j}", "clause", 1, 2, (coin(f"c{j}", p),)))
        for i in range(1, self.formula.num_vars + 1):
            if blockers:
                a_coins = tuple(coin(f"a{i}_{t}", q) for t in range(1, k + 1))
                b_coins = tuple(coin(f"b{i}_{t}", q) for t in range(1, k + 1))
                nodes.append(GadgetNode(f"A{i}", "blocker", 2, 2**k, a_coins))
                nodes.append(GadgetNode(f"B{i}", "blocker", 2, 2**k, b_coins))
                r_coins = (coin(f"r{i}", 0.5),) + a_coins + b_coins
                nodes.append(GadgetNode(f"R{i}", "satellite", 2, 2 ** (k + 1), r_coins))
            else:
                nodes.append(GadgetNode(f"R{i}", "satellite", 2, 2, (coin(f"r{i}", 0.5),)))
            (a, _), (b, _), (c, _) = self.formula.occurrences(i)
            principal_coins = (
                f"c{a + 1}",
                f"c{b + 1}",
                f"c{c + 1}",
                f"r{i}",
                coin(f"w{i}", p),
                coin(f"prev{i}", 0.5),
                coin(f"next{i}", 0.5),
            )
            nodes.append(GadgetNode(f"X{i}", "principal", 2, 16, principal_coins))
        for i in range(1, self.formula.num_vars):
            nodes.append(
                GadgetNode(f"L{i}", "chain", 3, 2, (f"next{i}", f"prev{i + 1}"))
            )
        return tuple(nodes)

    # -- lookups ---------------------------------------------------------

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    @property
    def variables(self) -> tuple[VariableMeta, ...]:
        return tuple(VariableMeta(node.name, node.arity) for node in self.nodes)

    def node(self, name: str) -> GadgetNode:
        try:
            return self._node_by_name[name]
        except KeyError:
            raise ValidationError(f"unknown gadget node {name!r}") from None

    # -- exact entropy queries -------------------------------------------

    @staticmethod
    def _node_values(node: GadgetNode, bits: Mapping[str, np.ndarray]) -> np.ndarray:
        if node.kind == "clause":
            return bits[node.coins[0]].astype(np.int64)
        if node.kind == "satellite":
            value = bits[node.coins[0]].astype(np.int64)
            copies = (len(node.coins) - 1) // 2
            for t in range(copies):
                a = bits[node.coins[1 + t]]
                b = bits[node.coins[1 + copies + t]]
                value |= (np.int64(1) << (t + 1)) * (a ^ b)
            return value
        if node.kind == "blocker":
            value = np.zeros_like(bits[node.coins[0]], dtype=np.int64)
            for t, name in enumerate(node.coins):
                value |= (np.int64(1) << t) * bits[name].astype(np.int64)
            return value
        if node.kind == "principal":
            ca, cb, cc, r, w, prev, nxt = (bits[name] for name in node.coins)
            g1 = (ca ^ cb).astype(np.int64)
            g2 = (r ^ cc ^ w).astype(np.int64)
            return g1 * 8 + g2 * 4 + prev.astype(np.int64) * 2 + nxt.astype(np.int64)
        if node.kind == "chain":
            return (bits[node.coins[0]] ^ bits[node.coins[1]]).astype(np.int64)
        raise ValidationError(f"unknown node kind {node.kind!r}")

    def joint_entropy_bits(self, names: Sequence[str]) -> float:
        """Exact joint entropy of the named nodes, in bits.

        Enumerates only the union of their ancestor coins; refuses queries
        whose coin scope exceeds ``ENTROPY_QUERY_MAX_COINS``.
        """
        node_list = [self.node(name) for name in names]
        if not node_list:
            return 0.0
        coin_names = sorted({c for node in node_list for c in node.coins})
        if len(coin_names) > ENTROPY_QUERY_MAX_COINS:
            raise CapExceededError(
                f"entropy query spans {len(coin_names)} coins, cap is "
                f"{ENTROPY_QUERY_MAX_COINS}",
                constraint="entropy_query_max_coins",
            )
        count = 1 << len(coin_names)
        index = np.arange(count, dtype=np.int64)
        bits = {
            name: ((index >> pos) & 1).astype(np.int64)
            for pos, name in enumerate(coin_names)
        }
        probs = np.ones(count, dtype=np.float64)
        for name in coin_names:
            bias = self.coin_biases[name]
            probs *= np.where(bits[name] == 1, bias, 1.0 - bias)
        key = np.zeros(count, dtype=np.int64)
        radix = 1
        for node in node_list:
            key += self._node_values(node, bits) * radix
            radix *= node.arity
        masses = np.bincount(key, weights=probs, minlength=radix)
        occupied = masses[masses > 1e-300]
        return float(-(occupied * np.log2(occupied)).sum())

    def conditional_entropy_bits(self, target: str, given: Sequence[str]) -> float:
        given = list(given)
        if target in given:
            raise ValidationError(f"target {target!r} also appears in the given set")
        joint = self.joint_entropy_bits([target] + given)
        return joint - self.joint_entropy_bits(given)

    def entropy_decrease_bits(self, target: str, given: Sequence[str]) -> float:
        """How much conditioning on ``given`` lowers the target's entropy."""
        return self.joint_entropy_bits([target]) - self.conditional_entropy_bits(
            target, given
        )

    # -- analytic targets and metadata -------------------------------------

    def analytic_node_entropy_bits(self, name: str) -> float:
        node = self.node(name)
        p = self.params.clause_bias
        q = self.params.effective_blocker_bias
        k = self.params.effective_blocker_copies
        if node.kind == "clause":
            return binary_entropy_bits(p)
        if node.kind == "satellite":
            if len(node.coins) == 1:
                return 1.0
            return 1.0 + k * binary_entropy_bits(2 * q * (1 - q))
        if node.kind == "blocker":
            return k * binary_entropy_bits(q)
        if node.kind == "principal":
            return binary_entropy_bits(self.params.xor_bias) + 3.0
        return 1.0

    def layer_entropy_bits(self) -> tuple[float, float, float]:
        """Per-layer totals of exact per-node entropies."""
        totals = [0.0, 0.0, 0.0]
        for node in self.nodes:
            totals[node.layer - 1] += self.joint_entropy_bits([node.name])
        return tuple(totals)  # type: ignore[return-value]

    def analytic_layer_entropy_bits(self) -> tuple[float, float, float]:
        totals = [0.0, 0.0, 0.0]
        for node in self.nodes:
            totals[node.layer - 1] += self.analytic_node_entropy_bits(node.name)
        return tuple(totals)  # type: ignore[return-value]

    def metadata(self) -> dict:
        layers = self.layer_entropy_bits()
        return {
            "num_clauses": self.formula.num_clauses,
            "num_variables": self.formula.num_vars,
            "clause_bias": self.params.clause_bias,
            "delta_bits": self.params.delta_bits,
            "include_inedge_blockers": self.params.include_inedge_blockers,
            "layer_entropy_bits": [layers[0], layers[1], layers[2]],
        }

    # -- sampling -----------------------------------------------------------

    def sample_dataset(self, num_rows: int, seed: int) -> Dataset:
        """Draw i.i.d. joint samples of every node, in node order."""
        if num_rows < 1:
            raise ValidationError(f"num_rows must be >= 1, got {num_rows}")
        rng = np.random.Generator(np.random.PCG64(seed))
        bits = {
            name: (rng.random(num_rows) < bias).astype(np.int64)
            for name, bias in self.coin_biases.items()
        }
        columns = [self._node_values(node, bits) for node in self.nodes]
        return Dataset(self.variables, np.stack(columns, axis=1))

    # -- assignment-derived structures ---------------------------------------

    def plan_for_assignment(
        self, assignment: Sequence[int] | None = None
    ) -> SatisfyingPlan:
        """Greedy clause allocation and the polytree it induces.

        Each satisfied clause node becomes a parent of one principal node
        whose CNF variable satisfies it; principals hosting one clause also
        adopt their satellite, principals hosting none adopt only the
        satellite. Chain nodes always adopt both adjacent principals.
        """
        formula = self.formula
        if assignment is None:
            assignment, _ = best_assignment(formula)
        values = tuple(int(v) for v in assignment)
        satisfied = satisfied_clauses(formula, values)
        capacity: dict[int, list[int]] = {}
        for i in range(1, formula.num_vars + 1):
            (a, sign), (b, _), (c, _) = formula.occurrences(i)
            wanted = 1 if values[i - 1] == 1 else -1
            capacity[i] = [a, b] if wanted == sign else [c]
        hosts: dict[int, list[int]] = {i: [] for i in capacity}
        allocation: dict[int, int] = {}
        for j, clause in enumerate(formula.clauses):
            satisfying = sorted(
                abs(lit)
                for lit in clause
                if (values[abs(lit) - 1] == 1) == (lit > 0)
            )
            for i in satisfying:
                if j in capacity[i] and len(hosts[i]) < len(capacity[i]):
                    hosts[i].append(j)
                    allocation[j] = i
                    break
        if len(allocation) != satisfied:
            raise ValidationError(
                "internal allocation failure: "
                f"{len(allocation)} of {satisfied} satisfied clauses placed"
            )
        names = self.node_names
        index = self._index_by_name
        parents: list[tuple[int, ...]] = [() for _ in names]
        blockers = self.params.include_inedge_blockers
        for i in range(1, formula.num_vars + 1):
            if blockers:
                parents[index[f"R{i}"]] = (index[f"A{i}"], index[f"B{i}"])
            hosted = sorted(hosts[i])
            if len(hosted) == 2:
                chosen = tuple(index[f"C{j + 1}"] for j in hosted)
            elif len(hosted) == 1:
                chosen = (index[f"R{i}"], index[f"C{hosted[0] + 1}"])
            else:
                chosen = (index[f"R{i}"],)
            parents[index[f"X{i}"]] = chosen
        for i in range(1, formula.num_vars):
            parents[index[f"L{i}"]] = (index[f"X{i}"], index[f"X{i + 1}"])
        return SatisfyingPlan(
            assignment=values,
            satisfied_count=satisfied,
            allocation=allocation,
            structure=Structure(len(names), parents),
            node_names=names,
        )


def compile_cnf(
    formula: CnfFormula, params: GadgetParams | None = None
) -> tuple[CompiledGadget, dict]:
    """Build the layered construction for a restricted CNF.

    Returns the compiled sampler/query object and its metadata record.
    """
    compiled = CompiledGadget(formula, params or GadgetParams())
    return compiled, compiled.metadata()


def verify_gadget(
    compiled: CompiledGadget,
    assignment: Sequence[int] | None = None,
    *,
    tolerance_bits: float = 1e-9,
) -> GadgetAudit:
    """Audit a compiled gadget against every analytic target it must hit.

    Checks, all by exact enumeration over ancestor coins: per-node
    entropies against their closed forms, the full conditional-decrease
    table of every principal node, zero residual of every chain node given
    its two principals, per-layer entropy totals, and the score drop of the
    assignment-induced structure against ``m' (1/2 - delta) + n delta``.
    """
    params = compiled.params
    formula = compiled.formula
    delta = params.delta_bits
    rows: list[GadgetCheckRow] = []

    def check(name: str, observed: float, expected: float) -> None:
        rows.append(
            GadgetCheckRow(
                name=name,
                observed_bits=observed,
                expected_bits=expected,
                passed=abs(observed - expected) <= tolerance_bits,
            )
        )

    for node in compiled.nodes:
        check(
            f"entropy[{node.name}]",
            compiled.joint_entropy_bits([node.name]),
            compiled.analytic_node_entropy_bits(node.name),
        )
    for i in range(1, formula.num_vars + 1):
        (a, _), (b, _), (c, _) = formula.occurrences(i)
        ca, cb, cc = f"C{a + 1}", f"C{b + 1}", f"C{c + 1}"
        x, r = f"X{i}", f"R{i}"
        table = [
            ((r,), delta),
            ((r, ca), 0.5),
            ((r, cb), 0.5),
            ((r, cc), 0.5),
            ((ca, cb), 1.0 - delta),
            ((ca, cc), 0.5 - delta),
            ((cb, cc), 0.5 - delta),
        ]
        for given, expected in table:
            check(
                f"decrease[{x}|{','.join(given)}]",
                compiled.entropy_decrease_bits(x, given),
                expected,
            )
        if params.include_inedge_blockers:
            check(
                f"residual[{r}|A{i},B{i}]",
                compiled.conditional_entropy_bits(r, (f"A{i}", f"B{i}")),
                1.0,
            )
    for i in range(1, formula.num_vars):
        check(
            f"residual[L{i}|X{i},X{i + 1}]",
            compiled.conditional_entropy_bits(f"L{i}", (f"X{i}", f"X{i + 1}")),
            0.0,
        )
    observed_layers = compiled.layer_entropy_bits()
    analytic_layers = compiled.analytic_layer_entropy_bits()
    for layer in range(3):
        check(
            f"layer_entropy[{layer + 1}]",
            observed_layers[layer],
            analytic_layers[layer],
        )

    plan = compiled.plan_for_assignment(assignment)
    drop = 0.0
    for i in range(1, formula.num_vars + 1):
        node_index = compiled._index_by_name[f"X{i}"]
        given = tuple(plan.node_names[p] for p in plan.structure.parents[node_index])
        drop += compiled.entropy_decrease_bits(f"X{i}", given)
    expected_drop = plan.satisfied_count * (0.5 - delta) + formula.num_vars * delta
    check("assignment_drop", drop, expected_drop)

    return GadgetAudit(
        rows=tuple(rows),
        assignment=plan.assignment,
        satisfied_count=plan.satisfied_count,
        observed_drop_bits=drop,
        expected_drop_bits=expected_drop,
        structure_is_polytree=is_polytree(plan.structure),
        structure_max_indegree=max_indegree(plan.structure),
    )
