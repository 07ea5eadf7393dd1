"""Evolution of forest populations.

Each generation: score every unscored candidate, rank by AIC (invalid last;
ties broken by fewer terms, then by canonical key so runs are reproducible),
recombine the top half into crossover children with run-wide deduplication,
merge and keep the best, then mutate node symbols and replace whole trees in
every survivor except the single elite.  The run stops early once the best
AIC reaches the configured threshold.

All randomness flows through one seeded ``random.Random`` stream consumed in
a fixed order, so a (dataset, config, seed) triple fully determines the run,
including the per-generation history.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .expr import (
    ARITY,
    BINARY_OPS,
    DIFF_OPS,
    Forest,
    GenConfig,
    Node,
    OPERANDS,
    ROOT_FORBIDDEN,
    UNARY_OPS,
    X_NODE,
    canonical_key,
    random_forest,
    random_tree,
    to_display_string,
)
from .grid import Dataset, build_feature_matrix, ut_vector
from .regress import CandidateScore, RegressionParams, score

_INIT_RETRY_CAP = 50


@dataclass(frozen=True)
class GAConfig:
    """Evolution hyperparameters; the defaults are the working setup.

    ``population`` is the survivor count per generation (an even number,
    conventionally written 2n: the best n are recombined).  ``rng_seed``
    pins the whole run.
    """

    generations: int = 100
    population: int = 20
    p_operand: float = 0.5
    p_mutate_node: float = 0.3
    p_cross: float = 0.5
    p_replace_tree: float = 0.3
    max_width: int = 5
    max_depth: int = 4
    aic_threshold: float = -10.0
    rng_seed: int = 0
    boundary_trim: int = 2
    regression: RegressionParams = field(default_factory=RegressionParams)

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be even and >= 4")
        for name in ("p_operand", "p_mutate_node", "p_cross", "p_replace_tree"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.boundary_trim < 0:
            raise ValueError("boundary_trim must be >= 0")
        # delegate depth/width validation
        self.gen_config()

    def gen_config(self) -> GenConfig:
        return GenConfig(
            max_depth=self.max_depth,
            max_width=self.max_width,
            p_operand=self.p_operand,
            rng_seed=self.rng_seed,
        )


@dataclass(frozen=True, eq=False)
class Candidate:
    """A forest plus its canonical key and (once evaluated) its score."""

    forest: Forest
    key: str
    score: CandidateScore | None = None

    @classmethod
    def from_forest(cls, forest: Forest) -> "Candidate":
        return cls(forest=forest, key=canonical_key(forest))


@dataclass(frozen=True, eq=False)
class HistoryEntry:
    generation: int
    aic: float
    mse: float
    k: int
    equation: str


@dataclass(frozen=True, eq=False)
class DiscoveryResult:
    best: Candidate
    equation_display: str
    generations_run: int
    converged: bool
    history: tuple[HistoryEntry, ...]


def format_equation(forest: Forest, xi) -> str:
    """Render ``u_t = sum of coefficient * term`` for the non-zero terms."""
    terms = [
        (float(c), to_display_string(tree))
        for c, tree in zip(xi, forest.trees)
        if c != 0.0
    ]
    if not terms:
        return "u_t = 0"
    coef, label = terms[0]
    text = f"{coef:.4f} * {label}"
    for coef, label in terms[1:]:
        sign = "+" if coef >= 0 else "-"
        text += f" {sign} {abs(coef):.4f} * {label}"
    return "u_t = " + text


def _rank_key(cand: Candidate):
    sc = cand.score
    return (sc.aic, sc.k, cand.key)


def init_population(cfg: GAConfig, rng: random.Random) -> list[Candidate]:
    """Generate ``population`` forests, distinct by canonical key.

    Every forest carries the default ``u`` tree.  On a key collision the
    forest is regenerated (up to a retry cap, after which duplicates are
    accepted rather than looping forever on tiny vocabularies).
    """
    gen_cfg = cfg.gen_config()
    out: list[Candidate] = []
    keys: set[str] = set()
    for _ in range(cfg.population):
        cand = None
        for _attempt in range(_INIT_RETRY_CAP):
            cand = Candidate.from_forest(random_forest(gen_cfg, rng))
            if cand.key not in keys:
                break
        keys.add(cand.key)
        out.append(cand)
    return out


def crossover_step(
    parents: list[Candidate],
    seen_keys: set[str],
    cfg: GAConfig,
    rng: random.Random,
) -> list[Candidate]:
    """Recombine the best half of a sorted population.

    The top n parents are shuffled once; ordered pair i takes parent i as
    primary and parent n-1-i as donor, producing one child each (so up to n
    children).  Per overlapping tree slot the child takes the donor's tree
    with probability ``p_cross``, otherwise the primary's; donor slots beyond
    the primary's width are appended with probability ``p_cross`` while the
    width cap allows, which lets forest widths drift across generations.
    Children whose canonical key was already seen anywhere in the run are
    dropped; surviving keys are recorded into ``seen_keys`` immediately.
    """
    n = len(parents) // 2
    order = list(parents[:n])
    rng.shuffle(order)
    children: list[Candidate] = []
    for i in range(n):
        primary = order[i].forest
        donor = order[n - 1 - i].forest
        trees: list[Node] = []
        for j in range(max(primary.width, donor.width)):
            if j < primary.width and j < donor.width:
                take_donor = rng.random() < cfg.p_cross
                trees.append(donor.trees[j] if take_donor else primary.trees[j])
            elif j < primary.width:
                trees.append(primary.trees[j])
            elif len(trees) < cfg.max_width and rng.random() < cfg.p_cross:
                trees.append(donor.trees[j])
        child = Candidate.from_forest(Forest(tuple(trees)))
        if child.key in seen_keys:
            continue
        seen_keys.add(child.key)
        children.append(child)
    return children


def _mutated_symbol(sym: str, is_root: bool, rng: random.Random) -> str:
    if sym in OPERANDS:
        pool = OPERANDS
    elif sym in UNARY_OPS:
        pool = UNARY_OPS
    else:
        # a root must stay rule-3 clean under mutation
        pool = (
            tuple(s for s in BINARY_OPS if s not in ROOT_FORBIDDEN)
            if is_root
            else BINARY_OPS
        )
    choices = [s for s in pool if s != sym]
    return rng.choice(choices)


def _mutate_node(node: Node, cfg: GAConfig, rng: random.Random, is_root: bool) -> Node:
    sym = node.symbol
    if rng.random() < cfg.p_mutate_node:
        sym = _mutated_symbol(sym, is_root, rng)
    arity = ARITY[sym]
    if arity == 0:
        return Node(sym)
    if arity == 1:
        return Node(sym, (_mutate_node(node.children[0], cfg, rng, False),))
    left = _mutate_node(node.children[0], cfg, rng, False)
    if sym in DIFF_OPS:
        # differentiation variable stays pinned; it takes no mutation draw
        return Node(sym, (left, X_NODE))
    return Node(sym, (left, _mutate_node(node.children[1], cfg, rng, False)))


def mutate_forest(cand: Candidate, cfg: GAConfig, rng: random.Random) -> Candidate:
    """Mutate node symbols in place, preserving each node's arity class.

    Every node flips to a uniformly chosen different symbol of the same
    class with probability ``p_mutate_node``.  A node that becomes ``d``/
    ``d2`` has its right subtree replaced by the operand ``x``; one that
    stops being ``d``/``d2`` keeps its ``x`` child as an ordinary operand
    (which mutates like any other).  Topology is otherwise unchanged.
    """
    trees = tuple(_mutate_node(t, cfg, rng, True) for t in cand.forest.trees)
    return Candidate.from_forest(Forest(trees))


def replace_tree(cand: Candidate, cfg: GAConfig, rng: random.Random) -> Candidate:
    """With probability ``p_replace_tree``, regenerate one uniformly chosen
    tree of the forest from scratch (new topology allowed)."""
    if rng.random() >= cfg.p_replace_tree:
        return cand
    slot = rng.randrange(cand.forest.width)
    trees = list(cand.forest.trees)
    trees[slot] = random_tree(cfg.gen_config(), rng)
    return Candidate.from_forest(Forest(tuple(trees)))


def evolve(cfg: GAConfig, dataset: Dataset) -> DiscoveryResult:
    """Run the full loop and return the best candidate with its history.

    Scoring is memoized by canonical key within the run (scores are pure
    functions of the forest and dataset, so this cannot change results).
    """
    rng = random.Random(cfg.rng_seed)
    target = ut_vector(dataset, trim=cfg.boundary_trim)
    memo: dict[str, CandidateScore] = {}

    def scored(cand: Candidate) -> Candidate:
        if cand.score is not None:
            return cand
        sc = memo.get(cand.key)
        if sc is None:
            features = build_feature_matrix(
                cand.forest, dataset, trim=cfg.boundary_trim
            )
            sc = score(features, target, cfg.regression)
            memo[cand.key] = sc
        return replace(cand, score=sc)

    pop = init_population(cfg, rng)
    seen_keys: set[str] = set()
    history: list[HistoryEntry] = []
    converged = False
    best = None
    for generation in range(cfg.generations):
        pop = [scored(c) for c in pop]
        pop.sort(key=_rank_key)
        seen_keys.update(c.key for c in pop)
        best = pop[0]
        history.append(
            HistoryEntry(
                generation=generation,
                aic=best.score.aic,
                mse=best.score.mse,
                k=best.score.k,
                equation=format_equation(best.forest, best.score.xi),
            )
        )
        if best.score.valid and best.score.aic <= cfg.aic_threshold:
            converged = True
            break
        if generation == cfg.generations - 1:
            break
        children = [scored(c) for c in crossover_step(pop, seen_keys, cfg, rng)]
        merged = sorted(pop + children, key=_rank_key)
        survivors = merged[: cfg.population]
        elite = survivors[0]
        pop = [elite] + [
            replace_tree(mutate_forest(c, cfg, rng), cfg, rng)
            for c in survivors[1:]
        ]
    return DiscoveryResult(
        best=best,
        equation_display=history[-1].equation,
        generations_run=len(history),
        converged=converged,
        history=tuple(history),
    )
