"""Symbolic expression trees and forests.

A candidate PDE right-hand side is a *forest*: an ordered collection of
function terms, each term one binary tree over a small closed vocabulary of
operands and operators.  Trees serialize to a prefix-notation "computable
string" (the interchange format used by the CLI and the evolution log) and to
a human-readable infix form.

Vocabulary (symbols double as their computable-string spellings):

==========  =====  ==========================================
symbol      arity  meaning
==========  =====  ==========================================
``u``       0      the observed field
``x``       0      the spatial coordinate
``ux``      0      first spatial derivative of the field
``0``       0      constant zero (prunes a leaf/branch)
``^2``      1      square
``^3``      1      cube
``+ - * /`` 2      pointwise arithmetic
``d``       2      first spatial derivative of the left child
``d2``      2      second spatial derivative of the left child
==========  =====  ==========================================

``d``/``d2`` keep the computable-string shape of a binary operator, but their
right child is pinned to the operand ``x``: it names the differentiation
variable and is never evaluated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

OPERANDS = ("u", "x", "ux", "0")
UNARY_OPS = ("^2", "^3")
BINARY_OPS = ("+", "-", "*", "/", "d", "d2")
OPERATORS = UNARY_OPS + BINARY_OPS
DIFF_OPS = ("d", "d2")
ROOT_FORBIDDEN = ("+", "-")
ROOT_OPERATORS = tuple(s for s in OPERATORS if s not in ROOT_FORBIDDEN)

ARITY = {s: 0 for s in OPERANDS}
ARITY.update({s: 1 for s in UNARY_OPS})
ARITY.update({s: 2 for s in BINARY_OPS})


class ParseError(ValueError):
    """Malformed computable string.  ``pos`` is the 0-based offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class ArityError(ParseError):
    """Operator applied to the wrong number of child expressions."""


@dataclass(frozen=True)
class Node:
    """One tree node: an operand leaf or an operator with children.

    Construction only checks that the symbol belongs to the vocabulary;
    structural rules (arity, root constraints, depth caps) are reported by
    :func:`validate` so that malformed trees can be built and diagnosed.
    """

    symbol: str
    children: tuple["Node", ...] = ()

    def __post_init__(self):
        if self.symbol not in ARITY:
            raise ValueError(f"unknown symbol {self.symbol!r}")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))


U_TREE = Node("u")
X_NODE = Node("x")


def depth(node: Node) -> int:
    """Depth of the tree rooted at ``node``; a lone leaf has depth 1."""
    if not node.children:
        return 1
    return 1 + max(depth(c) for c in node.children)


def count_nodes(node: Node) -> int:
    return 1 + sum(count_nodes(c) for c in node.children)


@dataclass(frozen=True)
class Forest:
    """An ordered, non-empty collection of trees (one PDE candidate)."""

    trees: tuple[Node, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ValueError("a forest needs at least one tree")

    @property
    def width(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class GenConfig:
    """Random-generation limits and the operand-vs-operator coin."""

    max_depth: int = 4
    max_width: int = 5
    p_operand: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_width < 1:
            raise ValueError("max_width must be >= 1")
        if not 0.0 < self.p_operand <= 1.0:
            raise ValueError("p_operand must be in (0, 1]")

    def rng(self) -> random.Random:
        return random.Random(self.rng_seed)


def random_tree(cfg: GenConfig, rng: random.Random) -> Node:
    """Generate one valid tree.

    At each position the node is an operand with probability ``p_operand``
    (forced at the depth cap), uniform over the four operands; otherwise an
    operator uniform over the permitted set (ADD/SUB excluded at the root).
    A ``d``/``d2`` node gets its right child pinned to ``x``.
    """
    return _random_node(cfg, rng, 1)


def _random_node(cfg: GenConfig, rng: random.Random, level: int) -> Node:
    if level >= cfg.max_depth or rng.random() < cfg.p_operand:
        return Node(rng.choice(OPERANDS))
    sym = rng.choice(ROOT_OPERATORS if level == 1 else OPERATORS)
    if sym in DIFF_OPS:
        children = (_random_node(cfg, rng, level + 1), X_NODE)
    elif ARITY[sym] == 1:
        children = (_random_node(cfg, rng, level + 1),)
    else:
        children = (
            _random_node(cfg, rng, level + 1),
            _random_node(cfg, rng, level + 1),
        )
    return Node(sym, children)


def random_forest(
    cfg: GenConfig, rng: random.Random, include_default_u: bool = True
) -> Forest:
    """Generate a forest with its tree count uniform in [1, max_width].

    With ``include_default_u`` the single-node tree ``u`` occupies the first
    slot (the field itself is a common enough term to always keep on offer).
    """
    count = rng.randint(1, cfg.max_width)
    trees: list[Node] = [U_TREE] if include_default_u else []
    while len(trees) < count:
        trees.append(random_tree(cfg, rng))
    return Forest(tuple(trees))


@dataclass(frozen=True)
class Violation:
    """One broken construction rule, located by tree index and child path."""

    rule: int
    path: str
    message: str


def validate(forest: Forest, cfg: GenConfig) -> list[Violation]:
    """Check the five forest-construction rules; empty list means valid.

    1. leaves are operands and internal nodes are operators;
    2. every internal node has exactly arity-many children;
    3. the root is not ADD/SUB;
    4. tree depth does not exceed ``cfg.max_depth``;
    5. forest width does not exceed ``cfg.max_width``.

    Rule 6 is the differentiation-variable constraint: the right child of a
    ``d``/``d2`` node must be the operand ``x``.  Generated and mutated trees
    always satisfy it; it is reported so hand-built trees can be diagnosed.
    Diagnostic only: never raises.
    """
    out: list[Violation] = []
    if forest.width > cfg.max_width:
        out.append(
            Violation(
                5,
                "forest",
                f"width {forest.width} exceeds max_width {cfg.max_width}",
            )
        )
    for i, tree in enumerate(forest.trees):
        base = f"tree[{i}]"
        if tree.symbol in ROOT_FORBIDDEN:
            out.append(Violation(3, base, f"root is {tree.symbol!r}"))
        d = depth(tree)
        if d > cfg.max_depth:
            out.append(
                Violation(4, base, f"depth {d} exceeds max_depth {cfg.max_depth}")
            )
        _check_node(tree, base, out)
    return out


def _check_node(node: Node, path: str, out: list[Violation]) -> None:
    want = ARITY[node.symbol]
    have = len(node.children)
    if want == 0 and have > 0:
        out.append(Violation(1, path, f"operand {node.symbol!r} has children"))
    elif want > 0 and have == 0:
        out.append(Violation(1, path, f"operator {node.symbol!r} is a leaf"))
    elif want != have:
        out.append(
            Violation(
                2, path, f"{node.symbol!r} has {have} children, expected {want}"
            )
        )
    if node.symbol in DIFF_OPS and have == 2 and node.children[1] != X_NODE:
        out.append(
            Violation(6, path, f"{node.symbol!r} right child must be the operand x")
        )
    for j, child in enumerate(node.children):
        _check_node(child, f"{path}/{j}", out)


# --- serialization -----------------------------------------------------------

_NESTED_BRACKETS = {0: ("(", ")"), 1: ("[", "]")}
_OPENERS = {"{": "}", "[": "]", "(": ")"}
_CLOSERS = set("}])")


def to_computable_string(tree: Node) -> str:
    """Render as prefix notation: operator first, children left to right.

    The outermost calculation unit is brace-wrapped; nested units alternate
    square brackets and parentheses (purely visual: the parser treats all
    three bracket pairs interchangeably).  Examples::

        u / x                      ->  "{ / u x }"
        d/dx(d/dx(u) + u*u)        ->  "{ d [+ (d u x) (* u u)] x }"
        u                          ->  "{ u }"
    """
    return "{ " + _render(tree, 0) + " }"


def _render(node: Node, nested: int) -> str:
    if not node.children:
        return node.symbol
    inner = " ".join([node.symbol] + [_render(c, nested + 1) for c in node.children])
    if nested == 0:
        return inner
    open_, close = _NESTED_BRACKETS[nested % 2]
    return open_ + inner + close


def parse_computable_string(text: str) -> Node:
    """Parse a computable string back into a tree.

    Inverse of :func:`to_computable_string` on all valid trees.  Raises
    :class:`ParseError` with a position on malformed input and
    :class:`ArityError` when an operator's child count is wrong.  Structural
    validity (root rule, depth, pinned differentiation variable) is *not*
    enforced here; run :func:`validate` on the result.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input", 0)
    node, i = _parse_expr(tokens, 0)
    if i != len(tokens):
        raise ParseError(f"trailing input {tokens[i][0]!r}", tokens[i][1])
    return node


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in _OPENERS or ch in _CLOSERS:
            tokens.append((ch, i))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in _OPENERS and text[j] not in _CLOSERS:
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def _parse_expr(tokens: list[tuple[str, int]], i: int) -> tuple[Node, int]:
    tok, pos = tokens[i]
    if tok in _OPENERS:
        return _parse_unit(tokens, i)
    if tok in OPERANDS:
        return Node(tok), i + 1
    if tok in ARITY:
        raise ParseError(f"operator {tok!r} outside a bracketed unit", pos)
    raise ParseError(f"unknown token {tok!r}", pos)


def _parse_unit(tokens: list[tuple[str, int]], i: int) -> tuple[Node, int]:
    open_pos = tokens[i][1]
    i += 1
    if i >= len(tokens):
        raise ParseError("unclosed bracket", open_pos)
    head, head_pos = tokens[i]
    if head in _CLOSERS:
        raise ParseError("empty unit", head_pos)
    if head not in ARITY:
        raise ParseError(f"unknown token {head!r}", head_pos)
    i += 1
    want = ARITY[head]
    children: list[Node] = []
    while True:
        if i >= len(tokens):
            raise ParseError("unclosed bracket", open_pos)
        tok, pos = tokens[i]
        if tok in _CLOSERS:
            if len(children) != want:
                raise ArityError(
                    f"{head!r} expects {want} operand(s), got {len(children)}",
                    pos,
                )
            return Node(head, tuple(children)), i + 1
        if len(children) == want:
            raise ArityError(
                f"{head!r} expects {want} operand(s), got more", pos
            )
        child, i = _parse_expr(tokens, i)
        children.append(child)


# --- display -----------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^2": 3, "^3": 3}
_ATOMIC = 4


def to_display_string(tree: Node) -> str:
    """Infix rendering with minimal parentheses; ``d``/``d2`` become
    ``d/dx(...)`` / ``d2/dx2(...)``."""
    text, _ = _display(tree)
    return text


def _display(node: Node) -> tuple[str, int]:
    sym = node.symbol
    if not node.children:
        return sym, _ATOMIC
    if sym == "d":
        return f"d/dx({_display(node.children[0])[0]})", _ATOMIC
    if sym == "d2":
        return f"d2/dx2({_display(node.children[0])[0]})", _ATOMIC
    if sym in UNARY_OPS:
        inner, p = _display(node.children[0])
        if p < _ATOMIC:
            inner = f"({inner})"
        return inner + sym, _PRECEDENCE[sym]
    prec = _PRECEDENCE[sym]
    left, lp = _display(node.children[0])
    right, rp = _display(node.children[1])
    if lp < prec:
        left = f"({left})"
    if rp < prec or (rp == prec and sym in ("-", "/")):
        right = f"({right})"
    if sym in ("+", "-"):
        return f"{left} {sym} {right}", prec
    return f"{left}{sym}{right}", prec


def canonical_key(forest: Forest) -> str:
    """Order-independent forest identity used for deduplication.

    The multiset of per-tree computable strings, sorted and joined with
    ``&``.  No algebraic canonicalization: ``u*x`` and ``x*u`` stay distinct.
    """
    return "&".join(sorted(to_computable_string(t) for t in forest.trees))
