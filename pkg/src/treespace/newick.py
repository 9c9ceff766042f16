"""
Newick parsing and canonical Newick output.

Leaf labels must be the integers 0..r, each appearing exactly once, and every
edge must carry a branch length.  Parsed trees are logically re-rooted at leaf
0, which fixes the orientation of every split; a degree-2 root (rooted-style
input) is collapsed by summing the two root edges.  Zero-length interior edges
are contracted with a warning.

The writer emits a canonical form: the tree is written from the node where
leaf 0 attaches, children are ordered by the smallest leaf label in their
subtree, and lengths use ``repr`` so output is byte-stable and round-trips
exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .splits import Split
from .trees import LENGTH_TOL, Tree

__all__ = ["NewickError", "parse_newick", "write_newick"]


class NewickError(ValueError):
    """Malformed Newick text or invalid labels/lengths."""


@dataclass
class _Node:
    children: List["_Node"] = field(default_factory=list)
    label: Optional[str] = None
    length: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "(),;:":
            yield c
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "(),;:":
                j += 1
            yield text[i:j]
            i = j
    yield None  # end marker


class _Parser:
    def __init__(self, text: str):
        self._toks = _tokenize(text)
        self._cur = next(self._toks)

    def _advance(self):
        self._cur = next(self._toks)

    def _expect(self, tok: str):
        if self._cur != tok:
            raise NewickError(f"expected {tok!r}, found {self._cur!r}")
        self._advance()

    def parse(self) -> _Node:
        if self._cur is None:
            raise NewickError("empty input")
        root = self._subtree()
        self._expect(";")
        if self._cur is not None:
            raise NewickError(f"trailing content after ';': {self._cur!r}")
        return root

    def _subtree(self) -> _Node:
        node = _Node()
        if self._cur == "(":
            self._advance()
            node.children.append(self._subtree())
            while self._cur == ",":
                self._advance()
                node.children.append(self._subtree())
            self._expect(")")
            if len(node.children) < 2:
                raise NewickError("internal node with a single child")
        if self._cur is not None and self._cur not in "(),;:":
            node.label = self._cur
            self._advance()
        if self._cur == ":":
            self._advance()
            tok = self._cur
            if tok is None or tok in "(),;:":
                raise NewickError("':' not followed by a branch length")
            try:
                node.length = float(tok)
            except ValueError:
                raise NewickError(f"non-numeric branch length {tok!r}") from None
            self._advance()
        if node.is_leaf and node.label is None:
            raise NewickError("leaf without a label")
        return node


def _leaf_label(node: _Node) -> int:
    try:
        value = int(node.label)
    except (TypeError, ValueError):
        raise NewickError(f"leaf label {node.label!r} is not an integer") from None
    return value


def parse_newick(text: str) -> Tree:
    """
    Parse one Newick string into a :class:`Tree`.

    Raises :class:`NewickError` on malformed syntax, duplicate or missing
    labels, missing/non-numeric/negative branch lengths.
    """
    root = _Parser(text).parse()
    if root.is_leaf:
        raise NewickError("a single leaf is not a tree")

    # A degree-2 root is a rooted-style tree: the root subdivides one edge of
    # the unrooted tree, so merge the two root edges into one.
    if len(root.children) == 2:
        a, b = root.children
        if a.length is None or b.length is None:
            raise NewickError("missing branch length at the root")
        if a.is_leaf and b.is_leaf:
            raise NewickError("a tree needs at least three leaves")
        inner, outer = (a, b) if not a.is_leaf else (b, a)
        outer.length = a.length + b.length
        merged = _Node(children=inner.children + [outer])
        root = merged

    # Collect leaves and validate the label set is exactly {0..r}.
    leaves: Dict[int, float] = {}

    def walk_leaves(node: _Node):
        for ch in node.children:
            if ch.is_leaf:
                label = _leaf_label(ch)
                if ch.length is None:
                    raise NewickError(f"leaf {label} has no branch length")
                if ch.length < 0:
                    raise NewickError(f"negative length on leaf {label}")
                if label in leaves:
                    raise NewickError(f"duplicate leaf label {label}")
                leaves[label] = ch.length
            else:
                walk_leaves(ch)

    walk_leaves(root)
    leaf_count = len(leaves)
    if leaf_count < 3:
        raise NewickError("a tree needs at least three leaves")
    if sorted(leaves) != list(range(leaf_count)):
        missing = sorted(set(range(max(leaves) + 1)) - set(leaves))
        raise NewickError(f"leaf labels must be 0..r with no gaps; missing {missing}")

    interior: Dict[Split, float] = {}

    def subtree_leafset(node: _Node) -> set:
        if node.is_leaf:
            return {_leaf_label(node)}
        out = set()
        for ch in node.children:
            out |= subtree_leafset(ch)
        return out

    def walk_internal(node: _Node):
        for ch in node.children:
            if ch.is_leaf:
                continue
            if ch.length is None:
                raise NewickError("internal edge has no branch length")
            if ch.length < 0:
                raise NewickError("negative length on an internal edge")
            split = Split(subtree_leafset(ch), leaf_count)
            if split in interior:
                raise NewickError(f"duplicate split {split}")
            if ch.length <= LENGTH_TOL:
                warnings.warn(
                    f"contracting zero-length interior edge {split}", stacklevel=2
                )
            else:
                interior[split] = ch.length
            walk_internal(ch)

    walk_internal(root)
    return Tree(interior, [leaves[i] for i in range(leaf_count)])


def write_newick(t: Tree) -> str:
    """
    Canonical, byte-stable Newick form of *t* (see module docstring).
    ``parse_newick(write_newick(t)) == t`` exactly.
    """
    # Order splits by the size of the far side (the side without leaf 0);
    # each split's parent is the smallest far side strictly containing it.
    splits = sorted(t.interior, key=lambda s: len(s.other_side))
    far = {s: s.other_side for s in splits}
    children: Dict[object, list] = {s: [] for s in splits}
    children["root"] = []
    for i, s in enumerate(splits):
        parent = "root"
        for u in splits[i + 1 :]:
            if far[s] < far[u]:
                parent = u
                break
        children[parent].append(s)
    covered = {s: set().union(*(far[c] for c in children[s]), set()) for s in splits}
    for s in splits:
        for leaf in far[s] - covered[s]:
            children[s].append(leaf)
    root_covered = set().union(*(far[c] for c in children["root"]), set())
    for leaf in range(t.leaf_count):
        if leaf not in root_covered:
            children["root"].append(leaf)

    def min_leaf(item) -> int:
        return item if isinstance(item, int) else min(far[item])

    def render(item) -> str:
        if isinstance(item, int):
            return f"{item}:{t.pendants[item]!r}"
        inner = ",".join(render(c) for c in sorted(children[item], key=min_leaf))
        return f"({inner}):{t.interior[item]!r}"

    body = ",".join(render(c) for c in sorted(children["root"], key=min_leaf))
    return f"({body});"
