"""ALC knowledge base evaluated over the single grid interpretation.

Concept extents are sets of state-cell indices.  The built-in ``Proximity``
role relates two cells when their planar rectangles are within detection
range ``D`` and the second cell lies ahead of every worst-case heading of
the first; it is evaluated lazily (materializing all cell pairs is
infeasible at full grid size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LtlSyntaxError, UndeclaredName
from .grid import Grid, HyperRect

# ---------------------------------------------------------------------------
# concept AST


class Concept:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Concept):
    pass


@dataclass(frozen=True)
class Bottom(Concept):
    pass


@dataclass(frozen=True)
class Atomic(Concept):
    name: str


@dataclass(frozen=True)
class Not(Concept):
    arg: Concept


@dataclass(frozen=True)
class And(Concept):
    left: Concept
    right: Concept


@dataclass(frozen=True)
class Or(Concept):
    left: Concept
    right: Concept


@dataclass(frozen=True)
class Exists(Concept):
    role: str
    arg: Concept


@dataclass(frozen=True)
class Forall(Concept):
    role: str
    arg: Concept


# ---------------------------------------------------------------------------
# TBox / ABox


@dataclass(frozen=True)
class Inclusion:
    """C is subsumed by D."""
    left: Concept
    right: Concept


@dataclass(frozen=True)
class Equivalence:
    """Fresh atomic name defined by a (non-temporal) concept."""
    name: str
    concept: Concept


@dataclass(frozen=True)
class TemporalEquivalence:
    """Fresh atomic name defined by a temporal formula over concepts.

    The formula is kept opaque here; the synthesis module gives it meaning
    as a safety winning region.
    """
    name: str
    formula: object


@dataclass(frozen=True)
class ConceptAssertion:
    instance: int
    concept: str


@dataclass(frozen=True)
class RoleAssertion:
    pair: tuple[int, int]
    role: str


@dataclass
class KnowledgeBase:
    atomic_concepts: set[str]
    roles: dict[str, float]  # role name -> detection range D
    tbox: list = dc_field(default_factory=list)
    abox: list = dc_field(default_factory=list)

    def check_names(self):
        declared = set(self.atomic_concepts)
        for ax in self.tbox:
            if isinstance(ax, (Equivalence, TemporalEquivalence)):
                declared.add(ax.name)
        for ax in self.tbox:
            if isinstance(ax, Equivalence):
                for name in _atomic_names(ax.concept):
                    if name not in declared:
                        raise UndeclaredName(name)
                for role in _role_names(ax.concept):
                    if role not in self.roles:
                        raise UndeclaredName(role)


def _atomic_names(c: Concept) -> Iterable[str]:
    if isinstance(c, Atomic):
        yield c.name
    elif isinstance(c, Not):
        yield from _atomic_names(c.arg)
    elif isinstance(c, (And, Or)):
        yield from _atomic_names(c.left)
        yield from _atomic_names(c.right)
    elif isinstance(c, (Exists, Forall)):
        yield from _atomic_names(c.arg)


def _role_names(c: Concept) -> Iterable[str]:
    if isinstance(c, Not):
        yield from _role_names(c.arg)
    elif isinstance(c, (And, Or)):
        yield from _role_names(c.left)
        yield from _role_names(c.right)
    elif isinstance(c, (Exists, Forall)):
        yield c.role
        yield from _role_names(c.arg)


# ---------------------------------------------------------------------------
# concept concrete syntax: atoms, `top`, `bottom`, `!C`, `C & D`, `C | D`,
# `exists r.C`, `forall r.C`, parentheses.  Precedence: ! > & > |.


def parse_concept(text: str) -> Concept:
    tokens = _tokenize_concept(text)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else (None, len(text))

    def take(expected=None):
        tok, at = peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of concept", at)
        if expected is not None and tok != expected:
            raise LtlSyntaxError(f"expected {expected!r}, found {tok!r}", at)
        pos[0] += 1
        return tok, at

    def atom() -> Concept:
        tok, at = take()
        if tok == "(":
            c = disj()
            take(")")
            return c
        if tok == "!":
            return Not(atom())
        if tok in ("exists", "forall"):
            role, _ = take()
            if not role.isidentifier():
                raise LtlSyntaxError("expected role name", at)
            take(".")
            c = atom()
            return Exists(role, c) if tok == "exists" else Forall(role, c)
        if tok == "top":
            return Top()
        if tok == "bottom":
            return Bottom()
        if tok.isidentifier():
            return Atomic(tok)
        raise LtlSyntaxError(f"unexpected token {tok!r}", at)

    def conj() -> Concept:
        c = atom()
        while peek()[0] == "&":
            take()
            c = And(c, atom())
        return c

    def disj() -> Concept:
        c = conj()
        while peek()[0] == "|":
            take()
            c = Or(c, conj())
        return c

    c = disj()
    tok, at = peek()
    if tok is not None:
        raise LtlSyntaxError(f"trailing input {tok!r}", at)
    return c


def _tokenize_concept(text: str):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()!&|.":
            tokens.append((ch, i))
            i += 1
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append((text[i:j], i))
            i = j
        else:
            raise LtlSyntaxError(f"bad character {ch!r}", i)
    return tokens


# ---------------------------------------------------------------------------
# Proximity geometry


def _planar_gap(ra: HyperRect, rb: HyperRect, dim: int) -> float:
    return max(0.0, rb.lower[dim] - ra.upper[dim], ra.lower[dim] - rb.upper[dim])


def _angle_in_interval(phi: float, lo: float, hi: float) -> bool:
    """Membership of phi in the wrapped closed interval [lo, hi]."""
    width = hi - lo
    if width >= 2 * np.pi:
        return True
    rel = (phi - lo) % (2 * np.pi)
    return rel <= width


def directional_max(ra: HyperRect, rb: HyperRect, theta_lo: float,
                    theta_hi: float) -> float:
    """Max of ``(x1'-x1) cos t + (x2'-x2) sin t`` over both rects and headings.

    The planar offsets range over corner intervals; for fixed offsets the
    heading maximum of ``R cos(t - phi)`` is at an interval endpoint or at
    the critical heading ``phi = atan2(d2, d1)`` when it lies inside.
    """
    d1s = (rb.lower[0] - ra.upper[0], rb.upper[0] - ra.lower[0])
    d2s = (rb.lower[1] - ra.upper[1], rb.upper[1] - ra.lower[1])
    best = -np.inf
    for d1 in d1s:
        for d2 in d2s:
            r = math.hypot(d1, d2)
            if r == 0.0:
                best = max(best, 0.0)
                continue
            phi = math.atan2(d2, d1)
            if _angle_in_interval(phi, theta_lo, theta_hi):
                cand = r
            else:
                cand = r * max(math.cos(theta_lo - phi), math.cos(theta_hi - phi))
            best = max(best, cand)
    return best


def proximity(grid_x: Grid, cell: int, other: int, max_range: float) -> bool:
    """Detection relation: ``other`` is within range and ahead of ``cell``."""
    ra = grid_x.cell_rect(cell)
    rb = grid_x.cell_rect(other)
    gap = math.hypot(_planar_gap(ra, rb, 0), _planar_gap(ra, rb, 1))
    if gap >= max_range:
        return False
    return directional_max(ra, rb, ra.lower[2], ra.upper[2]) > 0.0


class ProximityRole:
    """Lazy Proximity extent over the grid, with a per-source memo table."""

    def __init__(self, grid_x: Grid, max_range: float):
        self.grid = grid_x
        self.max_range = float(max_range)
        self._memo: dict[tuple[int, frozenset], frozenset] = {}

    def holds(self, cell: int, other: int) -> bool:
        return proximity(self.grid, cell, other, self.max_range)

    def successors_in(self, cell: int, targets: frozenset[int]) -> frozenset[int]:
        key = (cell, targets)
        got = self._memo.get(key)
        if got is None:
            got = frozenset(t for t in targets if self.holds(cell, t))
            self._memo[key] = got
        return got

    def preimage(self, targets: frozenset[int]) -> frozenset[int]:
        """All cells related to at least one target cell (vectorized)."""
        grid = self.grid
        centers = grid.centers()
        half = grid.eta / 2
        lo1, hi1 = centers[:, 0] - half[0], centers[:, 0] + half[0]
        lo2, hi2 = centers[:, 1] - half[1], centers[:, 1] + half[1]
        th_lo, th_hi = centers[:, 2] - half[2], centers[:, 2] + half[2]
        found = np.zeros(grid.size, dtype=bool)
        for t in sorted(targets):
            rb = grid.cell_rect(t)
            g1 = np.maximum(0.0, np.maximum(rb.lower[0] - hi1, lo1 - rb.upper[0]))
            g2 = np.maximum(0.0, np.maximum(rb.lower[1] - hi2, lo2 - rb.upper[1]))
            near = ~found & (np.hypot(g1, g2) < self.max_range)
            if not near.any():
                continue
            idx = np.flatnonzero(near)
            d1s = np.stack([rb.lower[0] - hi1[idx], rb.upper[0] - lo1[idx]])
            d2s = np.stack([rb.lower[1] - hi2[idx], rb.upper[1] - lo2[idx]])
            best = np.full(idx.size, -np.inf)
            for a in range(2):
                for b in range(2):
                    d1, d2 = d1s[a], d2s[b]
                    r = np.hypot(d1, d2)
                    phi = np.arctan2(d2, d1)
                    width = th_hi[idx] - th_lo[idx]
                    rel = np.mod(phi - th_lo[idx], 2 * np.pi)
                    inside = (rel <= width) | (width >= 2 * np.pi)
                    cand = r * np.maximum(np.cos(th_lo[idx] - phi),
                                          np.cos(th_hi[idx] - phi))
                    best = np.maximum(best, np.where(inside, r, cand))
            found[idx[best > 0.0]] = True
        return frozenset(np.flatnonzero(found).tolist())


class ExplicitRole:
    """Role given by an explicit pair set (hand-built interpretations)."""

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        self.pairs = frozenset(pairs)

    def holds(self, cell: int, other: int) -> bool:
        return (cell, other) in self.pairs

    def preimage(self, targets: frozenset[int]) -> frozenset[int]:
        return frozenset(a for a, b in self.pairs if b in targets)


# ---------------------------------------------------------------------------
# interpretation


@dataclass
class Interpretation:
    domain_size: int
    concept_extents: dict[str, frozenset[int]]
    roles: dict[str, object] = dc_field(default_factory=dict)

    def extent(self, name: str) -> frozenset[int]:
        try:
            return self.concept_extents[name]
        except KeyError:
            raise UndeclaredName(name) from None

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(range(self.domain_size))


def eval_concept(interp: Interpretation, concept: Concept) -> frozenset[int]:
    """Structural concept semantics over the fixed interpretation."""
    if isinstance(concept, Top):
        return interp.domain
    if isinstance(concept, Bottom):
        return frozenset()
    if isinstance(concept, Atomic):
        return interp.extent(concept.name)
    if isinstance(concept, Not):
        return interp.domain - eval_concept(interp, concept.arg)
    if isinstance(concept, And):
        return eval_concept(interp, concept.left) & eval_concept(interp, concept.right)
    if isinstance(concept, Or):
        return eval_concept(interp, concept.left) | eval_concept(interp, concept.right)
    if isinstance(concept, Exists):
        role = _get_role(interp, concept.role)
        return role.preimage(eval_concept(interp, concept.arg))
    if isinstance(concept, Forall):
        # forall r.C  ==  not exists r.(not C)
        role = _get_role(interp, concept.role)
        bad = role.preimage(interp.domain - eval_concept(interp, concept.arg))
        return interp.domain - bad
    raise TypeError(f"not a concept: {concept!r}")


def _get_role(interp: Interpretation, name: str):
    try:
        return interp.roles[name]
    except KeyError:
        raise UndeclaredName(name) from None


def assemble_interpretation(kb: KnowledgeBase,
                            regions: Mapping[str, Sequence[HyperRect]],
                            grid_x: Grid) -> Interpretation:
    """Ground atomic extents from scenario boxes and cache derived concepts.

    Non-temporal TBox equivalences are evaluated in declaration order;
    temporal equivalences are left to the synthesis module.
    """
    kb.check_names()
    for name in regions:
        if name not in kb.atomic_concepts:
            raise UndeclaredName(name)
    extents: dict[str, frozenset[int]] = {}
    for name in kb.atomic_concepts:
        cells: set[int] = set()
        for box in regions.get(name, ()):
            cells.update(grid_x.cells_intersecting(box).tolist())
        extents[name] = frozenset(cells)
    roles = {name: ProximityRole(grid_x, rng) for name, rng in kb.roles.items()}
    interp = Interpretation(domain_size=grid_x.size,
                            concept_extents=extents, roles=roles)
    for ax in kb.tbox:
        if isinstance(ax, Equivalence):
            interp.concept_extents[ax.name] = eval_concept(interp, ax.concept)
    return interp
