"""LTL fragment: AST, concrete-syntax parser, finite-trace checker, and
reach-avoid game objective assembly.

Concrete syntax: atoms are identifiers, `true` is a literal; operators
`!`, `&`, `|`, `->`, `X`, `U`, `F`, `G` with precedence
`!` > `X`/`F`/`G` > `U` > `&` > `|` > `->`; `U` and `->` associate right.

The trace checker uses bounded (finite-trace) semantics: an Until needs
its witness inside the trace, Next at the last position is false, Always
quantifies over the remaining positions.  It is an auditor for logged
closed-loop runs, not a synthesis engine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Set

from .errors import LtlSyntaxError, TargetUnreachableWarning


class LtlFormula:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class TrueF(LtlFormula):
    pass


@dataclass(frozen=True)
class Prop(LtlFormula):
    name: str


@dataclass(frozen=True)
class NotF(LtlFormula):
    arg: LtlFormula


@dataclass(frozen=True)
class AndF(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class OrF(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Implies(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Next(LtlFormula):
    arg: LtlFormula


@dataclass(frozen=True)
class Until(LtlFormula):
    left: LtlFormula
    right: LtlFormula


@dataclass(frozen=True)
class Eventually(LtlFormula):
    arg: LtlFormula


@dataclass(frozen=True)
class Always(LtlFormula):
    arg: LtlFormula


def desugar(phi: LtlFormula) -> LtlFormula:
    """Rewrite into the core true/prop/not/and/next/until fragment
    (plus Or, kept primitive for readability)."""
    if isinstance(phi, (TrueF, Prop)):
        return phi
    if isinstance(phi, NotF):
        return NotF(desugar(phi.arg))
    if isinstance(phi, AndF):
        return AndF(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, OrF):
        return OrF(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Implies):
        return OrF(NotF(desugar(phi.left)), desugar(phi.right))
    if isinstance(phi, Next):
        return Next(desugar(phi.arg))
    if isinstance(phi, Until):
        return Until(desugar(phi.left), desugar(phi.right))
    if isinstance(phi, Eventually):
        return Until(TrueF(), desugar(phi.arg))
    if isinstance(phi, Always):
        return NotF(Until(TrueF(), NotF(desugar(phi.arg))))
    raise TypeError(f"not a formula: {phi!r}")


def propositions(phi: LtlFormula) -> frozenset[str]:
    if isinstance(phi, Prop):
        return frozenset({phi.name})
    out: set[str] = set()
    for f in ("arg", "left", "right"):
        child = getattr(phi, f, None)
        if child is not None:
            out |= propositions(child)
    return frozenset(out)


# ---------------------------------------------------------------------------
# parser

_UNARY = {"X": Next, "F": Eventually, "G": Always}


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()!&|":
            tokens.append((ch, i))
            i += 1
        elif ch == "-":
            if text[i:i + 2] != "->":
                raise LtlSyntaxError("expected '->'", i)
            tokens.append(("->", i))
            i += 2
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append((text[i:j], i))
            i = j
        else:
            raise LtlSyntaxError(f"bad character {ch!r}", i)
    return tokens


def parse_ltl(text: str) -> LtlFormula:
    tokens = _tokenize(text)
    pos = [0]

    def peek():
        return tokens[pos[0]][0] if pos[0] < len(tokens) else None

    def here():
        return tokens[pos[0]][1] if pos[0] < len(tokens) else len(text)

    def take():
        tok = tokens[pos[0]]
        pos[0] += 1
        return tok

    def unary() -> LtlFormula:
        tok = peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of formula", here())
        if tok == "!":
            take()
            return NotF(unary())
        if tok in _UNARY:
            take()
            return _UNARY[tok](unary())
        if tok == "(":
            take()
            phi = implication()
            if peek() != ")":
                raise LtlSyntaxError("expected ')'", here())
            take()
            return phi
        if tok == "true":
            take()
            return TrueF()
        if tok.isidentifier() and tok not in ("U",):
            take()
            return Prop(tok)
        raise LtlSyntaxError(f"unexpected token {tok!r}", here())

    def until() -> LtlFormula:
        left = unary()
        if peek() == "U":
            take()
            return Until(left, until())
        return left

    def conjunction() -> LtlFormula:
        phi = until()
        while peek() == "&":
            take()
            phi = AndF(phi, until())
        return phi

    def disjunction() -> LtlFormula:
        phi = conjunction()
        while peek() == "|":
            take()
            phi = OrF(phi, conjunction())
        return phi

    def implication() -> LtlFormula:
        phi = disjunction()
        if peek() == "->":
            take()
            return Implies(phi, implication())
        return phi

    phi = implication()
    if peek() is not None:
        raise LtlSyntaxError(f"trailing input {peek()!r}", here())
    return phi


_PREC = {
    Implies: 1, OrF: 2, AndF: 3, Until: 4,
    Next: 5, Eventually: 5, Always: 5, NotF: 6,
    TrueF: 7, Prop: 7,
}


def pretty(phi: LtlFormula) -> str:
    """Minimal-parenthesis printer; ``parse_ltl(pretty(phi)) == phi``."""

    def wrap(child: LtlFormula, level: int) -> str:
        s = pretty(child)
        return f"({s})" if _PREC[type(child)] < level else s

    if isinstance(phi, TrueF):
        return "true"
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, NotF):
        return "!" + wrap(phi.arg, 6)
    if isinstance(phi, Next):
        return "X " + wrap(phi.arg, 5)
    if isinstance(phi, Eventually):
        return "F " + wrap(phi.arg, 5)
    if isinstance(phi, Always):
        return "G " + wrap(phi.arg, 5)
    if isinstance(phi, Until):
        # right-associative: left child needs parens at equal precedence
        left = pretty(phi.left)
        if _PREC[type(phi.left)] <= 4:
            left = f"({left})"
        return f"{left} U {wrap(phi.right, 4)}"
    if isinstance(phi, AndF):
        return f"{wrap(phi.left, 3)} & {wrap(phi.right, 4)}"
    if isinstance(phi, OrF):
        return f"{wrap(phi.left, 2)} | {wrap(phi.right, 3)}"
    if isinstance(phi, Implies):
        left = pretty(phi.left)
        if _PREC[type(phi.left)] <= 1:
            left = f"({left})"
        return f"{left} -> {wrap(phi.right, 1)}"
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# finite-trace checker


def check_trace(phi: LtlFormula, trace: Sequence[Set[str]], at: int = 0) -> bool:
    """Bounded satisfaction of ``phi`` on a finite, nonempty trace."""
    if not trace:
        raise ValueError("trace must be nonempty")
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, Prop):
        return phi.name in trace[at]
    if isinstance(phi, NotF):
        return not check_trace(phi.arg, trace, at)
    if isinstance(phi, AndF):
        return check_trace(phi.left, trace, at) and check_trace(phi.right, trace, at)
    if isinstance(phi, OrF):
        return check_trace(phi.left, trace, at) or check_trace(phi.right, trace, at)
    if isinstance(phi, Implies):
        return (not check_trace(phi.left, trace, at)) or check_trace(phi.right, trace, at)
    if isinstance(phi, Next):
        return at + 1 < len(trace) and check_trace(phi.arg, trace, at + 1)
    if isinstance(phi, Until):
        for k in range(at, len(trace)):
            if check_trace(phi.right, trace, k):
                return True
            if not check_trace(phi.left, trace, k):
                return False
        return False
    if isinstance(phi, Eventually):
        return any(check_trace(phi.arg, trace, k) for k in range(at, len(trace)))
    if isinstance(phi, Always):
        return all(check_trace(phi.arg, trace, k) for k in range(at, len(trace)))
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# game objective


@dataclass(frozen=True)
class GameObjective:
    """Reach the target cells while never visiting the avoid cells."""

    target: frozenset[int]
    avoid: frozenset[int]

    def __post_init__(self):
        overlap = self.target & self.avoid
        if overlap:
            raise ValueError(f"target and avoid overlap on {len(overlap)} cells")


@dataclass
class CompositeSpec:
    """Mission objective conjoined with the time-varying knowledge part."""

    objective: LtlFormula
    kb_part: LtlFormula
    game: GameObjective

    def formula(self) -> LtlFormula:
        if isinstance(self.kb_part, TrueF):
            return self.objective
        return AndF(self.kb_part, self.objective)


def compile_objective(interp, sign_links: Sequence[tuple[frozenset, frozenset]],
                      known_signs: Set[int],
                      target_name: str = "Target",
                      obstacle_name: str = "Obstacle") -> GameObjective:
    """Fold the activated invariance obligations into an enlarged avoid set.

    ``sign_links`` pairs each sign's cell set with its linked street cells;
    a sign is active once any of its cells has been detected.
    """
    target = interp.extent(target_name)
    avoid = set(interp.extent(obstacle_name))
    for sign_cells, street_cells in sign_links:
        if sign_cells & known_signs:
            avoid |= street_cells
    if target and target <= avoid:
        warnings.warn("avoid set covers the whole target region",
                      TargetUnreachableWarning)
    # target cells swallowed by an obligation stop counting as target
    return GameObjective(target=frozenset(target - avoid),
                         avoid=frozenset(avoid))
