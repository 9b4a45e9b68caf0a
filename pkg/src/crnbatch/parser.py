"""Parse and serialize the `.crn` text format.

Grammar (one reaction per line, `#` starts a comment):

    reaction := side "->" side ":" rate
              | side "<->" side ":" rate "," rate
    side     := <empty> | term ("+" term)*
    term     := [integer] identifier
    ident    := [A-Za-z_][A-Za-z0-9_']*

Rates are positive decimals with optional exponent.  A reversible arrow
expands into two reactions, forward rate first.  Species are registered
in order of first appearance.  The names `__K` and `__W` are reserved
for the species introduced by the uniform transformation, so user
species can safely be called K or W.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .crn import Configuration, Crn, Reaction, Species, make_side
from .errors import (CrnSyntaxError, MalformedAssignment, NegativeCount,
                     NonPositiveRate, UnknownSpecies)

RESERVED_PREFIX = "__"
KAT_NAME = "__K"
WASTE_NAME = "__W"

_TERM_RE = re.compile(r"^\s*(\d+)?\s*([A-Za-z_][A-Za-z0-9_']*)\s*$")
_RATE_RE = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


@dataclass(frozen=True)
class CrnDocument:
    crn: Crn
    comments: tuple[str, ...] = ()


class _SpeciesTable:
    def __init__(self):
        self.names: list[str] = []
        self.index: dict[str, int] = {}

    def get(self, name: str, line: int, col: int) -> int:
        if name.startswith(RESERVED_PREFIX):
            raise CrnSyntaxError(f"species name {name!r} uses the reserved prefix", line, col)
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        return self.index[name]


def _parse_side(text: str, table: _SpeciesTable, line: int, col0: int):
    if not text.strip():
        return []
    pairs = []
    pos = col0
    for chunk in text.split("+"):
        m = _TERM_RE.match(chunk)
        if not m:
            raise CrnSyntaxError(f"bad term {chunk.strip()!r}", line, pos)
        coeff = int(m.group(1)) if m.group(1) else 1
        if coeff < 1:
            raise CrnSyntaxError("stoichiometric coefficient must be >= 1", line, pos)
        sid = table.get(m.group(2), line, pos)
        pairs.append((sid, coeff))
        pos += len(chunk) + 1
    return pairs


def _parse_rate(text: str, line: int, col: int) -> float:
    text = text.strip()
    if not _RATE_RE.match(text):
        raise CrnSyntaxError(f"bad rate {text!r}", line, col)
    value = float(text)
    if value <= 0:
        raise NonPositiveRate(f"rate must be positive, got {text}", line, col)
    return value


def parse_document(text: str) -> CrnDocument:
    table = _SpeciesTable()
    reactions: list[Reaction] = []
    comments: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if "#" in raw:
            body, comment = raw.split("#", 1)
            comments.append(comment.strip())
        else:
            body = raw
        if not body.strip():
            continue
        if ":" not in body:
            raise CrnSyntaxError("missing ': rate'", lineno, len(body))
        lhs, rates_text = body.rsplit(":", 1)
        if "<->" in lhs:
            left, right = lhs.split("<->", 1)
            rate_parts = rates_text.split(",")
            if len(rate_parts) != 2:
                raise CrnSyntaxError("reversible reaction needs two rates 'kf, kr'",
                                     lineno, body.index(":") + 1)
            reversible = True
        elif "->" in lhs:
            left, right = lhs.split("->", 1)
            rate_parts = [rates_text]
            if "," in rates_text:
                raise CrnSyntaxError("irreversible reaction takes a single rate",
                                     lineno, body.index(":") + 1)
            reversible = False
        else:
            raise CrnSyntaxError("missing '->' or '<->'", lineno, 1)
        reactants = _parse_side(left, table, lineno, 1)
        products = _parse_side(right, table, lineno, len(left) + 3)
        rates = [_parse_rate(p, lineno, body.index(":") + 1) for p in rate_parts]
        fwd = Reaction(make_side(reactants), make_side(products), rates[0])
        reactions.append(fwd)
        if reversible:
            reactions.append(Reaction(make_side(products), make_side(reactants), rates[1]))
    species = tuple(Species(i, n) for i, n in enumerate(table.names))
    return CrnDocument(Crn(species, tuple(reactions)), tuple(comments))


def parse_crn(text: str) -> Crn:
    return parse_document(text).crn


def _format_side(side, names) -> str:
    terms = []
    for sid, coeff in side:
        terms.append(names[sid] if coeff == 1 else f"{coeff}{names[sid]}")
    return " + ".join(terms)


def _format_rate(value: float) -> str:
    return repr(float(value))


def serialize_crn(crn: Crn) -> str:
    """Canonical one-reaction-per-line form; parse(serialize(c)) == c."""
    names = crn.names
    lines = []
    for rxn in crn.reactions:
        parts = [p for p in (_format_side(rxn.reactants, names), "->",
                             _format_side(rxn.products, names)) if p]
        lines.append(f"{' '.join(parts)} : {_format_rate(rxn.rate_constant)}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_config(text: str, crn: Crn) -> Configuration:
    """Parse "A=100, B=50" style assignments; unlisted species get 0."""
    counts = np.zeros(crn.n_species, dtype=np.int64)
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise MalformedAssignment(f"expected NAME=COUNT, got {chunk!r}")
        name, _, value = chunk.partition("=")
        name = name.strip()
        value = value.strip()
        try:
            sid = crn.index_of(name)
        except KeyError:
            raise UnknownSpecies(f"unknown species {name!r}") from None
        try:
            count = int(value)
        except ValueError:
            raise MalformedAssignment(f"bad count {value!r} for species {name}") from None
        if count < 0:
            raise NegativeCount(f"count for {name} must be nonnegative, got {count}")
        counts[sid] = count
    return Configuration(counts)
