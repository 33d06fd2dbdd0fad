"""SMILES reader.

Supported subset: organic-subset atoms (B C N O P S F Cl Br I and aromatic
b c n o p s), bracket atoms (isotope parsed and dropped, chirality ``@``/``@@``,
H count, charge, atom class ignored), bonds ``- = # : / \\``, branches and
ring closures (digits and ``%nn``). Dot-disconnected input is rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import replace

from ..errors import (
    EmptySmiles,
    MultiFragmentInput,
    SmilesSyntaxError,
    UnbalancedParenthesis,
    UnclosedRingBond,
    UnknownAtomSymbol,
    ValenceViolation,
)
from .graph import ATOMIC_NUMBER, Atom, Bond, MolGraph
from .rings import sssr

ORGANIC = {"B": 5, "C": 6, "N": 7, "O": 8, "P": 15, "S": 16, "F": 9, "Cl": 17, "Br": 35, "I": 53}
AROMATIC_ORGANIC = {"b": 5, "c": 6, "n": 7, "o": 8, "p": 15, "s": 16}
AROMATIC_BRACKET = {**AROMATIC_ORGANIC, "se": 34, "as": 33, "te": 52}

_VALENCES = {
    1: (1,), 5: (3,), 6: (4,), 7: (3, 5), 8: (2,), 9: (1,), 14: (4,), 15: (3, 5),
    16: (2, 4, 6), 17: (1,), 33: (3, 5), 34: (2, 4, 6), 35: (1,), 52: (2, 4, 6), 53: (1, 3, 5),
}
_BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic", "/": "single", "\\": "single"}
_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?(?P<symbol>[A-Z][a-z]?|[a-z][a-z]?)"
    r"(?P<chiral>@(?:TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2}|@)?)?"
    r"(?P<hcount>H\d*)?(?P<charge>[+-]+\d*)?(?::\d+)?$"
)


def default_valences(atomic_number: int, charge: int = 0) -> tuple[int, ...]:
    """Allowed valences, shifted isoelectronically for charged main-group atoms."""
    z = atomic_number - charge if charge else atomic_number
    return _VALENCES.get(z, ())


def assign_hydrogens(atom: Atom, bond_orders: list[str], bracket: bool | None = None) -> int:
    """Implicit hydrogen count for ``atom`` given the orders of its bonds.

    Aliphatic atoms take the smallest default valence that holds their bond
    valence. For aromatic atoms each aromatic bond counts 1 (sigma) and one
    more unit goes to the pi system when the valence has room for it, so a
    benzene carbon sees 2 + 1 = 3 (the same as flooring 2 x 1.5) and keeps one
    H, while lone-pair donors (furan o, thiophene s, N-substituted pyrrole n)
    end up with none. Bracket atoms never get implicit H.

    Raises:
        ValenceViolation: explicit bonds plus explicit H exceed the largest
            default valence.
    """
    if bracket is None:
        bracket = atom.explicit_h is not None
    valences = default_valences(atom.atomic_number, atom.formal_charge)
    if not valences:
        return 0
    n_arom = sum(o == "aromatic" for o in bond_orders)
    rest = sum({"single": 1, "double": 2, "triple": 3}.get(o, 0) for o in bond_orders)
    explicit_h = atom.explicit_h or 0
    if atom.aromatic and n_arom:
        used, pi = n_arom + rest, 1
    else:
        used, pi = math.floor(1.5 * n_arom + rest), 0
    if used + explicit_h > max(valences):
        raise ValenceViolation(
            f"{atom.symbol}: bond valence {used + explicit_h} exceeds {max(valences)}")
    if bracket:
        return 0
    target = next(v for v in valences if v >= used)
    return max(0, target - used - pi)


def hybridization_of(atom: Atom, bond_orders: list[str]) -> str:
    if atom.atomic_number == 1:
        return "other"
    n = atom.degree + atom.total_h
    if n == 0:
        return "other"
    if n >= 6:
        return "sp3d2"
    if n == 5:
        return "sp3d"
    if n == 4:
        return "sp3"
    doubles = bond_orders.count("double")
    if "triple" in bond_orders or doubles >= 2:
        return "sp"
    if doubles == 1 or atom.aromatic or "aromatic" in bond_orders:
        return "sp2"
    return "sp3"


def _prescan(text: str) -> None:
    """Check parenthesis and ring-label balance before building anything."""
    depth = 0
    open_labels: dict[str, int] = {}
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "[":
            j = text.find("]", i)
            if j < 0:
                raise SmilesSyntaxError(f"unterminated bracket atom at position {i}")
            i = j + 1
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise UnbalancedParenthesis(f"unmatched ')' at position {i}")
        elif ch.isdigit() or ch == "%":
            label = ch
            if ch == "%":
                label = text[i + 1:i + 3]
                if len(label) != 2 or not label.isdigit():
                    raise SmilesSyntaxError(f"bad ring label at position {i}")
                i += 2
            open_labels[label] = open_labels.get(label, 0) ^ 1
        i += 1
    if depth:
        raise UnbalancedParenthesis(f"{depth} unclosed '('")
    unclosed = sorted(k for k, v in open_labels.items() if v)
    if unclosed:
        raise UnclosedRingBond(f"ring bond(s) {', '.join(unclosed)} never closed")


def _parse_bracket(body: str) -> dict:
    m = _BRACKET_RE.match(body)
    if not m:
        raise SmilesSyntaxError(f"malformed bracket atom [{body}]")
    sym = m["symbol"]
    if sym in AROMATIC_BRACKET:
        z, aromatic = AROMATIC_BRACKET[sym], True
    elif sym in ATOMIC_NUMBER:
        z, aromatic = ATOMIC_NUMBER[sym], False
    else:
        raise UnknownAtomSymbol(f"unknown element {sym!r} in [{body}]")
    chiral = m["chiral"]
    if chiral is None:
        chirality = "unspecified"
    elif chiral in ("@", "@TH1"):
        chirality = "CCW"
    elif chiral in ("@@", "@TH2"):
        chirality = "CW"
    else:
        chirality = "other"
    hcount = m["hcount"]
    h = 0 if hcount is None else int(hcount[1:] or 1)
    charge = 0
    if m["charge"]:
        c = m["charge"]
        sign = 1 if c[0] == "+" else -1
        digits = c.lstrip("+-")
        if digits:
            if len(c) - len(digits) != 1:
                raise SmilesSyntaxError(f"malformed charge in [{body}]")
            charge = sign * int(digits)
        else:
            if c.count(c[0]) != len(c):
                raise SmilesSyntaxError(f"malformed charge in [{body}]")
            charge = sign * len(c)
    if not -15 <= charge <= 15:
        raise SmilesSyntaxError(f"charge out of range in [{body}]")
    return dict(atomic_number=z, formal_charge=charge, explicit_h=h, aromatic=aromatic,
                chirality=chirality)


def parse_smiles(text: str) -> MolGraph:
    """Parse one SMILES string into a :class:`MolGraph`."""
    if text is None or not text.strip():
        raise EmptySmiles("empty SMILES")
    text = text.strip()
    if not text.isascii():
        raise SmilesSyntaxError("SMILES must be ASCII")
    if "." in text:
        raise MultiFragmentInput(f"dot-disconnected SMILES not supported: {text}")
    _prescan(text)

    atoms: list[dict] = []
    bonds: list[dict] = []
    pairs: set[frozenset] = set()
    nbr_order: list[list[int]] = []
    stack: list[int] = []
    rings: dict[str, tuple[int, str | None, int]] = {}
    prev: int | None = None
    pending: str | None = None
    just_opened = False

    def add_bond(a: int, b: int, symbol: str | None) -> None:
        key = frozenset((a, b))
        if a == b or key in pairs:
            raise SmilesSyntaxError(f"duplicate or self bond between atoms {a} and {b}")
        pairs.add(key)
        if symbol is None:
            order = "aromatic" if atoms[a]["aromatic"] and atoms[b]["aromatic"] else "single"
        else:
            order = _BOND_SYMBOLS[symbol]
        if order == "aromatic" and not (atoms[a]["aromatic"] and atoms[b]["aromatic"]):
            raise SmilesSyntaxError("aromatic bond between non-aromatic atoms")
        direction = {"/": "end_upright", "\\": "end_downright"}.get(symbol, "none")
        bonds.append(dict(a=a, b=b, order=order, direction=direction, implicit=symbol is None))

    def add_atom(spec: dict) -> None:
        nonlocal prev, pending, just_opened
        idx = len(atoms)
        atoms.append(spec)
        nbr_order.append([])
        if prev is not None:
            add_bond(prev, idx, pending)
            nbr_order[prev].append(idx)
            nbr_order[idx].append(prev)
        elif pending is not None:
            raise SmilesSyntaxError("bond symbol without a preceding atom")
        if spec.get("explicit_h"):
            nbr_order[idx].append(-1)
        prev, pending, just_opened = idx, None, False

    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            j = text.index("]", i)
            add_atom(_parse_bracket(text[i + 1:j]))
            i = j + 1
        elif text.startswith(("Cl", "Br"), i):
            add_atom(dict(atomic_number=ORGANIC[text[i:i + 2]], explicit_h=None, aromatic=False))
            i += 2
        elif ch in ORGANIC:
            add_atom(dict(atomic_number=ORGANIC[ch], explicit_h=None, aromatic=False))
            i += 1
        elif ch in AROMATIC_ORGANIC:
            add_atom(dict(atomic_number=AROMATIC_ORGANIC[ch], explicit_h=None, aromatic=True))
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None or prev is None:
                raise SmilesSyntaxError(f"unexpected bond symbol {ch!r} at position {i}")
            pending = ch
            i += 1
        elif ch == "(":
            if prev is None or pending is not None:
                raise SmilesSyntaxError(f"misplaced '(' at position {i}")
            stack.append(prev)
            just_opened = True
            i += 1
        elif ch == ")":
            if just_opened or pending is not None:
                raise SmilesSyntaxError(f"empty branch or dangling bond at position {i}")
            prev = stack.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesSyntaxError(f"ring label without an atom at position {i}")
            label = text[i + 1:i + 3] if ch == "%" else ch
            i += 3 if ch == "%" else 1
            if label in rings:
                opener, open_symbol, slot = rings.pop(label)
                if pending is not None and open_symbol is not None and \
                        _BOND_SYMBOLS[pending] != _BOND_SYMBOLS[open_symbol]:
                    raise SmilesSyntaxError(f"conflicting bond orders on ring bond {label}")
                if pending is not None or open_symbol is None:
                    add_bond(prev, opener, pending)
                else:
                    add_bond(opener, prev, open_symbol)
                nbr_order[opener][slot] = prev
                nbr_order[prev].append(opener)
            else:
                rings[label] = (prev, pending, len(nbr_order[prev]))
                nbr_order[prev].append(-2)  # filled when the ring closes
            pending = None
        elif ch in "*":
            raise UnknownAtomSymbol("wildcard atoms are not supported")
        elif ch.isalpha():
            raise UnknownAtomSymbol(f"unknown atom symbol {ch!r} at position {i}")
        else:
            raise SmilesSyntaxError(f"unexpected character {ch!r} at position {i}")
    if pending is not None:
        raise SmilesSyntaxError("SMILES ends with a bond symbol")
    if not atoms:
        raise EmptySmiles("no atoms")
    return _finish(text, atoms, bonds, nbr_order)


def _ez(bonds: list[Bond], adjacency: list[list[tuple[int, int]]]) -> list[str]:
    """Assign E/Z to acyclic double bonds that have directional neighbours."""
    flip = {"end_upright": "end_downright", "end_downright": "end_upright"}
    stereo = ["none"] * len(bonds)
    for k, bond in enumerate(bonds):
        if bond.order != "double" or bond.in_ring:
            continue
        sides = []
        for end, other in ((bond.a, bond.b), (bond.b, bond.a)):
            marks = []
            for nbr, kk in adjacency[end]:
                nb = bonds[kk]
                if nbr == other or nb.direction == "none":
                    continue
                # direction as seen going outward from the double-bond atom
                marks.append(nb.direction if nb.a == end else flip[nb.direction])
            sides.append(marks[0] if marks else None)
        if sides[0] and sides[1]:
            stereo[k] = "Z" if sides[0] == sides[1] else "E"
    return stereo


def _finish(text: str, atom_specs: list[dict], bond_specs: list[dict], nbr_order: list[list[int]]) -> MolGraph:
    n = len(atom_specs)
    ring_sets = sssr(n, [(b["a"], b["b"]) for b in bond_specs])
    ring_atoms = set().union(*ring_sets) if ring_sets else set()
    # both endpoints in one SSSR ring <=> the bond is not a bridge
    ring_bonds = {k for k, b in enumerate(bond_specs)
                  if any(b["a"] in r and b["b"] in r for r in ring_sets)}

    bonds: list[Bond] = []
    for k, b in enumerate(bond_specs):
        order = b["order"]
        if order == "aromatic" and k not in ring_bonds:
            if b["implicit"]:
                order = "single"
            else:
                raise SmilesSyntaxError("explicit aromatic bond outside a ring")
        bonds.append(Bond(b["a"], b["b"], order, b["direction"], "none", k in ring_bonds))

    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, b in enumerate(bonds):
        adjacency[b.a].append((b.b, k))
        adjacency[b.b].append((b.a, k))

    atoms: list[Atom] = []
    for i, spec in enumerate(atom_specs):
        if spec["aromatic"] and i not in ring_atoms:
            raise SmilesSyntaxError(f"aromatic atom {i} is not in a ring")
        orders = [bonds[k].order for _, k in adjacency[i]]
        atom = Atom(
            atomic_number=spec["atomic_number"],
            formal_charge=spec.get("formal_charge", 0),
            explicit_h=spec.get("explicit_h"),
            aromatic=spec["aromatic"],
            chirality=spec.get("chirality", "unspecified"),
            degree=len(adjacency[i]),
            in_ring=i in ring_atoms,
        )
        atom = replace(atom, implicit_h=assign_hydrogens(atom, orders))
        atom = replace(atom, hybridization=hybridization_of(atom, orders))
        atoms.append(atom)

    stereo = _ez(bonds, adjacency)
    bonds = [replace(b, stereo=s) for b, s in zip(bonds, stereo)]
    refs = tuple(tuple(nbr_order[i]) if atoms[i].chirality != "unspecified" else () for i in range(n))
    return MolGraph(tuple(atoms), tuple(bonds), tuple(ring_sets), text, refs)


def read_smiles_file(path) -> list[tuple[int, str]]:
    """Return ``(line_number, smiles)`` for every non-blank, non-comment line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            out.append((lineno, s.split()[0]))
    return out
