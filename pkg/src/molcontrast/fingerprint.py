"""Morgan/ECFP bit fingerprints, Tanimoto similarity and negative-pair weights.

Identifier hashing is BLAKE2b with an 8-byte digest over little-endian int64
words, so fingerprints are identical across runs, interpreters and platforms:

* initial identifier of an atom: hash of (atomic number, formal charge,
  degree, total H, in ring, aromatic);
* iteration r: hash of (own identifier, then the sorted (bond code,
  neighbour identifier) pairs), bond codes single=1 double=2 triple=3
  aromatic=4.

Every identifier of every iteration 0..radius sets bit ``id mod nbits``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chem.graph import MolGraph
from .errors import DomainError, WidthMismatch

BOND_CODE = {"single": 1, "double": 2, "triple": 3, "aromatic": 4}
DEFAULT_RADIUS = 2
DEFAULT_NBITS = 2048


def _hash64(words: Sequence[int]) -> int:
    data = struct.pack(f"<{len(words)}q", *words)
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _signed(x: int) -> int:
    return x - (1 << 64) if x >= 1 << 63 else x


@dataclass(frozen=True)
class Fingerprint:
    bits: np.ndarray  # bool, shape (nbits,), read-only
    radius: int
    nbits: int

    def __post_init__(self):
        self.bits.setflags(write=False)

    @property
    def on_bits(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def to_hex(self) -> str:
        """Hex of the bit vector, bit i stored at byte i//8, position i%8 (LSB first)."""
        return np.packbits(self.bits, bitorder="little").tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, radius: int, nbits: int) -> "Fingerprint":
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:nbits].astype(bool)
        return cls(bits, radius, nbits)

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return self.nbits == other.nbits and self.radius == other.radius and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.radius, self.nbits, self.bits.tobytes()))


def morgan_identifiers(mol: MolGraph, radius: int) -> list[list[int]]:
    """Per-iteration atom identifiers (unsigned 64-bit); ``out[r][i]`` for atom i."""
    ids = [
        _hash64([a.atomic_number, a.formal_charge, a.degree, a.total_h, int(a.in_ring), int(a.aromatic)])
        for a in mol.atoms
    ]
    layers = [ids]
    for _ in range(radius):
        prev = layers[-1]
        nxt = []
        for i in range(mol.n_atoms):
            env = sorted((BOND_CODE[mol.bonds[k].order], prev[j]) for j, k in mol.adjacency[i])
            words = [_signed(prev[i])]
            for code, nid in env:
                words += [code, _signed(nid)]
            nxt.append(_hash64(words))
        layers.append(nxt)
    return layers


def ecfp(mol: MolGraph, radius: int = DEFAULT_RADIUS, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    if radius < 0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    if nbits < 64 or nbits & (nbits - 1):
        raise DomainError(f"nbits must be a power of two >= 64, got {nbits}")
    bits = np.zeros(nbits, dtype=bool)
    for layer in morgan_identifiers(mol, radius):
        for ident in layer:
            bits[ident % nbits] = True
    return Fingerprint(bits, radius, nbits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a & b| / |a | b|; two empty fingerprints count as identical (1.0)."""
    if a.nbits != b.nbits:
        raise WidthMismatch(f"fingerprint widths differ: {a.nbits} vs {b.nbits}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(a.bits & b.bits)) / float(union)


def tanimoto_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    """All-pairs Tanimoto, vectorised; agrees with :func:`tanimoto` entrywise."""
    if not fps:
        return np.zeros((0, 0))
    widths = {fp.nbits for fp in fps}
    if len(widths) > 1:
        raise WidthMismatch(f"mixed fingerprint widths {sorted(widths)}")
    x = np.stack([fp.bits for fp in fps]).astype(np.float64)
    inter = x @ x.T
    counts = x.sum(axis=1)
    union = counts[:, None] + counts[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return sim


def neg_weight(sim: float, lambda1: float) -> float:
    """Weight of a negative pair: ``1 - lambda1 * sim``."""
    if not 0.0 <= sim <= 1.0:
        raise DomainError(f"similarity must lie in [0, 1], got {sim}")
    if not 0.0 <= lambda1 <= 1.0:
        raise DomainError(f"lambda1 must lie in [0, 1], got {lambda1}")
    return 1.0 - lambda1 * sim


@dataclass(frozen=True)
class NegWeightMatrix:
    w: np.ndarray
    lambda1: float


def weight_matrix_from_fingerprints(fps: Sequence[Fingerprint], lambda1: float, views: int = 2) -> NegWeightMatrix:
    """Expand per-molecule similarities to the ``views * N`` square of view weights.

    View ``i`` (0-based) belongs to molecule ``i // views``.
    """
    if not 0.0 <= lambda1 <= 1.0:
        raise DomainError(f"lambda1 must lie in [0, 1], got {lambda1}")
    sim = tanimoto_matrix(fps)
    w_mol = 1.0 - lambda1 * sim
    src = np.repeat(np.arange(len(fps)), views)
    return NegWeightMatrix(w_mol[np.ix_(src, src)], lambda1)


def build_weight_matrix(mols: Sequence[MolGraph], lambda1: float, radius: int = DEFAULT_RADIUS,
                        nbits: int = DEFAULT_NBITS, views: int = 2) -> NegWeightMatrix:
    if not mols:
        raise DomainError("batch must contain at least one molecule")
    return weight_matrix_from_fingerprints([ecfp(m, radius, nbits) for m in mols], lambda1, views)
