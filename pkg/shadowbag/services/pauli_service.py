"""
Pauli strings on a periodic chain: sitewise algebra with phase tracking, operator bases
and the single squaring needed for the amplitude factor.

Strings are dense (one axis code per site, site 0 leftmost) and encode as uint8 arrays
with I=0, X=1, Y=2, Z=3 for the vectorized paths.
"""

import itertools
from dataclasses import dataclass
from enum import IntEnum
from functools import reduce

import numpy as np

from shadowbag.core.errors import DimensionError, UnsupportedError


class PauliAxis(IntEnum):
    I = 0
    X = 1
    Y = 2
    Z = 3


class Phase(IntEnum):
    """Powers of i: the cyclic group {+1, +i, -1, -i}."""
    PLUS_ONE = 0
    PLUS_I = 1
    MINUS_ONE = 2
    MINUS_I = 3

    def times(self, other: "Phase") -> "Phase":
        return Phase((self.value + other.value) % 4)

    @property
    def is_real(self) -> bool:
        return self.value % 2 == 0

    def to_complex(self) -> complex:
        return PHASE_VALUES[self.value]


PHASE_VALUES = np.array([1.0, 1.0j, -1.0, -1.0j], dtype=np.complex128)

# sigma^a sigma^b = i^MUL_PHASE[a, b] sigma^MUL_AXIS[a, b]
MUL_AXIS = np.array([[a ^ b for b in range(4)] for a in range(4)], dtype=np.uint8)
MUL_PHASE = np.array([
    [0, 0, 0, 0],
    [0, 0, 1, 3],
    [0, 3, 0, 1],
    [0, 1, 3, 0],
], dtype=np.uint8)

_LETTERS = "IXYZ"

_DENSE = [
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
]


def axis_mul(a: PauliAxis, b: PauliAxis) -> tuple[Phase, PauliAxis]:
    return Phase(int(MUL_PHASE[a, b])), PauliAxis(int(MUL_AXIS[a, b]))


@dataclass(frozen=True)
class PauliString:
    axes: tuple[PauliAxis, ...]

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        try:
            return cls(tuple(PauliAxis(_LETTERS.index(ch)) for ch in label))
        except ValueError:
            raise DimensionError(f"'{label}' is not a Pauli word over IXYZ") from None

    @classmethod
    def from_codes(cls, codes) -> "PauliString":
        return cls(tuple(PauliAxis(int(c)) for c in codes))

    @classmethod
    def identity(cls, L: int) -> "PauliString":
        return cls((PauliAxis.I,) * L)

    @classmethod
    def from_sites(cls, L: int, placement: dict[int, PauliAxis]) -> "PauliString":
        axes = [PauliAxis.I] * L
        for site, axis in placement.items():
            axes[site % L] = PauliAxis(axis)
        return cls(tuple(axes))

    @property
    def label(self) -> str:
        return "".join(_LETTERS[a] for a in self.axes)

    @property
    def weight(self) -> int:
        return sum(1 for a in self.axes if a != PauliAxis.I)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, a in enumerate(self.axes) if a != PauliAxis.I)

    @property
    def codes(self) -> np.ndarray:
        return np.fromiter((int(a) for a in self.axes), dtype=np.uint8, count=len(self.axes))

    def __len__(self) -> int:
        return len(self.axes)

    def __str__(self) -> str:
        return self.label


def string_mul(P: PauliString, Q: PauliString) -> tuple[Phase, PauliString]:
    if len(P) != len(Q):
        raise DimensionError(f"Cannot multiply strings of length {len(P)} and {len(Q)}")
    p, q = P.codes, Q.codes
    exponent = int(MUL_PHASE[p, q].sum()) % 4
    return Phase(exponent), PauliString.from_codes(MUL_AXIS[p, q])


def to_dense(P: PauliString) -> np.ndarray:
    """2^L x 2^L matrix, site 0 is the most significant tensor factor."""
    return reduce(np.kron, (_DENSE[a] for a in P.axes))


# --- Bases ---

def basis_size(L: int, k_M: int = 2) -> int:
    size = 1 + 3 * L
    if k_M >= 2:
        size += 9 * L * (L - 1) // 2
    return size


def enumerate_basis(L: int, k_M: int = 2) -> list[PauliString]:
    """Identity, then weight-1 by (site, axis), then weight-2 by (site pair, axis pair)."""
    return [PauliString.from_codes(row) for row in basis_codes(L, k_M)]


def basis_codes(L: int, k_M: int = 2) -> np.ndarray:
    if k_M not in (1, 2):
        raise UnsupportedError(f"k_M={k_M} is outside the supported bases (1 or 2)")
    if L < 2:
        raise DimensionError("A basis needs at least two sites")

    rows = [np.zeros(L, dtype=np.uint8)]
    for site in range(L):
        for axis in (1, 2, 3):
            row = np.zeros(L, dtype=np.uint8)
            row[site] = axis
            rows.append(row)
    if k_M == 2:
        for j, k in itertools.combinations(range(L), 2):
            for a, b in itertools.product((1, 2, 3), repeat=2):
                row = np.zeros(L, dtype=np.uint8)
                row[j], row[k] = a, b
                rows.append(row)
    return np.stack(rows)


def pair_rank(first: np.ndarray, second: np.ndarray, L: int) -> np.ndarray:
    """Position of (first < second) in lexicographic itertools.combinations order."""
    return first * L - first * (first + 1) // 2 + (second - first - 1)


def basis_index_of(codes: np.ndarray) -> np.ndarray:
    """Row of each weight-<=2 string (K, L) in the k_M = 2 basis ordering."""
    codes = np.atleast_2d(codes)
    K, L = codes.shape
    mask = codes > 0
    weight = mask.sum(axis=1)
    if np.any(weight > 2):
        raise UnsupportedError("basis_index_of only accepts strings of weight <= 2")

    rows = np.arange(K)
    first = np.argmax(mask, axis=1)
    last = L - 1 - np.argmax(mask[:, ::-1], axis=1)
    a1 = codes[rows, first].astype(np.int64)
    a2 = codes[rows, last].astype(np.int64)

    single = 1 + 3 * first + (a1 - 1)
    double = 1 + 3 * L + 9 * pair_rank(first, last, L) + 3 * (a1 - 1) + (a2 - 1)
    return np.where(weight == 0, 0, np.where(weight == 1, single, double)).astype(np.int64)


def enumerate_contiguous(L: int, k: int) -> list[PauliString]:
    """Strings whose support spans a window of k adjacent sites (periodic), ends non-I."""
    if not 1 <= k <= L:
        raise DimensionError(f"Window length {k} must lie in [1, {L}]")

    found: dict[str, PauliString] = {}
    ends = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)
    interior = tuple(PauliAxis)
    for start in range(L):
        window = [(start + t) % L for t in range(k)]
        if k == 1:
            choices = [ends]
        else:
            choices = [ends] + [interior] * (k - 2) + [ends]
        for axes in itertools.product(*choices):
            string = PauliString.from_sites(L, dict(zip(window, axes)))
            found.setdefault(string.label, string)
    return list(found.values())


# --- Hamiltonians ---

@dataclass(frozen=True)
class HamiltonianSpec:
    terms: tuple[tuple[float, PauliString], ...]
    name: str = ""

    @property
    def L(self) -> int:
        if not self.terms:
            raise DimensionError("Empty Hamiltonian has no site count")
        return len(self.terms[0][1])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=np.float64)

    @property
    def strings(self) -> list[PauliString]:
        return [s for _, s in self.terms]

    @property
    def max_weight(self) -> int:
        return max((s.weight for _, s in self.terms), default=0)

    def codes(self, L: int | None = None) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, L or 0), dtype=np.uint8)
        return np.stack([s.codes for _, s in self.terms])

    def coefficient_of(self, label: str) -> float:
        return sum(c for c, s in self.terms if s.label == label)


def expand_square(H: HamiltonianSpec) -> HamiltonianSpec:
    """H^2 as a Pauli sum with like terms merged; imaginary parts cancel pairwise."""
    merged: dict[str, complex] = {}
    strings: dict[str, PauliString] = {}
    for c1, p1 in H.terms:
        for c2, p2 in H.terms:
            phase, product = string_mul(p1, p2)
            merged[product.label] = merged.get(product.label, 0.0) + c1 * c2 * phase.to_complex()
            strings.setdefault(product.label, product)

    scale = max((abs(v) for v in merged.values()), default=0.0)
    terms = []
    for label, value in merged.items():
        if abs(value.imag) > 1e-12 * max(scale, 1.0):
            raise DimensionError(f"Non-Hermitian square: term {label} kept imaginary part {value.imag}")
        if value.real != 0.0:
            terms.append((float(value.real), strings[label]))
    return HamiltonianSpec(terms=tuple(terms), name=f"{H.name}^2" if H.name else "")
