"""
Correlation Service - M[b, a] = tr(rho P_b P_a) over the weight-<=2 Pauli basis

Every product P_b P_a has weight <= 4, so its shadow estimate factorizes per snapshot into
two weight-<=2 halves. Snapshot values of the weight-<=2 basis are computed once per
evaluation (an N x D table) and each distinct product is the mean of two columns multiplied
elementwise. Estimates are shared by (b, a) and (a, b), which keeps M exactly Hermitian.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from shadowbag.common.logger import setup_logger
from shadowbag.core.errors import DimensionError, UnsupportedError
from shadowbag.services.pauli_service import (
    MUL_PHASE,
    HamiltonianSpec,
    PauliString,
    basis_codes,
    basis_index_of,
)
from shadowbag.services.shadow_service import SnapshotBag, estimate_grad_many, estimate_many
from shadowbag.utils.json_storage import write_csv

logger = setup_logger("Corrmat")

_CHUNK_ELEMENTS = 1 << 22
_KEY_SITES = 31


def string_keys(codes: np.ndarray) -> np.ndarray:
    """Pack (K, L) codes into int64 with two bits per site; XOR of keys is the product string."""
    codes = np.atleast_2d(codes)
    if codes.shape[1] > _KEY_SITES:
        raise UnsupportedError(f"L={codes.shape[1]} exceeds the packed-key envelope")
    shifts = 2 * np.arange(codes.shape[1], dtype=np.int64)
    return (codes.astype(np.int64) << shifts).sum(axis=1)


def keys_to_codes(keys: np.ndarray, L: int) -> np.ndarray:
    shifts = 2 * np.arange(L, dtype=np.int64)
    return ((keys[:, None] >> shifts) & 3).astype(np.uint8)


def split_halves(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Basis rows (left, right) with P = P_left * P_right: left takes the first two support
    sites, right the rest. Disjoint supports, so the product carries no phase.
    """
    codes = np.atleast_2d(codes)
    mask = codes > 0
    if np.any(mask.sum(axis=1) > 4):
        raise UnsupportedError("Only strings of weight <= 4 split into two basis halves")
    rank = np.cumsum(mask, axis=1)
    left = np.where(mask & (rank <= 2), codes, 0)
    right = np.where(mask & (rank > 2), codes, 0)
    return basis_index_of(left), basis_index_of(right)


@dataclass(frozen=True)
class PairTable:
    """Site/axis layout of the k = 2 basis; padding is (site 0, I) with factor 1."""
    L: int
    site1: np.ndarray
    axis1: np.ndarray
    site2: np.ndarray
    axis2: np.ndarray

    @classmethod
    def for_sites(cls, L: int) -> "PairTable":
        codes = basis_codes(L, 2)
        D = codes.shape[0]
        site1 = np.zeros(D, dtype=np.int64)
        axis1 = np.zeros(D, dtype=np.int64)
        site2 = np.zeros(D, dtype=np.int64)
        axis2 = np.zeros(D, dtype=np.int64)
        for row in range(1, D):
            support = np.flatnonzero(codes[row])
            site1[row], axis1[row] = support[0], codes[row, support[0]]
            if support.size == 2:
                site2[row], axis2[row] = support[1], codes[row, support[1]]
        return cls(L=L, site1=site1, axis1=axis1, site2=site2, axis2=axis2)

    @property
    def size(self) -> int:
        return self.site1.size

    def values(self, table: np.ndarray) -> np.ndarray:
        """(N, D) snapshot values of every basis string from (N, L, 4) site tables."""
        return table[:, self.site1, self.axis1] * table[:, self.site2, self.axis2]

    def site_columns(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per site j: basis columns whose first (resp. second) factor sits on j."""
        return [
            (np.flatnonzero((self.site1 == j) & (self.axis1 > 0)),
             np.flatnonzero((self.site2 == j) & (self.axis2 > 0)))
            for j in range(self.L)
        ]


def pair_estimates(Q: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """mean_l Q[l, left_u] * Q[l, right_u], chunked over u."""
    N = Q.shape[0]
    out = np.empty(left.size, dtype=np.float64)
    size = max(1, _CHUNK_ELEMENTS // max(1, N))
    for start in range(0, left.size, size):
        part = slice(start, start + size)
        out[part] = (Q[:, left[part]] * Q[:, right[part]]).mean(axis=0)
    return out


def pair_functional_grad(bag: SnapshotBag, pairs: PairTable, Q: np.ndarray,
                         left: np.ndarray, right: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    N x L gradient of sum_u w_u mean_l Q[l, left_u] Q[l, right_u].

    With S[left_u, right_u] += w_u the functional is mean_l q_l^T S q_l, so its gradient
    through the basis values is R = Q (S + S^T), contracted with dQ/dtheta.
    """
    D = pairs.size
    S = sp.coo_matrix((weights, (left, right)), shape=(D, D)).tocsr()
    S = (S + S.T).tocsr()
    R = np.asarray((S @ Q.T).T)

    table = bag.site_tables()
    dtable = bag.site_derivative_tables()
    first = dtable[:, pairs.site1, pairs.axis1] * table[:, pairs.site2, pairs.axis2]
    second = table[:, pairs.site1, pairs.axis1] * dtable[:, pairs.site2, pairs.axis2]

    grad = np.zeros((bag.N, bag.L), dtype=np.float64)
    for j, (cols1, cols2) in enumerate(pairs.site_columns()):
        grad[:, j] = (R[:, cols1] * first[:, cols1]).sum(axis=1)
        grad[:, j] += (R[:, cols2] * second[:, cols2]).sum(axis=1)
    return grad / bag.N


@dataclass(frozen=True)
class ProductCache:
    """
    P_b P_a = i^phases[b, a] * strings[index[b, a]] for every basis pair, computed once.
    `strings` holds each distinct product once, with its split into two basis halves.
    """
    basis: list[PauliString]
    codes: np.ndarray
    phases: np.ndarray
    index: np.ndarray
    strings: np.ndarray
    left: np.ndarray
    right: np.ndarray
    pairs: PairTable

    @property
    def L(self) -> int:
        return self.codes.shape[1]

    @property
    def dim(self) -> int:
        return self.codes.shape[0]

    def product(self, b: int, a: int) -> tuple[int, PauliString]:
        return int(self.phases[b, a]), PauliString.from_codes(self.strings[self.index[b, a]])


def build_product_cache(basis: list[PauliString] | np.ndarray) -> ProductCache:
    if isinstance(basis, np.ndarray):
        codes = np.atleast_2d(basis).astype(np.uint8)
    else:
        codes = np.stack([P.codes for P in basis])
    D, L = codes.shape

    keys = string_keys(codes)
    product_keys = keys[:, None] ^ keys[None, :]
    unique, index = np.unique(product_keys, return_inverse=True)
    index = index.reshape(D, D).astype(np.int64)

    phases = np.empty((D, D), dtype=np.uint8)
    rows = max(1, _CHUNK_ELEMENTS // max(1, D * L))
    for start in range(0, D, rows):
        block = codes[start:start + rows]
        exponent = MUL_PHASE[block[:, None, :], codes[None, :, :]].sum(axis=2, dtype=np.int64)
        phases[start:start + rows] = exponent % 4

    strings = keys_to_codes(unique, L)
    left, right = split_halves(strings)
    logger.debug(f"[Cache] D={D}: {unique.size} distinct products")
    return ProductCache(
        basis=[PauliString.from_codes(row) for row in codes],
        codes=codes,
        phases=phases,
        index=index,
        strings=strings,
        left=left,
        right=right,
        pairs=PairTable.for_sites(L),
    )


@dataclass
class CorrelationMatrix:
    entries: np.ndarray
    basis: list[PauliString]
    product_cache: ProductCache

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def labels(self) -> list[str]:
        return [P.label for P in self.basis]


def entries_from_estimates(cache: ProductCache, estimates: np.ndarray) -> np.ndarray:
    """Place sign * estimate into the real or imaginary slot picked by each phase."""
    signed = np.where(cache.phases >= 2, -1.0, 1.0) * estimates[cache.index]
    is_real = cache.phases % 2 == 0
    entries = np.empty(cache.phases.shape, dtype=np.complex128)
    entries.real = np.where(is_real, signed, 0.0)
    entries.imag = np.where(is_real, 0.0, signed)
    return entries


def product_estimates(bag: SnapshotBag, cache: ProductCache, Q: np.ndarray | None = None) -> np.ndarray:
    if Q is None:
        Q = cache.pairs.values(bag.site_tables())
    return pair_estimates(Q, cache.left, cache.right)


def assemble(bag: SnapshotBag, cache: ProductCache) -> CorrelationMatrix:
    if bag.L != cache.L:
        raise DimensionError(f"Bag has L={bag.L}, cache was built for L={cache.L}")
    entries = entries_from_estimates(cache, product_estimates(bag, cache))
    return CorrelationMatrix(entries=entries, basis=cache.basis, product_cache=cache)


def barrier_weights(cache: ProductCache, W: np.ndarray) -> np.ndarray:
    """
    c_u with tr(W dM) = sum_u c_u dE_u for Hermitian W; E_u is the estimate of the
    distinct product u.
    """
    phase_values = np.array([1.0, 1.0j, -1.0, -1.0j])[cache.phases]
    contribution = (W.T * phase_values).real
    return np.bincount(cache.index.ravel(), weights=contribution.ravel(),
                       minlength=cache.strings.shape[0])


def assemble_derivative(bag: SnapshotBag, cache: ProductCache, j: int, l: int) -> sp.csr_matrix:
    """dM/dtheta[l, j] (1/N included); nonzero only where the product string acts on site j."""
    if bag.L != cache.L:
        raise DimensionError(f"Bag has L={bag.L}, cache was built for L={cache.L}")
    table = bag.site_tables()[l]
    dtable = bag.site_derivative_tables()[l]
    strings = cache.strings.astype(np.int64)
    factors = table[np.arange(bag.L), strings]
    factors[:, j] = dtable[j, strings[:, j]]
    derivative = factors.prod(axis=1) / bag.N

    rows, cols = np.nonzero(strings[cache.index, j] != 0)
    phase = np.array([1.0, 1.0j, -1.0, -1.0j])[cache.phases[rows, cols]]
    data = phase * derivative[cache.index[rows, cols]]
    return sp.csr_matrix((data, (rows, cols)), shape=(cache.dim, cache.dim), dtype=np.complex128)


def energy(bag: SnapshotBag, H: HamiltonianSpec) -> float:
    if not H.terms:
        return 0.0
    return float(H.coefficients @ estimate_many(bag, H.codes()))


def energy_grad(bag: SnapshotBag, H: HamiltonianSpec) -> np.ndarray:
    if not H.terms:
        return np.zeros((bag.N, bag.L), dtype=np.float64)
    return estimate_grad_many(bag, H.codes(), H.coefficients)


def export_csv(M: CorrelationMatrix, path: Path) -> None:
    """Header of basis labels, one row per basis string, entries as 're+imj'."""
    rows = [[f"{float(z.real)!r}{float(z.imag):+}j" for z in row] for row in M.entries]
    write_csv(path, M.labels, rows)
