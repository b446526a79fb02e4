"""
Parameterized classical-shadow snapshots.

Snapshot l measures every site j along a fixed Haar-random axis and records a smooth
outcome angle theta[l, j]; theta = 0 and theta = pi are the two computational outcomes.
Inverting the local measurement channel gives the per-site estimate
(1/2)(1 + 3 n . sigma), so the expectation of a Pauli string in snapshot l is
3^w(P) times the product of n components over the support of P.
"""

from dataclasses import dataclass

import numpy as np

from shadowbag.core.errors import DimensionError, UnsupportedError
from shadowbag.core.rng import stream
from shadowbag.services.pauli_service import PauliAxis, PauliString

# Gather chunks are sized so one (N, chunk, w) block stays around this many floats.
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class HaarAngles:
    phi: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray


@dataclass(frozen=True)
class RotationCoeffs:
    """Rows u_{Y,a} and u_{Z,a} (a = X, Y, Z) of the conjugation U sigma^a U^dagger."""
    u_y: np.ndarray
    u_z: np.ndarray


def haar_angles(seed: int, N: int, L: int) -> HaarAngles:
    if N < 1 or L < 2:
        raise DimensionError(f"Need N >= 1 and L >= 2, got N={N}, L={L}")
    gamma = stream(seed, "haar").uniform(-1.0, 1.0, size=(N, L, 3))
    return HaarAngles(
        phi=np.pi * gamma[..., 0],
        omega=np.pi * gamma[..., 1],
        alpha=np.arccos(gamma[..., 2]),
    )


def rotation_coeffs(phi, omega, alpha) -> RotationCoeffs:
    phi, omega, alpha = np.asarray(phi), np.asarray(omega), np.asarray(alpha)
    cp, sp = np.cos(phi), np.sin(phi)
    co, so = np.cos(omega), np.sin(omega)
    ca, sa = np.cos(alpha), np.sin(alpha)
    u_y = np.stack([co * sp + ca * cp * so, cp * co - ca * sp * so, sa * so], axis=-1)
    u_z = np.stack([-cp * sa, sa * sp, ca], axis=-1)
    return RotationCoeffs(u_y=u_y, u_z=u_z)


def sample_haar(seed: int, N: int, L: int) -> RotationCoeffs:
    angles = haar_angles(seed, N, L)
    return rotation_coeffs(angles.phi, angles.omega, angles.alpha)


def bloch_vector(coeffs: RotationCoeffs, theta) -> np.ndarray:
    theta = np.asarray(theta)[..., None]
    return -np.sin(theta) * coeffs.u_y + np.cos(theta) * coeffs.u_z


def bloch_derivative(coeffs: RotationCoeffs, theta) -> np.ndarray:
    theta = np.asarray(theta)[..., None]
    return -(np.cos(theta) * coeffs.u_y + np.sin(theta) * coeffs.u_z)


class SnapshotBag:
    """
    N snapshots over L sites. `coeffs` are a pure function of (seed, N, L) and never
    change; `theta` (N x L, snapshot-major) is the only optimized state.
    """

    def __init__(self, seed: int, N: int, L: int, theta: np.ndarray | None = None,
                 coeffs: RotationCoeffs | None = None):
        self.seed = int(seed)
        self.N = int(N)
        self.L = int(L)
        self.coeffs = coeffs if coeffs is not None else sample_haar(seed, N, L)
        if theta is None:
            theta = np.zeros((N, L), dtype=np.float64)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (N, L):
            raise DimensionError(f"theta has shape {theta.shape}, expected {(N, L)}")
        self.theta = theta

    @classmethod
    def create(cls, seed: int, N: int, L: int) -> "SnapshotBag":
        return cls(seed, N, L)

    def with_theta(self, theta: np.ndarray) -> "SnapshotBag":
        """Same snapshots (shared coefficients), different angles."""
        return SnapshotBag(self.seed, self.N, self.L, theta=theta, coeffs=self.coeffs)

    def bloch_vectors(self) -> np.ndarray:
        return bloch_vector(self.coeffs, self.theta)

    def site_tables(self) -> np.ndarray:
        """(N, L, 4): per-site factor for axes I, X, Y, Z; the 3 of the inverse channel folded in."""
        table = np.empty((self.N, self.L, 4), dtype=np.float64)
        table[..., 0] = 1.0
        table[..., 1:] = 3.0 * self.bloch_vectors()
        return table

    def site_derivative_tables(self) -> np.ndarray:
        table = np.empty((self.N, self.L, 4), dtype=np.float64)
        table[..., 0] = 0.0
        table[..., 1:] = 3.0 * bloch_derivative(self.coeffs, self.theta)
        return table


def _check_length(bag: SnapshotBag, P: PauliString):
    if len(P) != bag.L:
        raise DimensionError(f"String of length {len(P)} on a bag of L={bag.L}")


def snapshot_expectation(bag: SnapshotBag, l: int, P: PauliString) -> float:
    _check_length(bag, P)
    support = P.support
    if not support:
        return 1.0
    n = bloch_vector(
        RotationCoeffs(bag.coeffs.u_y[l], bag.coeffs.u_z[l]), bag.theta[l]
    )
    value = 3.0 ** len(support)
    for j in support:
        value *= n[j, P.axes[j] - 1]
    return float(value)


def snapshot_expectation_grad(bag: SnapshotBag, l: int, j: int, P: PauliString) -> float:
    _check_length(bag, P)
    if P.axes[j] == PauliAxis.I:
        return 0.0
    coeffs = RotationCoeffs(bag.coeffs.u_y[l], bag.coeffs.u_z[l])
    n = bloch_vector(coeffs, bag.theta[l])
    dn = bloch_derivative(coeffs, bag.theta[l])
    value = 3.0 ** P.weight
    for site in P.support:
        factor = dn if site == j else n
        value *= factor[site, P.axes[site] - 1]
    return float(value)


def _sparse_support(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K, w) site and axis arrays, padded with (site 0, I) which contributes factor 1."""
    codes = np.atleast_2d(codes)
    width = max(int((codes > 0).sum(axis=1).max(initial=0)), 1)
    K = codes.shape[0]
    sites = np.zeros((K, width), dtype=np.int64)
    axes = np.zeros((K, width), dtype=np.int64)
    for k in range(K):
        support = np.flatnonzero(codes[k])
        sites[k, :support.size] = support
        axes[k, :support.size] = codes[k, support]
    return sites, axes


def _chunks(K: int, N: int, width: int):
    size = max(1, _CHUNK_ELEMENTS // max(1, N * width))
    for start in range(0, K, size):
        yield slice(start, min(K, start + size))


def estimate_many(bag: SnapshotBag, codes: np.ndarray) -> np.ndarray:
    """Shadow estimates of K strings given as a (K, L) code array."""
    codes = np.atleast_2d(codes)
    if codes.shape[1] != bag.L:
        raise DimensionError(f"Strings of length {codes.shape[1]} on a bag of L={bag.L}")
    sites, axes = _sparse_support(codes)
    table = bag.site_tables()
    out = np.empty(codes.shape[0], dtype=np.float64)
    for part in _chunks(codes.shape[0], bag.N, sites.shape[1]):
        values = table[:, sites[part], axes[part]].prod(axis=2)
        out[part] = values.mean(axis=0)
    return out


def estimate(bag: SnapshotBag, P: PauliString) -> float:
    _check_length(bag, P)
    if P.weight == 0:
        return 1.0
    return float(estimate_many(bag, P.codes[None, :])[0])


def estimate_grad_many(bag: SnapshotBag, codes: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    """d/dtheta of sum_k c_k estimate(P_k), as an N x L matrix (1/N included)."""
    codes = np.atleast_2d(codes)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    grad = np.zeros((bag.N, bag.L), dtype=np.float64)
    if codes.shape[0] == 0:
        return grad
    sites, axes = _sparse_support(codes)
    table = bag.site_tables()
    dtable = bag.site_derivative_tables()
    width = sites.shape[1]
    for part in _chunks(codes.shape[0], bag.N, width):
        values = table[:, sites[part], axes[part]]
        dvalues = dtable[:, sites[part], axes[part]]
        for slot in range(width):
            others = np.delete(values, slot, axis=2).prod(axis=2)
            contribution = others * dvalues[:, :, slot] * coefficients[part]
            slot_sites = sites[part, slot]
            for j in np.unique(slot_sites):
                grad[:, j] += contribution[:, slot_sites == j].sum(axis=1)
    return grad / bag.N


# --- Simulated tomography on product states ---

_LABEL_BLOCH = {
    "0": (0.0, 0.0, 1.0),
    "1": (0.0, 0.0, -1.0),
    "+": (1.0, 0.0, 0.0),
    "-": (-1.0, 0.0, 0.0),
    "r": (0.0, 1.0, 0.0),
    "l": (0.0, -1.0, 0.0),
}


@dataclass(frozen=True)
class ProductState:
    """Per-site Bloch vectors r_j (L x 3); |r_j| <= 1."""
    bloch: np.ndarray

    @classmethod
    def all_zero(cls, L: int) -> "ProductState":
        return cls.from_label("0" * L)

    @classmethod
    def from_label(cls, label: str) -> "ProductState":
        try:
            return cls(np.array([_LABEL_BLOCH[ch] for ch in label], dtype=np.float64))
        except KeyError as e:
            raise UnsupportedError(f"Unknown single-site state {e} in '{label}'") from None

    @property
    def L(self) -> int:
        return self.bloch.shape[0]


def born_sample(state: ProductState, seed: int, N: int, L: int) -> SnapshotBag:
    """Simulate the randomized-measurement experiment: theta = 0 or pi per Born outcome."""
    if not isinstance(state, ProductState):
        raise UnsupportedError("Born sampling is implemented for product states only")
    if state.L != L:
        raise DimensionError(f"State has {state.L} sites, expected {L}")
    if np.any(np.linalg.norm(state.bloch, axis=1) > 1.0 + 1e-12):
        raise UnsupportedError("Bloch vectors longer than 1 do not describe a state")

    bag = SnapshotBag.create(seed, N, L)
    # p(b = 0) = |<0|U|psi>|^2 = (1 + r . u_Z) / 2
    p_zero = 0.5 * (1.0 + np.einsum("lja,ja->lj", bag.coeffs.u_z, state.bloch))
    draws = stream(seed, "born").random((N, L))
    bag.theta = np.where(draws < p_zero, 0.0, np.pi)
    return bag
