"""
Oracle Service - exact ground states, exact correlators and error metrics

Pauli strings act on computational basis states without building matrices: site j is bit
L-1-j of the state index (site 0 most significant, like the kron order of `to_dense`), and
P|x> = i^nY (-1)^popcount(x & zy_mask) |x ^ flip_mask>.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from shadowbag.common.logger import setup_logger
from shadowbag.core.errors import DimensionError, EnvelopeError, FitError, NonConvergenceError
from shadowbag.core.rng import stream
from shadowbag.schemas.config import EigenFloor
from shadowbag.schemas.report import ErrorReport, FloorFit, FloorSample, OperatorRow
from shadowbag.services.corrmat_service import assemble, build_product_cache
from shadowbag.services.optimizer_service import rescale
from shadowbag.services.pauli_service import (
    HamiltonianSpec,
    PauliAxis,
    PauliString,
    enumerate_basis,
    enumerate_contiguous,
)
from shadowbag.services.shadow_service import ProductState, SnapshotBag, born_sample, estimate_many
from shadowbag.services.spectral_service import lambda_min

logger = setup_logger("Oracle")

MAX_SITES = 14
DENSE_SITES = 6
RESIDUAL_TOL = 1e-8
DEGENERACY_GAP = 1e-6


@dataclass(frozen=True)
class PauliAction:
    flip: int
    zy_mask: int
    phase: complex

    @classmethod
    def of(cls, P: PauliString) -> "PauliAction":
        L = len(P)
        flip = zy_mask = 0
        n_y = 0
        for j, axis in enumerate(P.axes):
            bit = 1 << (L - 1 - j)
            if axis in (PauliAxis.X, PauliAxis.Y):
                flip |= bit
            if axis in (PauliAxis.Y, PauliAxis.Z):
                zy_mask |= bit
            n_y += axis == PauliAxis.Y
        return cls(flip=flip, zy_mask=zy_mask, phase=1j ** (n_y % 4))

    def coefficients(self, indices: np.ndarray) -> np.ndarray:
        """P|x> = coefficients[x] |x ^ flip>."""
        parity = np.zeros(indices.size, dtype=np.int64)
        mask = self.zy_mask
        bit = 0
        while mask:
            if mask & 1:
                parity ^= (indices >> bit) & 1
            mask >>= 1
            bit += 1
        return self.phase * (1 - 2 * parity)

    def apply(self, v: np.ndarray, indices: np.ndarray) -> np.ndarray:
        source = indices ^ self.flip
        return self.coefficients(source) * v[source]


class HamiltonianOperator:
    """Matrix-free H; terms sharing a flip mask are folded into one diagonal."""

    def __init__(self, H: HamiltonianSpec, L: int):
        self.L = L
        self.dim = 1 << L
        self.indices = np.arange(self.dim, dtype=np.int64)
        groups: dict[int, np.ndarray] = {}
        for c, P in H.terms:
            action = PauliAction.of(P)
            groups[action.flip] = groups.get(action.flip, 0) + c * action.coefficients(self.indices)
        self.groups = [(flip, diag) for flip, diag in sorted(groups.items())]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).reshape(-1)
        out = np.zeros(self.dim, dtype=np.complex128)
        for flip, diag in self.groups:
            source = self.indices ^ flip
            out += diag[source] * v[source]
        return out

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=np.complex128)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for flip, diag in self.groups:
            source = self.indices ^ flip
            out[self.indices, source] += diag[source]
        return out


@dataclass(frozen=True)
class GroundState:
    L: int
    energy: float
    vector: np.ndarray
    gap: float
    degenerate: bool

    @property
    def energy_density(self) -> float:
        return self.energy / self.L


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Normalize and rotate the global phase so the largest amplitude is real positive."""
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def ground_state(H: HamiltonianSpec, L: int, seed: int = 0) -> GroundState:
    if L > MAX_SITES:
        raise EnvelopeError(f"L={L} exceeds the dense-vector oracle envelope (L <= {MAX_SITES})")
    if H.terms and H.L != L:
        raise DimensionError(f"Hamiltonian acts on {H.L} sites, asked for L={L}")

    op = HamiltonianOperator(H, L)
    if L <= DENSE_SITES:
        w, V = scipy.linalg.eigh(op.dense())
        energies, vectors = w[:2], V[:, :2]
    else:
        v0 = stream(seed, "lanczos").standard_normal(op.dim).astype(np.complex128)
        try:
            energies, vectors = spla.eigsh(op.as_linear_operator(), k=2, which="SA", v0=v0,
                                           tol=1e-12, maxiter=20 * op.dim)
        except spla.ArpackNoConvergence as e:
            raise NonConvergenceError(f"Lanczos did not converge for L={L}: {e}") from None
        order = np.argsort(energies)
        energies, vectors = energies[order], vectors[:, order]

    energy = float(energies[0])
    vector = _fix_phase(vectors[:, 0])
    residual = float(np.linalg.norm(op.matvec(vector) - energy * vector))
    if residual > RESIDUAL_TOL * max(1.0, abs(energy)):
        raise NonConvergenceError(f"Ground state residual {residual:.3g} above {RESIDUAL_TOL}")

    gap = float(energies[1] - energies[0])
    degenerate = gap < DEGENERACY_GAP
    if degenerate:
        logger.warning(f"[Oracle] Ground space of '{H.name}' at L={L} is degenerate (gap={gap:.2e})")
    logger.debug(f"[Oracle] L={L} E0={energy:.10f} gap={gap:.3e} residual={residual:.1e}")
    return GroundState(L=L, energy=energy, vector=vector, gap=gap, degenerate=degenerate)


def exact_expectation(gs: GroundState, P: PauliString) -> float:
    if len(P) != gs.L:
        raise DimensionError(f"String of length {len(P)} on a ground state of L={gs.L}")
    indices = np.arange(gs.vector.size, dtype=np.int64)
    value = np.vdot(gs.vector, PauliAction.of(P).apply(gs.vector, indices))
    if abs(value.imag) > 1e-10:
        raise NonConvergenceError(f"<{P.label}> has imaginary part {value.imag:.3g}")
    return float(value.real)


def exact_table(gs: GroundState, strings: list[PauliString]) -> dict[str, float]:
    return {P.label: exact_expectation(gs, P) for P in strings}


def transverse_ising_energy(L: int, J: float, h: float) -> float:
    """
    Ground energy of -J sum Z_j Z_j+1 - h sum X_j on a periodic chain (even L) from the
    free-fermion solution in the even-parity sector, k = pi (2n + 1) / L.
    """
    k = np.pi * (2 * np.arange(L) + 1) / L
    return float(-np.sqrt(J ** 2 + h ** 2 - 2.0 * J * abs(h) * np.cos(k)).sum())


# --- Error metrics ---

def contiguous_upto(L: int, k: int) -> list[PauliString]:
    """Contiguous strings spanning windows of 1..k sites."""
    found: dict[str, PauliString] = {}
    for span in range(1, k + 1):
        for P in enumerate_contiguous(L, span):
            found.setdefault(P.label, P)
    return list(found.values())


def report_strings(H: HamiltonianSpec, L: int, weights: list[int]) -> list[PauliString]:
    """Weight-<=2 basis, contiguous strings up to the largest reported span, Hamiltonian terms."""
    found: dict[str, PauliString] = {}
    for P in enumerate_basis(L, 2):
        found.setdefault(P.label, P)
    for P in contiguous_upto(L, max(weights, default=0)):
        found.setdefault(P.label, P)
    for P in H.strings:
        found.setdefault(P.label, P)
    return list(found.values())


def rms_error(errors) -> float:
    errors = np.asarray(errors, dtype=np.float64)
    return float(np.sqrt(np.mean(errors ** 2)))


def build_error_report(estimated: dict[str, float], exact: dict[str, float], H: HamiltonianSpec,
                       L: int, f: float, weights: list[int], exact_energy: float) -> ErrorReport:
    """
    Errors of raw shadow estimates (rescaled by f) against exact values, keyed by label.

    `rms_error_by_weight[k]` runs over every contiguous string spanning at most k sites;
    `rms_error_by_span[k]` only over those spanning exactly k.
    """
    estimated_energy = sum(c * estimated[P.label] for c, P in H.terms)

    def deltas(strings: list[PauliString]) -> list[float]:
        return [f * estimated[P.label] - exact[P.label] for P in strings]

    rms = {k: rms_error(deltas(contiguous_upto(L, k))) for k in weights}
    rms_span = {k: rms_error(deltas(enumerate_contiguous(L, k))) for k in weights}

    strings = report_strings(H, L, weights)
    raw = np.array([estimated[P.label] for P in strings])
    rescaled = rescale(raw, np.stack([P.codes for P in strings]), f)
    rows = [
        OperatorRow(string=P.label, weight=P.weight, exact=exact[P.label], estimated=float(x), rescaled=float(y))
        for P, x, y in zip(strings, raw, rescaled)
    ]
    return ErrorReport(
        energy_density_error=abs(f * estimated_energy - exact_energy) / L,
        energy_density_error_raw=abs(estimated_energy - exact_energy) / L,
        rms_error_by_weight=rms,
        rms_error_by_span=rms_span,
        operators=rows,
        f=f,
    )


def error_report(bag: SnapshotBag, gs: GroundState, H: HamiltonianSpec, f: float,
                 weights: list[int] = (2, 5)) -> ErrorReport:
    if bag.L != gs.L:
        raise DimensionError(f"Bag has L={bag.L}, ground state has L={gs.L}")
    weights = list(weights)
    strings = report_strings(H, gs.L, weights)
    values = estimate_many(bag, np.stack([P.codes for P in strings]))
    estimated = {P.label: float(x) for P, x in zip(strings, values)}
    return build_error_report(estimated, exact_table(gs, strings), H, gs.L, f, weights, gs.energy)


# --- Eigenvalue floor ---

def fit_eigen_floor(samples: list[FloorSample]) -> FloorFit:
    """Least squares for lambda_min * sqrt(N) = b0 - alpha0 * L."""
    L = np.array([s.L for s in samples], dtype=np.float64)
    N = np.array([s.N for s in samples], dtype=np.float64)
    if np.unique(L).size < 2 or np.unique(N).size < 2:
        raise FitError("The eigenvalue-floor fit needs at least two distinct L and two distinct N")

    y = np.array([s.lambda_min for s in samples]) * np.sqrt(N)
    design = np.column_stack([np.ones_like(L), -L])
    (b0, alpha0), *_ = np.linalg.lstsq(design, y, rcond=None)
    if alpha0 < 0 or b0 < 0:
        raise FitError(f"Fit gave negative parameters (alpha0={alpha0:.3g}, b0={b0:.3g})")

    residuals = y - design @ np.array([b0, alpha0])
    dof = max(len(samples) - 2, 1)
    residual_std = float(np.sqrt((residuals ** 2).sum() / dof))
    logger.info(f"[Floor] alpha0={alpha0:.2f} b0={b0:.2f} residual std={residual_std:.2f}")
    return FloorFit(floor=EigenFloor(alpha0=float(alpha0), b0=float(b0)),
                    residual_std=residual_std, samples=list(samples))


def sample_eigen_floor(L: int, N: int, seed: int, state: ProductState | None = None) -> FloorSample:
    """lambda_min of M assembled from a Born-sampled product state (all |0> by default)."""
    state = state or ProductState.all_zero(L)
    bag = born_sample(state, seed, N, L)
    M = assemble(bag, build_product_cache(enumerate_basis(L, 2)))
    return FloorSample(N=N, L=L, lambda_min=lambda_min(M.entries))


# --- Shadow-tomography reference scale ---

def shadow_budget(k: int, M: int, eps: float) -> int:
    """Snapshots needed to predict M weight-k Paulis to accuracy eps: 3^k ln M / eps^2."""
    return math.ceil(3 ** k * math.log(M) / eps ** 2)


def shadow_error_scale(k: int, M: int, N: int) -> float:
    return math.sqrt(3 ** k * math.log(M) / N)


def expectation_from_state(gs: GroundState) -> Callable[[np.ndarray], np.ndarray]:
    """Exact expectations for a (K, L) code array, the shape the amplitude factor consumes."""
    def expect(codes: np.ndarray) -> np.ndarray:
        return np.array([exact_expectation(gs, PauliString.from_codes(row)) for row in np.atleast_2d(codes)])
    return expect
