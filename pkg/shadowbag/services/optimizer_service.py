"""
Optimizer Service - barrier-constrained adaptive-moment descent over snapshot angles

Cost per epoch: g * H(theta) - mu(t) * tr log(M(theta) + eps). A pre-optimization phase
(barrier only, dynamic eps) lifts lambda_min(M) above the target floor; the main phase then
runs T epochs with time-dependent mu, beta1 and beta2. Infeasible steps are reverted and
retried with a smaller learning rate.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from shadowbag.common.logger import setup_logger
from shadowbag.core.errors import (
    NonConvergenceError,
    StalledOptimizationError,
    UndefinedFactorError,
)
from shadowbag.schemas.config import EigenFloor, ScheduleParams
from shadowbag.schemas.report import EpochRecord, OptimizeReport
from shadowbag.services.corrmat_service import (
    ProductCache,
    barrier_weights,
    entries_from_estimates,
    pair_estimates,
    pair_functional_grad,
    split_halves,
)
from shadowbag.services.pauli_service import HamiltonianSpec, basis_size, expand_square
from shadowbag.services.shadow_service import SnapshotBag, estimate_many
from shadowbag.services.spectral_service import HermitianMatrix, Spectrum, decompose

logger = setup_logger("Optimizer")


# --- Schedules and constants ---

def epsilon0(N: int, L: int, floor: EigenFloor) -> float:
    return (floor.b0 - floor.alpha0 * (L + 2)) / math.sqrt(N)


def barrier_shift(N: int, L: int, x_eps: float, floor: EigenFloor) -> float:
    return x_eps * abs(epsilon0(N, L, floor))


def mu_schedule(t: float, T: int, mu0: float) -> float:
    return 0.25 * mu0 * (1.0 + math.cos(math.pi * t / (4.0 * T / 3.0 + 1.0))) ** 2


def beta_schedules(t: float, T: int) -> tuple[float, float]:
    tau = t / (4.0 * T / 3.0)
    bend = (tau - 0.5) ** 2 / 2.0 - 0.125
    return 0.6 + bend * -2.8, 0.85 + bend * -1.192


def default_mu0(L: int) -> float:
    return 5e-2 / basis_size(L, 2)


def g_coefficient(H: HamiltonianSpec, L: int) -> float:
    """(L * sum_m |c_m|)^-1 with c_m the coefficients of one site's h_j."""
    total = float(np.abs(H.coefficients).sum()) if H.terms else 0.0
    if total == 0.0:
        raise UndefinedFactorError("g is undefined for a Hamiltonian with all-zero coefficients")
    per_site = total / H.L
    return 1.0 / (L * per_site)


# --- State ---

class OptimizerPhase(str, Enum):
    PREOPT = "preopt"
    MAIN = "main"
    DONE = "done"


@dataclass
class OptimizerState:
    t: int
    lr: float
    m: np.ndarray
    v: np.ndarray
    x_eps: float
    phase: OptimizerPhase = OptimizerPhase.PREOPT
    history: list[EpochRecord] = field(default_factory=list)
    preopt_steps: int = 0

    @classmethod
    def fresh(cls, N: int, L: int, lr: float, x_eps: float,
              phase: OptimizerPhase = OptimizerPhase.PREOPT) -> "OptimizerState":
        return cls(t=0, lr=lr, m=np.zeros((N, L)), v=np.zeros((N, L)), x_eps=x_eps, phase=phase)

    def reset_moments(self):
        self.m = np.zeros_like(self.m)
        self.v = np.zeros_like(self.v)


def adam_update(theta, grad, m, v, beta1: float, beta2: float, lr: float, step: int,
                adam_eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One bias-corrected adaptive-moment step; returns new (theta, m, v) without mutating."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    return theta - lr * m_hat / (np.sqrt(v_hat) + adam_eps), m, v


# --- Cost and gradient ---

@dataclass(frozen=True)
class Evaluation:
    """Everything one theta costs: basis values, M, its spectrum and the energy."""
    theta: np.ndarray
    Q: np.ndarray
    entries: np.ndarray
    spectrum: Spectrum
    energy: float

    @property
    def lambda_min(self) -> float:
        return self.spectrum.lambda_min


@dataclass(frozen=True)
class CostResult:
    cost: float
    grad: np.ndarray
    lambda_min: float
    energy: float
    energy_grad: np.ndarray
    barrier_grad: np.ndarray
    capped: bool = False

    def __iter__(self):
        return iter((self.cost, self.grad, self.lambda_min, self.energy))


class Evaluator:
    def __init__(self, bag: SnapshotBag, H: HamiltonianSpec, cache: ProductCache):
        self.bag = bag
        self.H = H
        self.cache = cache
        self.pairs = cache.pairs
        self.coefficients = H.coefficients
        self.h_left, self.h_right = split_halves(H.codes(bag.L))

    def evaluate(self, theta: np.ndarray) -> Evaluation:
        trial = self.bag.with_theta(theta)
        Q = self.pairs.values(trial.site_tables())
        entries = entries_from_estimates(self.cache, pair_estimates(Q, self.cache.left, self.cache.right))
        energy = float(self.coefficients @ pair_estimates(Q, self.h_left, self.h_right))
        return Evaluation(theta=trial.theta, Q=Q, entries=entries,
                          spectrum=decompose(HermitianMatrix(entries)), energy=energy)

    def cost(self, ev: Evaluation, g: float, mu: float, eps: float) -> float:
        barrier = ev.spectrum.trace_log_shifted(eps) if mu != 0.0 else 0.0
        return g * ev.energy - mu * barrier

    def gradients(self, ev: Evaluation, g: float, mu: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """(g dH/dtheta, -mu tr[(M + eps)^-1 dM/dtheta]) as N x L matrices."""
        trial = self.bag.with_theta(ev.theta)
        zeros = np.zeros((self.bag.N, self.bag.L))
        energy_grad = zeros
        if g != 0.0 and self.coefficients.size:
            energy_grad = g * pair_functional_grad(
                trial, self.pairs, ev.Q, self.h_left, self.h_right, self.coefficients
            )
        barrier_grad = zeros
        if mu != 0.0:
            W = ev.spectrum.inverse_shifted(eps)
            weights = barrier_weights(self.cache, W)
            barrier_grad = -mu * pair_functional_grad(
                trial, self.pairs, ev.Q, self.cache.left, self.cache.right, weights
            )
        return energy_grad, barrier_grad


def cap_barrier_grad(energy_grad: np.ndarray, barrier_grad: np.ndarray,
                     cap: float | None) -> tuple[np.ndarray, bool]:
    """Shrink the barrier gradient so its mean |.| is at most cap times the energy one."""
    if cap is None:
        return barrier_grad, False
    energy_scale = float(np.abs(energy_grad).mean())
    barrier_scale = float(np.abs(barrier_grad).mean())
    if energy_scale == 0.0 or barrier_scale <= cap * energy_scale:
        return barrier_grad, False
    return barrier_grad * (cap * energy_scale / barrier_scale), True


def cost_and_grad(bag: SnapshotBag, H: HamiltonianSpec, cache: ProductCache, g: float, mu: float,
                  eps: float, grad_ratio_cap: float | None = None,
                  evaluator: Evaluator | None = None, evaluation: Evaluation | None = None) -> CostResult:
    evaluator = evaluator or Evaluator(bag, H, cache)
    ev = evaluation or evaluator.evaluate(bag.theta)
    ev.spectrum.check_domain(eps)
    cost = evaluator.cost(ev, g, mu, eps)
    energy_grad, barrier_grad = evaluator.gradients(ev, g, mu, eps)
    barrier_grad, capped = cap_barrier_grad(energy_grad, barrier_grad, grad_ratio_cap)
    return CostResult(
        cost=cost,
        grad=energy_grad + barrier_grad,
        lambda_min=ev.lambda_min,
        energy=ev.energy,
        energy_grad=energy_grad,
        barrier_grad=barrier_grad,
        capped=capped,
    )


# --- Amplitude correction ---

def amplitude_factor_from(expectation: Callable[[np.ndarray], np.ndarray], H: HamiltonianSpec) -> float:
    """f = <H^2> / <H>^2 for any source of Pauli expectations (estimates or exact values)."""
    H2 = expand_square(H)
    mean = float(H.coefficients @ expectation(H.codes()))
    if mean == 0.0:
        raise UndefinedFactorError("Energy estimate is zero; f = <H^2>/<H>^2 is undefined")
    square = float(H2.coefficients @ expectation(H2.codes(H.L)))
    return square / mean ** 2


def amplitude_factor(bag: SnapshotBag, H: HamiltonianSpec) -> float:
    return amplitude_factor_from(lambda codes: estimate_many(bag, codes), H)


def rescale(values: np.ndarray, codes: np.ndarray, f: float) -> np.ndarray:
    """Multiply every non-identity expectation by f."""
    weights = (np.atleast_2d(codes) > 0).sum(axis=1)
    return np.where(weights == 0, values, f * np.asarray(values))


# --- Driver ---

class OptimizerRun:
    """
    Stepwise two-phase driver; `step()` advances one accepted epoch (or pre-optimization
    step). The state machine calls it so runs can checkpoint between steps.
    """

    def __init__(self, bag: SnapshotBag, H: HamiltonianSpec, cache: ProductCache,
                 params: ScheduleParams, floor: EigenFloor, state: OptimizerState | None = None,
                 callback: Callable[[EpochRecord], None] | None = None):
        self.bag = bag
        self.H = H
        self.params = params
        self.callback = callback
        N, L = bag.N, bag.L

        self.eps0 = epsilon0(N, L, floor)
        self.eps = barrier_shift(N, L, params.x_eps_target, floor)
        self.mu0 = params.mu0 if params.mu0 is not None else default_mu0(L)
        if params.g is not None:
            self.g = params.g
        else:
            self.g = g_coefficient(H, L) if H.terms else 0.0

        self.evaluator = Evaluator(bag, H, cache)
        self.state = state or OptimizerState.fresh(N, L, params.lr0, params.x_eps_target)
        self.current = self.evaluator.evaluate(bag.theta)

    @property
    def target_lambda(self) -> float:
        return -self.params.x_eps_target * abs(self.eps0)

    @property
    def done(self) -> bool:
        return self.state.phase == OptimizerPhase.DONE

    def step(self) -> EpochRecord | None:
        if self.state.phase == OptimizerPhase.PREOPT:
            if self.current.lambda_min > self.target_lambda:
                self.begin_main()
                return None
            return self._preopt_step()
        if self.state.phase == OptimizerPhase.MAIN:
            return self._main_step()
        return None

    def begin_main(self):
        """Phase boundary: fresh moments, lr back to lr0, fixed eps."""
        logger.info(
            f"[Preopt] Done after {self.state.t} steps: lambda_min={self.current.lambda_min:.5f} "
            f"> {self.target_lambda:.5f}"
        )
        self.state.preopt_steps = self.state.t
        self.state.phase = OptimizerPhase.MAIN if self.params.T > 0 else OptimizerPhase.DONE
        self.state.t = 0
        self.state.lr = self.params.lr0
        self.state.x_eps = self.params.x_eps_target
        self.state.reset_moments()

    def _descend(self, grad: np.ndarray, beta1: float, beta2: float, eps: float) -> tuple[Evaluation, int]:
        """Step from the current iterate; revert and shrink lr until the result is feasible."""
        state = self.state
        retries = 0
        while True:
            theta, m, v = adam_update(
                self.current.theta, grad, state.m, state.v, beta1, beta2,
                state.lr, state.t + 1, self.params.adam_eps,
            )
            candidate = self.evaluator.evaluate(theta)
            if candidate.spectrum.is_feasible(eps):
                state.m, state.v = m, v
                self.bag.theta = candidate.theta
                return candidate, retries

            retries += 1
            state.lr *= self.params.backoff_factor
            logger.info(
                f"[Backoff] lambda_min={candidate.lambda_min:.5f} <= {-eps:.5f}, "
                f"lr -> {state.lr:.3g} (retry {retries})"
            )
            if retries >= self.params.max_retries:
                raise StalledOptimizationError(
                    f"{retries} backoff retries in {state.phase.value} epoch {state.t}",
                    history=list(state.history),
                )

    def _preopt_step(self) -> EpochRecord:
        state, params = self.state, self.params
        if state.t >= params.preopt_max_steps:
            raise NonConvergenceError(
                f"Pre-optimization did not lift lambda_min above {self.target_lambda:.5f} "
                f"in {params.preopt_max_steps} steps (at {self.current.lambda_min:.5f})"
            )
        # lambda_min + eps stays at preopt_gap
        eps = params.preopt_gap - self.current.lambda_min
        state.x_eps = eps / abs(self.eps0) if self.eps0 != 0.0 else math.inf
        if state.t == 0 and state.x_eps > 1.0:
            logger.warning(f"[Preopt] Starting shift x_eps={state.x_eps:.3g} is beyond the predicted floor |eps0|")

        _, barrier_grad = self.evaluator.gradients(self.current, 0.0, self.mu0, eps)
        self.current, retries = self._descend(
            barrier_grad, params.preopt_beta1, params.preopt_beta2, eps
        )
        record = self._record(OptimizerPhase.PREOPT, 0.0, self.mu0, eps,
                              params.preopt_beta1, params.preopt_beta2, retries)
        state.t += 1
        if self.current.lambda_min > self.target_lambda:
            self.begin_main()
        return record

    def _main_step(self) -> EpochRecord:
        state, params = self.state, self.params
        t, T = state.t, params.T
        beta1, beta2 = beta_schedules(t, T)
        mu = mu_schedule(t, T, self.mu0)

        energy_grad, barrier_grad = self.evaluator.gradients(self.current, self.g, mu, self.eps)
        barrier_grad, capped = cap_barrier_grad(energy_grad, barrier_grad, params.grad_ratio_cap)
        if capped:
            logger.debug(f"[Main] epoch {t}: barrier gradient capped at {params.grad_ratio_cap}x")

        self.current, retries = self._descend(energy_grad + barrier_grad, beta1, beta2, self.eps)
        record = self._record(OptimizerPhase.MAIN, self.g, mu, self.eps, beta1, beta2, retries)
        state.t += 1
        if state.t >= T:
            state.phase = OptimizerPhase.DONE
        return record

    def _record(self, phase: OptimizerPhase, g: float, mu: float, eps: float,
                beta1: float, beta2: float, retries: int) -> EpochRecord:
        ev = self.current
        record = EpochRecord(
            phase=phase.value,
            epoch=self.state.t,
            cost=self.evaluator.cost(ev, g, mu, eps),
            energy=ev.energy,
            energy_density=ev.energy / self.bag.L,
            lambda_min=ev.lambda_min,
            lr=self.state.lr,
            mu=mu,
            beta1=beta1,
            beta2=beta2,
            x_eps=self.state.x_eps,
            retries=retries,
        )
        self.state.history.append(record)
        logger.debug(
            f"[{phase.value.capitalize()}] epoch {record.epoch}: E/L={record.energy_density:.5f} "
            f"lambda_min={record.lambda_min:.5f} cost={record.cost:.5g}"
        )
        if self.callback:
            self.callback(record)
        return record

    def run(self, until: OptimizerPhase = OptimizerPhase.DONE) -> OptimizerState:
        while self.state.phase != until and not self.done:
            self.step()
        return self.state

    def report(self, f: float | None = None) -> OptimizeReport:
        return OptimizeReport(
            eps0=self.eps0,
            eps=self.eps,
            mu0=self.mu0,
            g=self.g,
            preopt_steps=self.state.preopt_steps,
            epochs=sum(1 for r in self.state.history if r.phase == OptimizerPhase.MAIN.value),
            final_energy=self.current.energy,
            final_energy_density=self.current.energy / self.bag.L,
            final_lambda_min=self.current.lambda_min,
            f=f,
        )


def preoptimize(bag: SnapshotBag, cache: ProductCache, params: ScheduleParams, floor: EigenFloor,
                H: HamiltonianSpec | None = None,
                callback: Callable[[EpochRecord], None] | None = None) -> OptimizerState:
    """Barrier-only descent until lambda_min(M) clears -x_eps_target |eps0|."""
    H = H or HamiltonianSpec(terms=())
    return OptimizerRun(bag, H, cache, params, floor, callback=callback).run(until=OptimizerPhase.MAIN)


def optimize(bag: SnapshotBag, H: HamiltonianSpec, cache: ProductCache, params: ScheduleParams,
             floor: EigenFloor, state: OptimizerState | None = None,
             callback: Callable[[EpochRecord], None] | None = None
             ) -> tuple[SnapshotBag, OptimizerState, OptimizeReport]:
    """Full run; a state still in pre-optimization (or none) is pre-optimized first."""
    runner = OptimizerRun(bag, H, cache, params, floor, state=state, callback=callback)
    runner.run()
    try:
        f = amplitude_factor(bag, H)
    except UndefinedFactorError:
        logger.warning("[Main] Final energy estimate is zero; amplitude factor left undefined")
        f = None
    logger.info(
        f"[Main] Finished {params.T} epochs: E/L={runner.current.energy / bag.L:.5f}, "
        f"lambda_min={runner.current.lambda_min:.5f}"
    )
    return bag, runner.state, runner.report(f)
