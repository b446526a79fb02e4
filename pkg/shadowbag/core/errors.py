class ShadowBagError(Exception):
    """Base error; `exit_code` is what the CLI returns when it escapes."""
    exit_code = 1


# --- Validation (exit 2) ---

class ConfigError(ShadowBagError):
    """Rejected before any computation starts"""
    exit_code = 2


class DimensionError(ConfigError):
    """Pauli strings or arrays with mismatched lengths"""
    pass


class UnsupportedError(ConfigError):
    """Request outside the design envelope (k_M > 2, entangled states, weight > 4 terms)"""
    pass


class EnvelopeError(ConfigError):
    """System too large for the dense-vector oracle"""
    pass


class HermiticityError(ConfigError):
    pass


class ModelMismatchError(ConfigError):
    """Run directory and exact table describe different models or sizes"""
    pass


# --- Numerical (exit 3) ---

class NumericalError(ShadowBagError):
    exit_code = 3


class BarrierDomainError(NumericalError):
    """Some eigenvalue of M + eps*1 is not positive: the iterate is infeasible"""

    def __init__(self, lambda_min: float, eps: float):
        super().__init__(f"lambda_min={lambda_min:.6g} is not above -eps={-eps:.6g}")
        self.lambda_min = lambda_min
        self.eps = eps


class NonConvergenceError(NumericalError):
    pass


class StalledOptimizationError(NumericalError):
    """Backoff retries exhausted inside one epoch"""

    def __init__(self, message: str, history: list | None = None):
        super().__init__(message)
        self.history = history or []


class UndefinedFactorError(NumericalError):
    pass


class FitError(NumericalError):
    pass
