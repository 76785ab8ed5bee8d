"""Exception and warning types shared across the package."""


class KGDecayError(Exception):
    """Base class for all package errors."""


class InvalidArgument(KGDecayError, ValueError):
    pass


class SpectralAssumptionViolated(KGDecayError):
    """The discretized operator does not have exactly one bound state."""

    def __init__(self, n_discrete, eigenvalues):
        self.n_discrete = int(n_discrete)
        self.eigenvalues = list(map(float, eigenvalues))
        super().__init__(
            f"expected exactly one eigenvalue below the threshold, found {self.n_discrete}: "
            f"{self.eigenvalues}"
        )


class FrequencyWindowError(KGDecayError):
    """m lies outside ((2N-1) omega, (2N+1) omega)."""


class BorderlineResonance(FrequencyWindowError):
    """m = (2N+1) omega up to tolerance; excluded from the theory."""


class WeakResonance(KGDecayError):
    """3 omega <= m: the N = 1 golden-rule coefficient is undefined."""


class SmallDivisor(KGDecayError):
    def __init__(self, mu, nu, divisor):
        self.mu, self.nu, self.divisor = mu, nu, divisor
        super().__init__(f"near-resonant divisor {divisor:.3e} for monomial xi^{mu} xibar^{nu}")


class TruncationOverflow(KGDecayError):
    pass


class DomainExit(KGDecayError):
    pass


class BlowupDetected(KGDecayError):
    def __init__(self, t, sup):
        self.t, self.sup = t, sup
        super().__init__(f"sup|w| = {sup:.3e} exceeded the blow-up guard at t = {t:.4g}")


class HypothesisViolated(KGDecayError):
    pass


class PhaseAmbiguous(KGDecayError):
    pass


class EmptyWindow(KGDecayError, ValueError):
    pass


class IllConditionedLimit(UserWarning):
    pass


class BoundaryContaminated(UserWarning):
    pass
