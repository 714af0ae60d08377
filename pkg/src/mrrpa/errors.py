"""Exception hierarchy shared by all modules."""

import numpy as np


class MrrpaError(Exception):
    """Base class for every error raised by this package."""


class FcidumpError(MrrpaError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DeterminantCapError(MrrpaError):
    def __init__(self, ndet, cap):
        self.ndet = ndet
        self.cap = cap
        super().__init__(f"sector has {ndet} determinants, cap is {cap} (set MRRPA_DET_CAP to raise it)")


class DegenerateReferenceError(MrrpaError):
    def __init__(self, gap):
        self.gap = gap
        super().__init__(f"nondegenerate singlet reference required (ground-state gap {gap:.3e})")


class NonPositiveGapError(MrrpaError):
    """A zeroth-order excitation energy is not strictly positive."""

    def __init__(self, labels, energies):
        self.labels = list(labels)
        self.energies = np.asarray(energies)
        super().__init__(
            f"{len(self.labels)} zeroth-order excitation energies are not positive "
            f"(min {self.energies.min():.6e}); first offending label {self.labels[0]}"
        )


class InstabilityError(MrrpaError):
    """The particle-hole metric eigenproblem has complex or unpaired roots."""

    def __init__(self, reason, eigenvalues):
        self.reason = reason
        self.eigenvalues = np.asarray(eigenvalues)
        super().__init__(f"RPA instability: {reason}")


class IllConditionedAmplitudesError(MrrpaError):
    def __init__(self, cond):
        self.cond = cond
        super().__init__(f"amplitude representation ill-defined (cond(X) = {cond:.3e})")


class RiccatiConvergenceError(MrrpaError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Riccati equation not solved: residual {residual:.3e} after {iterations} iterations")


class ChemicalPotentialError(MrrpaError):
    pass


class PositivityError(MrrpaError):
    """The pp metric problem violates one of the conditions on the chemical potential."""

    def __init__(self, message, mu, window=None):
        self.mu = mu
        self.window = window
        super().__init__(f"{message} (mu = {mu:.8f}); adjust the chemical potential")


class PpConsistencyError(MrrpaError):
    """The pp eigenvalue count or reality check failed after positivity passed."""


class QuadratureError(MrrpaError):
    pass


class ConfigError(MrrpaError):
    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")
