"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class WiringError(ValueError):
    """An optical element references a missing path or clashes with a live one."""


class UnsupportedInputError(ValueError):
    """Element was fed a state it is not modeled for."""


class DegenerateInputError(ValueError):
    """Zero total intensity, so populations cannot be normalized."""


class StepSizeWarning(UserWarning):
    """Integrator step is coarse enough (gamma*dt > 0.1) to distrust the result."""


class AngleFoldWarning(UserWarning):
    """Plate or prism angle given outside [-45, 45] degrees."""


class BenchFileError(ValueError):
    """A bench file failed to parse, validate or elaborate.

    ``diagnostics`` holds every positioned problem found, not just the first.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics) or "bench file error")
