"""Exception hierarchy shared by all gembed modules."""


class GembedError(Exception):
    """Base class for every error raised by gembed."""


class InvalidParameter(GembedError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidInput(GembedError, ValueError):
    """Input data violates a structural precondition (non-finite values, bad shape...)."""


class DegenerateInput(GembedError, ValueError):
    """The input is well formed but the requested quantity is undefined for it."""


class InvalidKernel(GembedError, ValueError):
    """A spectral kernel produced non-finite values or could not be parsed."""


class DegenerateKernel(GembedError, ArithmeticError):
    """A kernel leads to zero atom norms or a singular Gram matrix."""


class DegenerateClass(GembedError, ValueError):
    """A class (or its complement) has zero volume, so its Cheeger score is undefined."""


class ConvergenceError(GembedError, ArithmeticError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        Relative residual at the last iterate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class BridgeError(GembedError, RuntimeError):
    """The external embedder failed or returned malformed output.

    Attributes
    ----------
    stderr : str
        Captured standard error of the child process (may be empty).
    """

    def __init__(self, message, stderr=""):
        super().__init__(message)
        self.stderr = stderr


class UnsupportedDimension(GembedError, ValueError):
    """The operation supports only a specific embedding dimension."""


class GuardExceeded(GembedError, ValueError):
    """A dense or quadratic path was requested above its size guard."""
