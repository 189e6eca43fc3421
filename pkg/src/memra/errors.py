"""Exception hierarchy shared by all memra modules."""


class MemraError(Exception):
    pass


class ExpressionError(MemraError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name, allowed):
        allowed_txt = ", ".join(sorted(allowed))
        super().__init__(f"unknown identifier {name!r} (allowed: {allowed_txt})")
        self.name = name


class ExpressionDomainError(ExpressionError):
    """Evaluation left the real domain (division by zero, overflow)."""

    def __init__(self, message, subexpression, device=None):
        where = f" in device {device}" if device else ""
        super().__init__(f"{message}: {subexpression}{where}")
        self.subexpression = subexpression
        self.device = device


class NetlistError(MemraError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class NetlistSyntaxError(NetlistError):
    pass


class DuplicateDeviceError(NetlistError):
    pass


class UnknownClassError(NetlistError):
    pass


class MalformedBuiltinError(NetlistError):
    pass


class InvalidCircuitError(MemraError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class IllPosedCircuitError(MemraError):
    pass


class UnsupportedAnalysisError(MemraError):
    pass


class NonConvergenceError(MemraError):
    def __init__(self, message, residual_norm, iterations, corank=0):
        super().__init__(f"{message} (residual {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.corank = corank


class SingularJacobianError(NonConvergenceError):
    pass


class InconsistentInitialDataError(MemraError):
    pass


class ConsistencyError(MemraError):
    """Topological verdict and numerical corank disagree."""


class PencilReductionError(MemraError):
    pass
