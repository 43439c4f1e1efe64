class NumericalError(RuntimeError):
    """A numerical routine failed; carries solver diagnostics."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class EigensolverError(NumericalError):
    pass


class StiffnessError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass
