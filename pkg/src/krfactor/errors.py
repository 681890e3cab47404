"""Exception types shared across the package."""


class BudgetExceededError(RuntimeError):
    """An exact operation refused to run because it would exceed its size budget."""


class FileFormatError(ValueError):
    """An input file (graph, certificate, instance, manifest) is malformed."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; `stage` names the stage for reporting."""

    stage = "pipeline"


class CoverError(PipelineStageError):
    """No surviving candidate clique was left for an exceptional vertex."""

    stage = "cover_exceptional"

    def __init__(self, root: int, survivors: int, message: str = ""):
        self.root = root
        self.survivors = survivors
        super().__init__(
            message
            or f"no surviving candidate clique for root vertex {root} "
            f"({survivors} candidates left after filtering)"
        )


class BalanceError(PipelineStageError):
    """The weight-balancing blow-up has no factor (or is structurally impossible)."""

    stage = "balance_weights"

    def __init__(self, message: str, checks: dict | None = None):
        self.checks = dict(checks or {})
        if self.checks:
            message = f"{message}; hypothesis checks: {self.checks}"
        super().__init__(message)


class BalanceTuplesError(PipelineStageError):
    """Weighted clique extraction could not realize some tuple's quota."""

    stage = "balance_tuples"

    def __init__(self, message: str, tuple_key=None):
        self.tuple_key = tuple_key
        super().__init__(message)
