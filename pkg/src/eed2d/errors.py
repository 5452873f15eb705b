"""Exception types shared across the optimizers."""


class Infeasible(Exception):
    """No point satisfies the QoS constraints (for any admissible tau)."""


class NonConvergence(Exception):
    """An iterative solver hit its iteration cap without meeting tolerance."""


class NotStrictlyFeasible(Exception):
    """Barrier start lies on or outside the constraint boundary."""


class LineSearchStall(Exception):
    """Backtracking line search underflowed; the system is ill-conditioned."""


class AllZeroBeams(Exception):
    """An action carried an all-zero beam block and cannot be normalized."""
