class ConsensusClusterException(Exception):
    """Base exception class that other ConsensusCluster exceptions inherit from."""


class InvalidEdge(ConsensusClusterException):
    """An Exception raised when an edge handed to
    :func:`consensuscluster.build_topology` is a self-loop, refers to an agent
    outside of ``[0, M)`` or duplicates another edge."""

    def __init__(self, edge: tuple, reason: str):
        self.edge: tuple = edge
        message = f"Edge {edge} has been rejected.\nReason: {reason}."
        super().__init__(message)


class DisconnectedGraph(ConsensusClusterException):
    """An Exception raised when a communication graph is not connected."""

    def __init__(self, num_agents: int, components: int):
        self.num_agents: int = num_agents
        self.components: int = components
        message = (
            f"The communication graph over {num_agents} agents is disconnected.\n"
            f"Components: {components}\n"
            "Reason: Average consensus requires a single connected network."
        )
        super().__init__(message)


class InvalidWeightMatrix(ConsensusClusterException):
    """An Exception raised when a mixing matrix is not symmetric doubly stochastic."""

    def __init__(self, reason: str):
        message = f"The weight matrix is not usable.\nReason: {reason}."
        super().__init__(message)


class EigenFailure(ConsensusClusterException):
    """An Exception raised when the symmetric eigensolver does not converge."""

    def __init__(self, reason: str):
        message = f"The eigenvalue computation has failed.\nReason: {reason}."
        super().__init__(message)


class InvalidParameter(ConsensusClusterException):
    """An Exception raised when a numerical parameter is out of its valid range."""

    def __init__(self, name: str, value, reason: str):
        self.name: str = name
        self.value = value
        message = f"Parameter {name}={value!r} is invalid.\nReason: {reason}."
        super().__init__(message)


class DimensionMismatch(ConsensusClusterException):
    """An Exception raised when array shapes do not agree with each other."""

    def __init__(self, expected: tuple, received: tuple, what: str):
        self.expected: tuple = expected
        self.received: tuple = received
        message = (
            f"Shape mismatch for {what}.\nExpected: {expected}\nReceived: {received}"
        )
        super().__init__(message)


class BudgetExhausted(ConsensusClusterException):
    """An Exception raised when a consensus run reaches its round budget before
    the tolerance is met. The partial run is kept in :attr:`run`."""

    def __init__(self, run, tol: float):
        self.run = run
        self.tol: float = tol
        message = (
            f"Consensus ({run.variant.value}) did not reach tolerance {tol:g} "
            f"within {run.rounds} rounds.\nFinal error: {run.max_error:g}"
        )
        super().__init__(message)


class ConsensusBudgetExhausted(ConsensusClusterException):
    """An Exception raised by the distributed clustering driver when the consensus
    of one outer iteration exhausts its budget."""

    def __init__(self, iteration: int, cause: BudgetExhausted):
        self.iteration: int = iteration
        self.run = cause.run
        message = (
            f"Distributed clustering stalled at outer iteration {iteration}.\n"
            f"Cause: {cause}"
        )
        super().__init__(message)


class SingularCovariance(ConsensusClusterException):
    """An Exception raised when a GMM covariance fails its Cholesky factorization."""

    def __init__(self, cluster: int):
        self.cluster: int = cluster
        message = (
            f"The covariance of cluster {cluster} is not positive definite "
            "even after regularization."
        )
        super().__init__(message)


class DegenerateClustering(ConsensusClusterException):
    """An Exception raised when a clustering quality index needs more effective
    clusters than the assignments provide."""

    def __init__(self, effective: int):
        self.effective: int = effective
        message = (
            f"The assignments contain {effective} effective cluster(s).\n"
            "Reason: At least 2 nonempty clusters are required."
        )
        super().__init__(message)


class NotNeighbors(ConsensusClusterException):
    """An Exception raised when an adversary view is requested for two agents
    that do not share an edge."""

    def __init__(self, observer: int, target: int):
        self.observer: int = observer
        self.target: int = target
        message = (
            f"Agent {observer} does not receive messages from agent {target}.\n"
            "Reason: The two agents are not neighbors."
        )
        super().__init__(message)


class ParseError(ConsensusClusterException):
    """An Exception raised when a profile file contains a cell that is not a number."""

    def __init__(self, path: str, row: int, column: int, value: str):
        self.path: str = path
        self.row: int = row
        self.column: int = column
        message = (
            f"Could not parse {path}.\nRow: {row}\nColumn: {column}\n"
            f"Reason: {value!r} is not a number."
        )
        super().__init__(message)


class NonFiniteValue(ConsensusClusterException):
    """An Exception raised when a profile file contains NaN or infinity."""

    def __init__(self, path: str, row: int, column: int):
        self.path: str = path
        self.row: int = row
        self.column: int = column
        message = (
            f"Non-finite value in {path}.\nRow: {row}\nColumn: {column}"
        )
        super().__init__(message)


class RaggedRows(ConsensusClusterException):
    """An Exception raised when the rows of a profile file differ in length."""

    def __init__(self, path: str, row: int, expected: int, received: int):
        self.path: str = path
        self.row: int = row
        message = (
            f"Ragged rows in {path}.\nRow: {row}\n"
            f"Expected {expected} columns, received {received}."
        )
        super().__init__(message)


class EmptyDataset(ConsensusClusterException):
    """An Exception raised when a profile source contains no observations."""

    def __init__(self, source: str):
        message = f"No observations could be read from {source}."
        super().__init__(message)


class InfeasiblePolicy(ConsensusClusterException):
    """An Exception raised when observations cannot be partitioned as requested."""

    def __init__(self, policy: str, reason: str):
        message = f"Partition policy {policy!r} is infeasible.\nReason: {reason}."
        super().__init__(message)


class InvalidConfig(ConsensusClusterException):
    """An Exception raised when an experiment configuration field is invalid."""

    def __init__(self, field: str, reason: str):
        self.field: str = field
        message = f"Configuration field {field!r} is invalid.\nReason: {reason}."
        super().__init__(message)


class EquivalenceFailure(ConsensusClusterException):
    """An Exception raised when the distributed and centralized runs of the
    ``compare-centralized`` recipe disagree."""

    def __init__(self, discrepancy: float, centralized: int, distributed: int):
        self.discrepancy: float = discrepancy
        message = (
            "Distributed clustering does not reproduce the centralized result.\n"
            f"Max centroid discrepancy: {discrepancy:g}\n"
            f"Iterations: centralized={centralized}, distributed={distributed}"
        )
        super().__init__(message)


class RecipeFailed(ConsensusClusterException):
    """An Exception raised when an experiment recipe fails. Wraps the original
    exception in :attr:`cause`."""

    def __init__(self, recipe: str, cause: Exception):
        self.recipe: str = recipe
        self.cause: Exception = cause
        message = f"Recipe {recipe!r} has failed.\n{type(cause).__name__}: {cause}"
        super().__init__(message)
