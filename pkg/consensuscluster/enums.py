from enum import Enum


class Variant(Enum):
    """The enum for the average consensus variants."""
    AC = "ac"
    AAC = "aac"
    PP_AC = "pp-ac"
    PP_AAC = "pp-aac"

    @property
    def is_private(self) -> bool:
        """:class:`bool`: Whether shares are masked before they are sent."""
        return self in (Variant.PP_AC, Variant.PP_AAC)

    @property
    def is_accelerated(self) -> bool:
        """:class:`bool`: Whether the variant mixes with the accelerated matrix."""
        return self in (Variant.AAC, Variant.PP_AAC)

    def __repr__(self):
        return self.value


class WeightKind(Enum):
    """The enum for mixing matrix kinds."""
    METROPOLIS = "metropolis"
    ACCELERATED = "accelerated"

    def __repr__(self):
        return self.value


class Termination(Enum):
    """The enum for the reasons a consensus run stopped."""
    TOLERANCE = "tolerance"
    BUDGET = "budget"

    def __repr__(self):
        return self.value


class BudgetMode(Enum):
    """The enum for how the number of consensus rounds is decided."""
    TOLERANCE = "tolerance"
    RADIUS = "radius"

    def __repr__(self):
        return self.value


class Method(Enum):
    """The enum for the clustering methods."""
    KMEANS = "kmeans"
    FCA = "fca"
    GMM = "gmm"

    def __repr__(self):
        return self.value


class CovarianceCentre(Enum):
    """The enum for the mean the GMM scatter matrices are centred on."""
    PREVIOUS = "previous"
    UPDATED = "updated"

    def __repr__(self):
        return self.value


class PartitionPolicy(Enum):
    """The enum for the ways observations are split across agents."""
    EQUAL = "equal"
    PROPORTIONS = "proportions"
    BY_FILE = "by-file"

    def __repr__(self):
        return self.value


class Standardization(Enum):
    """The enum for how profiles are standardized before clustering."""
    NONE = "none"
    GLOBAL = "global"
    DISTRIBUTED = "distributed"

    def __repr__(self):
        return self.value


class Recipe(Enum):
    """The enum for the experiment recipes the harness can run."""
    CONSENSUS_COMPARE = "consensus-compare"
    CLUSTER = "cluster"
    COMPARE_CENTRALIZED = "compare-centralized"
    KSWEEP = "ksweep"
    TOPOLOGY_SWEEP = "topology-sweep"
    ATTACK = "attack"
    LOCAL_VS_GLOBAL = "local-vs-global"

    def __repr__(self):
        return self.value


class InitStrategy(Enum):
    """The enum for how the public initial centroids are drawn."""
    RANDOM = "random"
    PLUS_PLUS = "kmeans++"

    def __repr__(self):
        return self.value
