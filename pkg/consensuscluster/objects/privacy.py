import numpy as np


class PrivacySet:
    """Represents the private information of an agent that its local results reveal.

    Attributes
    ----------
    count: :class:`float`
        The number of consumers ``N_i``.
    proportions: :class:`numpy.ndarray`
        The share ``r_k`` of the consumers in every cluster. Undefined entries
        are ``nan`` and flagged in :attr:`proportions_defined`.
    patterns: :class:`numpy.ndarray`
        The ``K x D`` local load patterns ``mu_k``. Undefined rows are ``nan``
        and flagged in :attr:`patterns_defined`.
    proportions_defined: :class:`bool`
        Whether the proportions could be computed (``N_i != 0``).
    patterns_defined: :class:`numpy.ndarray`
        Which clusters have a pattern (``z_k != 0``).
    """

    __slots__ = ("count", "proportions", "patterns", "proportions_defined", "patterns_defined")

    def __init__(
        self,
        count: float,
        proportions: np.ndarray,
        patterns: np.ndarray,
        proportions_defined: bool,
        patterns_defined: np.ndarray,
    ):
        self.count: float = float(count)
        self.proportions: np.ndarray = proportions
        self.patterns: np.ndarray = patterns
        self.proportions_defined: bool = bool(proportions_defined)
        self.patterns_defined: np.ndarray = patterns_defined

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation, with ``None`` for undefined fields."""
        return {
            "count": self.count,
            "proportions": self.proportions.tolist() if self.proportions_defined else None,
            "patterns": [
                pattern.tolist() if defined else None
                for pattern, defined in zip(self.patterns, self.patterns_defined)
            ],
        }

    def __repr__(self):
        return f"PrivacySet count={self.count:g}, clusters={len(self.proportions)}"


class AdversaryView:
    """Represents what one agent learns about a neighbour from a consensus run.

    Attributes
    ----------
    observer: :class:`int`
        The honest-but-curious agent ``i``.
    target: :class:`int`
        The neighbour ``j`` it spies on.
    received: list[:class:`numpy.ndarray`]
        The values ``i`` received from ``j``, one per recorded round. Masked
        shares for privacy variants, raw states otherwise.
    masked: :class:`bool`
        Whether the received values were masked.
    inferred: :class:`PrivacySet`
        The information inferred from the round-0 value.
    truth: :class:`PrivacySet`
        The target's true information.
    errors: dict[:class:`str`, :class:`float` | :class:`None`]
        The inference errors: absolute for ``count``, total variation for
        ``proportions`` and RMS for ``patterns``. ``None`` where a field is
        undefined on either side.
    vulnerable: :class:`bool`
        Whether the target's neighbourhood is covered by the observer's.
    reconstruction: :class:`numpy.ndarray` | :class:`None`
        The target's initial state recovered by the linear attack, when possible.
    reconstruction_error: :class:`float` | :class:`None`
        The max absolute error of :attr:`reconstruction`.
    """

    __slots__ = (
        "observer",
        "target",
        "received",
        "masked",
        "inferred",
        "truth",
        "errors",
        "vulnerable",
        "reconstruction",
        "reconstruction_error",
    )

    def __init__(
        self,
        observer: int,
        target: int,
        received: list[np.ndarray],
        masked: bool,
        inferred: PrivacySet,
        truth: PrivacySet,
        errors: dict,
        vulnerable: bool,
        reconstruction: np.ndarray | None = None,
        reconstruction_error: float | None = None,
    ):
        self.observer: int = observer
        self.target: int = target
        self.received: list[np.ndarray] = received
        self.masked: bool = masked
        self.inferred: PrivacySet = inferred
        self.truth: PrivacySet = truth
        self.errors: dict = errors
        self.vulnerable: bool = vulnerable
        self.reconstruction: np.ndarray | None = reconstruction
        self.reconstruction_error: float | None = reconstruction_error

    @property
    def leaked(self) -> bool:
        """:class:`bool`: Whether the round-0 inference of ``N_j`` is exact."""
        return self.errors["count"] == 0

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON representation of the view, without the
        received stream."""
        return {
            "observer": self.observer,
            "target": self.target,
            "masked": self.masked,
            "rounds_received": len(self.received),
            "inferred": self.inferred.to_dict(),
            "truth": self.truth.to_dict(),
            "errors": self.errors,
            "vulnerable": self.vulnerable,
            "reconstruction_error": self.reconstruction_error,
        }

    def __repr__(self):
        return (
            f"AdversaryView observer={self.observer}, target={self.target}, "
            f"masked={self.masked}, vulnerable={self.vulnerable}"
        )
