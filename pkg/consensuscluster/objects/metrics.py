import numpy as np
import pandas as pd


class Telemetry:
    """Represents the computation and communication counters of a distributed run.

    Attributes
    ----------
    degrees: tuple[:class:`int`, ...]
        The degree ``d_i`` of every agent.
    rounds: tuple[:class:`int`, ...]
        The consensus rounds ``T_a`` of every consensus, in execution order.
    iterations: :class:`int`
        The outer clustering iterations ``T_c``.
    floats_per_message: :class:`int`
        The floats an agent sends to one neighbour in one round.
    bytes_per_float: :class:`int`
        The size of one transmitted float.
    messages: :class:`numpy.ndarray`
        The messages sent by every agent.
    floats: :class:`numpy.ndarray`
        The floats sent by every agent.
    multiplications: :class:`numpy.ndarray`
        The multiplications every agent performed while mixing.
    """

    __slots__ = (
        "degrees",
        "rounds",
        "iterations",
        "floats_per_message",
        "bytes_per_float",
        "messages",
        "floats",
        "multiplications",
    )

    def __init__(
        self,
        degrees: tuple[int, ...],
        iterations: int = 0,
        floats_per_message: int = 0,
        bytes_per_float: int = 4,
    ):
        self.degrees: tuple[int, ...] = tuple(degrees)
        self.rounds: tuple[int, ...] = ()
        self.iterations: int = iterations
        self.floats_per_message: int = floats_per_message
        self.bytes_per_float: int = bytes_per_float
        self.messages: np.ndarray = np.zeros(len(self.degrees), dtype=np.int64)
        self.floats: np.ndarray = np.zeros(len(self.degrees), dtype=np.int64)
        self.multiplications: np.ndarray = np.zeros(len(self.degrees), dtype=np.int64)

    def add_consensus(self, rounds: int, dim: int) -> None:
        """Counts one consensus of ``rounds`` rounds over ``dim``-float states."""
        degrees = np.asarray(self.degrees, dtype=np.int64)
        self.rounds = (*self.rounds, rounds)
        self.messages += degrees * rounds
        self.floats += degrees * dim * rounds
        self.multiplications += (degrees + 1) * dim * rounds

    @property
    def bytes_per_message(self) -> int:
        """:class:`int`: The size of one message."""
        return self.floats_per_message * self.bytes_per_float

    @property
    def bytes_sent(self) -> np.ndarray:
        """:class:`numpy.ndarray`: The bytes sent by every agent."""
        return self.floats * self.bytes_per_float

    @property
    def total_rounds(self) -> int:
        """:class:`int`: The consensus rounds over the whole run."""
        return sum(self.rounds)

    def to_frame(self) -> pd.DataFrame:
        """:class:`pandas.DataFrame`: One row of counters per agent."""
        return pd.DataFrame(
            {
                "agent": np.arange(len(self.degrees)),
                "degree": self.degrees,
                "messages": self.messages,
                "floats": self.floats,
                "bytes": self.bytes_sent,
                "multiplications": self.multiplications,
            }
        )

    def to_dict(self) -> dict:
        """:class:`dict`: The JSON summary of the counters."""
        return {
            "iterations": self.iterations,
            "rounds": list(self.rounds),
            "floats_per_message": self.floats_per_message,
            "bytes_per_message": self.bytes_per_message,
            "max_messages": int(self.messages.max(initial=0)),
            "max_floats": int(self.floats.max(initial=0)),
            "max_bytes": int(self.bytes_sent.max(initial=0)),
        }

    def __repr__(self):
        return (
            f"Telemetry agents={len(self.degrees)}, iterations={self.iterations}, "
            f"rounds={self.total_rounds}"
        )
