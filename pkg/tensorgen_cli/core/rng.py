"""
Deterministic, named random streams.

Every stream is a Philox generator seeded through ``numpy.random.SeedSequence`` with the user seed
as entropy and a spawn key derived from the stream path. Sibling streams are therefore
independent, and adding a new stream never perturbs the numbers drawn from an existing one.
"""

import hashlib
import typing as t
from dataclasses import dataclass

import numpy as np

from tensorgen_cli.core.errors import ParameterError

__all__ = ["RNG_ALGORITHM", "MAX_SEED", "RngStream", "stream_key"]

RNG_ALGORITHM = "philox-seedseq-sha256"
MAX_SEED = 2**64 - 1

StreamName = t.Union[str, int]


def stream_key(name: StreamName) -> int:
    """Maps a stream path component to a stable 32-bit spawn key."""
    digest = hashlib.sha256(str(name).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big", signed=False)


@dataclass(frozen=True)
class RngStream:
    """
    A named sub-stream of a seeded random number generator.

    Attributes:
        seed (int): The unsigned 64-bit user seed.
        path (Tuple[StreamName, ...]): The names leading from the root stream to this one.
    """

    seed: int
    path: t.Tuple[StreamName, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ParameterError(f"Seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def child(self, *names: StreamName) -> "RngStream":
        """Returns the sub-stream reached by appending ``names`` to this stream's path."""
        return RngStream(seed=self.seed, path=self.path + tuple(names))

    def generator(self) -> np.random.Generator:
        """
        Returns a generator positioned at the start of this stream.

        Each call restarts the stream, so a generator should be created once per operation.
        """
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=tuple(stream_key(name) for name in self.path)
        )
        return np.random.Generator(np.random.Philox(sequence))

    def __str__(self) -> str:
        return "/".join(str(name) for name in self.path) or "<root>"
