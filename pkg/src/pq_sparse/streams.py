"""
Named random substreams.

All randomness in the pipeline flows from one master seed. A substream is
identified by a path of names (``"dataset", 3, 17``) and built from a numpy
SeedSequence whose spawn key is derived from that path, so streams are
independent of each other and of the order in which they are requested.
"""

import zlib
from typing import Union

import numpy as np

Name = Union[str, int, float]


def _name_key(name: Name) -> int:
    if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
        return int(name) & 0xFFFFFFFF
    return zlib.crc32(str(name).encode("utf-8"))


def seed_trace(seed: int, *names: Name) -> str:
    """Readable identifier of a substream, e.g. ``42/dataset/3/17``"""
    return "/".join([str(seed), *(str(n) for n in names)])


def substream(seed: int, *names: Name) -> np.random.Generator:
    """Return the generator for the substream ``seed/names...``"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_name_key(n) for n in names))
    return np.random.default_rng(sequence)


def derive_seed(seed: int, *names: Name) -> int:
    """Integer seed for APIs that want a plain int rather than a Generator"""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_name_key(n) for n in names))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
