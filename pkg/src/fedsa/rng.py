"""Keyed counter-based random streams.

Each stream is identified by ``(master_seed, agent_id, purpose_tag)``. The
triple is folded into a 64-bit key with the splitmix64 finaliser and drives a
Philox counter generator, so streams with different keys are independent and
a given key always replays the same sequence.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def stream_key(master_seed: int, agent_id: int, purpose_tag: str) -> int:
    h = _splitmix64(master_seed & _MASK)
    h = _splitmix64(h ^ (agent_id & _MASK))
    return _splitmix64(h ^ _tag_hash(purpose_tag))


class RngStream:
    """Uniform and Gaussian draws from one keyed stream.

    ``draws`` counts the uniforms consumed so far. Chunked draws are
    equivalent to one long draw: ``uniforms(3)`` followed by ``uniforms(5)``
    returns the same numbers as ``uniforms(8)``.
    """

    def __init__(self, master_seed: int, agent_id: int = 0, purpose_tag: str = ""):
        self.master_seed = int(master_seed)
        self.agent_id = int(agent_id)
        self.purpose_tag = purpose_tag
        self.key = stream_key(self.master_seed, self.agent_id, purpose_tag)
        self._gen = np.random.Generator(np.random.Philox(key=self.key))
        self.draws = 0

    def __repr__(self) -> str:
        return (f"RngStream(seed={self.master_seed}, agent={self.agent_id}, "
                f"tag={self.purpose_tag!r}, draws={self.draws})")

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        self.draws += n
        return self._gen.random(n)

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normals by Box-Muller; consumes ``2 * ceil(n / 2)`` uniforms."""
        return box_muller(self.uniforms(2 * ((n + 1) // 2)))[:n]

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator, for instance generation.

        Draws made through it are not reflected in ``draws``.
        """
        return self._gen


def box_muller(u: np.ndarray) -> np.ndarray:
    """Map uniforms in [0, 1) (last axis of even length) to standard normals."""
    u1 = u[..., 0::2]
    u2 = u[..., 1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    out = np.empty_like(u)
    out[..., 0::2] = r * np.cos(2.0 * np.pi * u2)
    out[..., 1::2] = r * np.sin(2.0 * np.pi * u2)
    return out
