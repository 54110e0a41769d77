"""Deterministic pseudo-random primitives for mock encoders and synthetic corpora.

The full pipeline is pinned so fixtures reproduce bit-identically across
platforms and languages: splitmix64 -> 53-bit uniforms in [0, 1) -> Box-Muller
pairs. Streams are keyed by SHA-256 over a domain tag plus the caller's inputs;
the first 8 digest bytes (little-endian) seed the splitmix64 state.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


def derive_state(*parts: bytes) -> int:
    """SHA-256 the concatenated parts; little-endian u64 from the first 8 bytes."""
    digest = hashlib.sha256(b"".join(parts)).digest()
    return struct.unpack("<Q", digest[:8])[0]


def key_bytes(*fields) -> bytes:
    """Serialize mixed key fields (str, bytes, int) into a stable byte string.

    Integers are packed as signed 64-bit little-endian; strings as UTF-8 with a
    length prefix so adjacent fields cannot collide.
    """
    out = bytearray()
    for f in fields:
        if isinstance(f, bytes):
            raw = f
        elif isinstance(f, str):
            raw = f.encode("utf-8")
        elif isinstance(f, (int, np.integer)):
            raw = struct.pack("<q", int(f))
        else:
            raise TypeError(f"unsupported key field type: {type(f)!r}")
        out += struct.pack("<I", len(raw))
        out += raw
    return bytes(out)


def splitmix64_stream(state: int, n: int) -> np.ndarray:
    """First n outputs of the splitmix64 generator seeded at `state`.

    The i-th internal state is state + i * gamma mod 2**64, so the stream is
    computed vectorized; uint64 arithmetic wraps modulo 2**64 by construction.
    """
    steps = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(state & 0xFFFFFFFFFFFFFFFF) + steps * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        z = z ^ (z >> np.uint64(31))
    return z


def uniforms(state: int, n: int) -> np.ndarray:
    """n doubles in [0, 1) built from the top 53 bits of each splitmix64 output."""
    bits = splitmix64_stream(state, n)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def standard_normals(state: int, n: int) -> np.ndarray:
    """n float64 standard normals via Box-Muller over consecutive uniform pairs.

    Each pair (u1, u2) yields sqrt(-2 ln u1') cos(2 pi u2) and the sin twin,
    where u1' = u1 shifted off zero so the log is finite.
    """
    return standard_normals_batch(np.array([state], dtype=np.uint64), n)[0]


def standard_normals_batch(states, n: int) -> np.ndarray:
    """(m, n) float64 normals; row i equals standard_normals(states[i], n)."""
    states = np.asarray(states, dtype=np.uint64)
    pairs = (n + 1) // 2
    steps = np.arange(1, 2 * pairs + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = states[:, None] + steps[None, :] * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    u1 = u[:, 0::2] + 0.5 / (1 << 53)
    u2 = u[:, 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty((len(states), 2 * pairs), dtype=np.float64)
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return out[:, :n]


def unit_vector(state: int, dim: int) -> np.ndarray:
    """Deterministic unit-norm float32 vector of length dim."""
    v = standard_normals(state, dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:  # probability ~0, but stay total
        v = np.ones(dim, dtype=np.float64)
        norm = float(np.linalg.norm(v))
    return (v / norm).astype(np.float32)
