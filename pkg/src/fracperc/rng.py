"""Counter-based random numbers keyed by cube address.

Every random decision in the samplers is a pure function of
``(seed, level, stream, cell index)``.  This makes sampling order
irrelevant, replicates embarrassingly parallel, and gives exact monotone
couplings for free: two models that threshold the same per-cube uniform
share every draw.

The generator is a SplitMix64-style absorb/finalize chain, absorbing the
key fields in the fixed order seed, level, stream, then the row-major
cell index within the level (flat indices are capped below 2^62, so one
64-bit absorb identifies the cube).  All arithmetic is done on uint64
numpy arrays, where overflow wraps silently and identically on every
platform, so sequences are bit-exact across runs and machines.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 2.0 ** -53

SEED_MASK = (1 << 64) - 1


def _finalize(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output scrambler (bijective on uint64)."""
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _absorb(state: np.ndarray, value) -> np.ndarray:
    """Fold one key field (scalar int or uint64-castable array) into the
    hash state."""
    if np.isscalar(value):
        value = np.uint64(int(value) & SEED_MASK)
    elif value.dtype != np.uint64:
        value = value.astype(np.uint64)
    return _finalize((state + _GOLDEN) ^ value)


def seed_states(seeds) -> np.ndarray:
    """Initial hash state per seed."""
    arr = np.atleast_1d(np.asarray(seeds)).astype(np.uint64)
    return _finalize(arr ^ _GOLDEN)


def prefix_states(states: np.ndarray, level: int, stream: int) -> np.ndarray:
    """States after absorbing level and stream (cell index still pending)."""
    return _absorb(_absorb(states, level), stream)


def keys_from_prefix(prefix: np.ndarray, flats: np.ndarray) -> np.ndarray:
    """Finish the chain by absorbing the flat cell indices.

    ``prefix`` must broadcast against ``flats``.
    """
    return _absorb(prefix, flats)


def keys_to_uniforms(keys: np.ndarray) -> np.ndarray:
    """Map hash keys to uniforms in [0, 1) using the top 53 bits."""
    return (keys >> _S11) * _INV_2_53


def cell_keys(seed: int, level: int, flats: np.ndarray, stream: int) -> np.ndarray:
    """64-bit hash per flat cell index for one (seed, level, stream)."""
    flats = np.asarray(flats, dtype=np.int64)
    prefix = prefix_states(seed_states(seed), level, stream)
    return keys_from_prefix(prefix, flats)


def cell_uniforms(seed: int, level: int, flats: np.ndarray, stream: int) -> np.ndarray:
    """Uniform [0, 1) variates, one per flat cell index."""
    return keys_to_uniforms(cell_keys(seed, level, flats, stream))


def uniform_matrix(seed: int, level: int, flats: np.ndarray,
                   streams) -> np.ndarray:
    """Uniforms of shape (ncells, nstreams): one column per stream."""
    flats = np.asarray(flats, dtype=np.int64)
    base = seed_states(seed)
    prefixes = np.concatenate([prefix_states(base, level, s) for s in streams])
    keys = keys_from_prefix(prefixes[None, :], flats[:, None])
    return keys_to_uniforms(keys)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for replicate/worker ``index``; deterministic and spread."""
    return int(_absorb(seed_states(seed), index & SEED_MASK)[0])


def derive_seeds(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Derived seeds for indices start..start+count-1, as uint64."""
    base = np.full(count, seed_states(seed)[0], dtype=np.uint64)
    return _absorb(base, np.arange(start, start + count, dtype=np.uint64))
