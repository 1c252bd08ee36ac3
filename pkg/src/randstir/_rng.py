"""Seeded, splittable random streams.

Every random quantity in the package is drawn from a generator keyed by
``(master_seed, *key)``.  Keys are tuples of nonnegative ints, so a
replication ``r`` of an experiment and a sub-stream inside it can be
addressed independently of how many other streams were consumed.
"""

import numpy as np

DEFAULT_SEED = 20240917

# sub-stream tags
CLOCK = 0
UNIFORMS = 1
AUX = 2
MODEL = 3
FRESH = 4


def stream(seed, *key):
    """Return a ``numpy.random.Generator`` for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return stream(DEFAULT_SEED)
    return stream(rng)


class UniformStream:
    """Lazily extended i.i.d. Uniform[0,1) sequence, indexed from 1.

    Values are drawn in chunks from a single generator, so ``stream[k]``
    does not depend on how far the stream has already been extended.
    """

    def __init__(self, rng, chunk=32):
        self._rng = rng
        self._chunk = chunk
        self._values = np.empty(0)

    def __getitem__(self, k):
        if k < 1:
            raise IndexError("uniform streams are indexed from 1")
        while k > len(self._values):
            self._values = np.concatenate([self._values, self._rng.random(self._chunk)])
        return float(self._values[k - 1])

    def prefix(self, m):
        if m > 0:
            self[m]
        return self._values[:m].copy()

    def __len__(self):
        return len(self._values)


class FixedUniforms:
    """A finite, given uniform sequence with the 1-based ``UniformStream`` indexing."""

    def __init__(self, values):
        self._values = [float(u) for u in values]

    def __getitem__(self, k):
        if not 1 <= k <= len(self._values):
            raise IndexError(f"uniform U_{k} not supplied")
        return self._values[k - 1]

    def prefix(self, m):
        return np.array(self._values[:m])

    def __len__(self):
        return len(self._values)


def as_uniforms(obj):
    """Wrap a plain sequence (``seq[k-1]`` drives jump k) unless already a stream."""
    if isinstance(obj, (UniformStream, FixedUniforms)):
        return obj
    return FixedUniforms(obj)
