# -*- coding: utf-8 -*-
"""Small shared helpers: seeded random streams and array checks."""

from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError

__all__ = ['Seed', 'make_generator', 'spawn_seed', 'as_vector', 'as_matrix']

#: A seed is either a plain non-negative integer or a path of integers
#: ``(root, stream, substream, ...)`` naming an independent child stream.
Seed = Union[int, Sequence[int]]


def _seed_key(seed: Seed) -> Tuple[int, Tuple[int, ...]]:
    if isinstance(seed, (int, np.integer)):
        root, path = int(seed), ()  # type: int, Tuple[int, ...]
    else:
        items = tuple(int(item) for item in seed)
        if not items:
            raise ArgumentError('seed path must not be empty')
        root, path = items[0], items[1:]
    if root < 0 or any(item < 0 for item in path):
        raise ArgumentError('seeds must be non-negative, got %r' % (seed,))
    return root, path


def make_generator(seed: Seed) -> np.random.Generator:
    """Build a counter-based random generator for ``seed``.

    Streams are Philox generators keyed by a :class:`numpy.random.SeedSequence`
    whose spawn key is the seed path, so ``(s, 1)`` and ``(s, 2)`` never overlap
    and every stream is reproducible across runs and platforms.

    Args:
        seed (Seed): integer seed or seed path

    Returns:
        numpy.random.Generator: independent generator for the stream

    """
    root, path = _seed_key(seed)
    sequence = np.random.SeedSequence(root, spawn_key=path)
    return np.random.Generator(np.random.Philox(sequence))


def spawn_seed(seed: Seed, *path: int) -> Tuple[int, ...]:
    """Extend a seed path with further stream indices."""
    root, head = _seed_key(seed)
    return (root,) + head + tuple(int(item) for item in path)


def as_vector(values: object, name: str = 'vector') -> np.ndarray:
    """Coerce ``values`` into a finite 1-D float array."""
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise ArgumentError('%s must be one-dimensional, got shape %r' % (name, array.shape))
    if not np.all(np.isfinite(array)):
        raise ArgumentError('%s contains non-finite entries' % name)
    return array


def as_matrix(values: object, name: str = 'matrix') -> np.ndarray:
    """Coerce ``values`` into a finite 2-D float array (a 1-D input becomes one row)."""
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array[np.newaxis, :]
    if array.ndim != 2:
        raise ArgumentError('%s must be two-dimensional, got shape %r' % (name, array.shape))
    if not np.all(np.isfinite(array)):
        raise ArgumentError('%s contains non-finite entries' % name)
    return array
