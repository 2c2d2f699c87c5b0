"""
Reproducible random streams.

Every random decision draws from a stream derived from the global seed
plus a purpose name and integer keys (sequence index, epoch, ...), so
results do not depend on the order in which streams are consumed.
"""
import zlib

import numpy as np


def stream_key(name):
    """
    @return stable 32-bit key for a stream name
    """
    return zlib.crc32(name.encode('utf-8')) & 0xffffffff


def derive(seed, name, *keys):
    """
    @param seed:    Global seed
    @param name:    Stream purpose, e.g. 'augment' or 'order'
    @param keys:    Non-negative integers, e.g. (sequence index, epoch)

    @return numpy Generator
    """
    entropy = [int(seed) & 0xffffffffffffffff, stream_key(name)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
