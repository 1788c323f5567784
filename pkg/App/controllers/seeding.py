#DeskEBM
#Energy-based model training toolkit

#SEEDING CONTROLLERS - Every random draw comes from a named sub-stream of the single run seed.

import zlib

import numpy as np

#Sub-streams in use. Each is keyed by name, so drawing more from one never shifts another.
STREAMS = ("data", "augment", "inject", "sgld", "init", "buffer", "eval", "sample", "model")


def _nameKey(name):
    return zlib.crc32(name.encode("utf-8"))


#Returns a generator for (seed, name, *indices). The same arguments always give the same stream.
def streamFor(seed, name, *indices):
    sequence = np.random.SeedSequence(int(seed), spawn_key=(_nameKey(name),) + tuple(int(i) for i in indices))
    return np.random.default_rng(sequence)


#Derives an integer seed for a child run, such as one cell of a sweep.
def childSeed(seed, name, *indices):
    sequence = np.random.SeedSequence(int(seed), spawn_key=(_nameKey(name),) + tuple(int(i) for i in indices))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
