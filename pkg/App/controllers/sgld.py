#DeskEBM
#Energy-based model training toolkit

#SGLD CONTROLLERS - Persistent negative sampling: drawing chain starts, running Langevin chains, and maintaining the replay buffer.

import logging
import struct

import numpy as np

from App.errors import DataError, DivergenceError, ShapeError, TruncatedPayloadError, MalformedHeaderError
from App.models.energyModel import EnergyModel
from App.models.replayBuffer import ReplayBuffer
from App.models.tensor import Tensor, resetGraph
from App.controllers.tensor import gradient, sumAll
from App.controllers.energyNet import energy
from App.controllers.initDist import sampleInit

LOGGER = logging.getLogger(__name__)

#Buffer dump layout: row count and dimension, then row-major float64 rows.
DUMP_HEADER = struct.Struct("<QQ")


#Starts for B chains. Each row independently comes from the buffer with probability 1 - rho, otherwise from p0.
#An empty buffer sends every row to p0. initRng, when given, draws the p0 rows in place of rng.
def drawInit(buffer, p0, count, rng, withMask=False, initRng=None):
    fresh = rng.random(count) < buffer.reinitProb
    if len(buffer) == 0:
        fresh[:] = True
    samples = np.empty((count, buffer.dim))

    reused = np.flatnonzero(~fresh)
    if reused.size:
        picks = rng.integers(0, len(buffer), size=reused.size)
        samples[reused] = buffer.entries[picks]
    fromInit = np.flatnonzero(fresh)
    if fromInit.size:
        drawn = sampleInit(p0, fromInit.size, rng if initRng is None else initRng)
        if drawn.shape[1] != buffer.dim:
            raise ShapeError("init distribution has dimension %d, buffer %d" % (drawn.shape[1], buffer.dim))
        samples[fromInit] = drawn

    if withMask:
        return samples, fresh
    return samples


#Energy of a batch, for either an energy model or a plain callable mapping a tensor to per-row energies.
def _energyOf(model, x):
    if isinstance(model, EnergyModel):
        return energy(model, x)
    return model(x)


#Runs K steps of x <- x - stepSize * dE/dx + noiseScale * N(0, I), clamping after each step when a range is set.
#The result is a plain array: nothing that happens inside the chain reaches the parameter graph.
def sgldChain(model, x0, cfg, rng):
    x = np.array(x0.values if isinstance(x0, Tensor) else x0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("SGLD chain started from non-finite values")

    for step in range(1, cfg.steps + 1):
        xt = Tensor(x, requiresGrad=True)
        total = sumAll(_energyOf(model, xt))
        (grad,) = gradient(total, [xt])
        value = total.item()
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            resetGraph()
            raise DivergenceError("SGLD diverged at step %d (energy %r)" % (step, value), step=step, value=value)
        x = x - cfg.stepSize * grad
        if cfg.noiseScale > 0:
            x = x + cfg.noiseScale * rng.standard_normal(x.shape)
        if cfg.clampRange is not None:
            x = np.clip(x, cfg.clampRange[0], cfg.clampRange[1])
        resetGraph()
    return x


#Inserts every sample. Once full, each new sample replaces a uniformly random entry.
def push(buffer, samples, rng):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != buffer.dim:
        raise ShapeError("buffer holds %d-dimensional samples, got shape %s" % (buffer.dim, samples.shape))
    free = min(buffer.capacity - buffer.count, samples.shape[0])
    if free:
        buffer.entries[buffer.count:buffer.count + free] = samples[:free]
        buffer.count += free
    rest = samples[free:]
    if rest.shape[0]:
        slots = rng.integers(0, buffer.capacity, size=rest.shape[0])
        #Sequential replacement: a later sample wins a slot drawn twice.
        for slot, row in zip(slots, rest):
            buffer.entries[slot] = row


def bufferSnapshot(buffer):
    return buffer.snapshot()


#Rebuilds a buffer from stored rows.
def restoreBuffer(rows, capacity, reinitProb):
    rows = np.asarray(rows, dtype=np.float64)
    buffer = ReplayBuffer(rows.shape[1], capacity, reinitProb)
    if rows.shape[0] > capacity:
        raise DataError("stored buffer holds %d rows, capacity is %d" % (rows.shape[0], capacity))
    buffer.entries[:rows.shape[0]] = rows
    buffer.count = rows.shape[0]
    return buffer


################## BUFFER DUMPS ##################

def dumpSamples(samples, path):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeError("sample dumps need [N, D] arrays")
    with open(path, "wb") as handle:
        handle.write(DUMP_HEADER.pack(samples.shape[0], samples.shape[1]))
        handle.write(samples.astype("<f8").tobytes(order="C"))


def dumpBuffer(buffer, path):
    dumpSamples(buffer.snapshot(), path)
    LOGGER.info("Dumped %d buffer rows to %s", len(buffer), path)


def loadBufferDump(path):
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except OSError as error:
        raise DataError("unable to read buffer dump %s: %s" % (path, error))
    if len(payload) < DUMP_HEADER.size:
        raise MalformedHeaderError("buffer dump shorter than its header")
    count, dim = DUMP_HEADER.unpack_from(payload, 0)
    if len(payload) != DUMP_HEADER.size + 8 * count * dim:
        raise TruncatedPayloadError("buffer dump payload does not match its header")
    if count * dim == 0:
        return np.zeros((count, dim))
    return np.frombuffer(payload, dtype="<f8", count=count * dim, offset=DUMP_HEADER.size).astype(np.float64).reshape(count, dim)
