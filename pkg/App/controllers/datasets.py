#DeskEBM
#Energy-based model training toolkit

#DATASET CONTROLLERS - Synthetic 2D densities, the EBMG raster grid format, augmentation and batch loading.

import logging
import os
import queue
import struct
import threading

import numpy as np

from App.errors import ConfigError, DataError, MalformedHeaderError, TruncatedPayloadError, LabelRangeError, ShapeError
from App.models.dataset import Dataset, TaggedBatch, KIND_2D, KIND_RASTER
from App.controllers.seeding import streamFor

LOGGER = logging.getLogger(__name__)

SYNTH_KINDS = ("eight_gaussians", "two_rings", "checkerboard", "two_moons")

#Eight gaussians: modes on a radius-0.7 octagon.
OCTAGON_RADIUS = 0.7
EIGHT_GAUSSIANS_STD = 0.05
#Two rings: concentric circles.
RING_RADII = (0.4, 0.8)
RING_NOISE = 0.03
#Two moons: the canonical arcs, shifted by MOON_CENTER and scaled by MOON_SCALE into [-1, 1]^2.
MOON_CENTER = (0.5, 0.25)
MOON_SCALE = 0.6
MOON_NOISE = 0.05

#Jitter applied to 2D batches, and the largest raster translation in pixels.
JITTER_STD = 0.01
MAX_SHIFT = 2

#Grid file layout: magic, then N, H, W, channels, num_classes as little-endian u32.
GRID_MAGIC = b"EBMG"
GRID_HEADER = struct.Struct("<4sIIIII")


#Splits n as evenly as possible over k groups, earlier groups taking the remainder.
def _stratify(n, k):
    counts = np.full(k, n // k)
    counts[:n % k] += 1
    return counts


def _eightGaussians(n, rng, noise):
    counts = _stratify(n, 8)
    labels = np.repeat(np.arange(8), counts)
    angles = 2.0 * np.pi * labels / 8.0
    centers = OCTAGON_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return centers + noise * rng.standard_normal((n, 2)), labels


def _twoRings(n, rng, noise):
    counts = _stratify(n, 2)
    labels = np.repeat(np.arange(2), counts)
    radii = np.asarray(RING_RADII)[labels] + noise * rng.standard_normal(n)
    angles = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1), None


def _checkerboard(n, rng, noise):
    x1 = rng.uniform(-2.0, 2.0, n)
    x2 = rng.uniform(0.0, 1.0, n) - 2.0 * rng.integers(0, 2, n) + np.floor(x1) % 2
    return np.stack([x1, x2], axis=1) / 2.0, None


def _twoMoons(n, rng, noise):
    counts = _stratify(n, 2)
    labels = np.repeat(np.arange(2), counts)
    t = rng.uniform(0.0, np.pi, n)
    outer = np.stack([np.cos(t), np.sin(t)], axis=1)
    inner = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    points = np.where(labels[:, None] == 0, outer, inner)
    points = (points - np.asarray(MOON_CENTER)) * MOON_SCALE
    return points + noise * rng.standard_normal((n, 2)), labels


SYNTH_BUILDERS = {
    "eight_gaussians" : (_eightGaussians, EIGHT_GAUSSIANS_STD, 8),
    "two_rings" : (_twoRings, RING_NOISE, 0),
    "checkerboard" : (_checkerboard, 0.0, 0),
    "two_moons" : (_twoMoons, MOON_NOISE, 2)
}


#Builds a synthetic 2D dataset scaled into [-1, 1]^2. Eight gaussians and two moons carry labels.
def synth2d(kind, n, seed=0, noise=None):
    if kind not in SYNTH_BUILDERS:
        raise ConfigError("unknown synthetic dataset %r; expected one of %s" % (kind, ", ".join(SYNTH_KINDS)))
    if n < 1:
        raise ConfigError("synthetic datasets need n >= 1")
    builder, defaultNoise, numClasses = SYNTH_BUILDERS[kind]
    rng = np.random.default_rng(seed)
    samples, labels = builder(int(n), rng, defaultNoise if noise is None else noise)
    samples = np.clip(samples, -1.0, 1.0)
    return Dataset(samples=samples, labels=labels, range=(-1.0, 1.0), name=kind, kind=KIND_2D, numClasses=numClasses if labels is not None else 0)


################## GRID FILES ##################

#Maps bytes 0..255 onto [-1, 1] as v / 127.5 - 1.
def bytesToUnit(values):
    return np.asarray(values, dtype=np.float64) / 127.5 - 1.0


def unitToBytes(values):
    return np.clip(np.round((np.asarray(values, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def loadGrid(path):
    try:
        with open(path, "rb") as handle:
            payload = handle.read()
    except OSError as error:
        raise DataError("unable to read grid file %s: %s" % (path, error))

    if len(payload) < GRID_HEADER.size:
        raise MalformedHeaderError("grid file %s is shorter than its header" % path)
    magic, count, height, width, channels, numClasses = GRID_HEADER.unpack_from(payload, 0)
    if magic != GRID_MAGIC:
        raise MalformedHeaderError("grid file %s has bad magic %r" % (path, magic))
    if height < 1 or width < 1 or channels < 1:
        raise MalformedHeaderError("grid file %s declares an empty raster %dx%dx%d" % (path, height, width, channels))

    dim = height * width * channels
    pixelBytes = count * dim
    labelBytes = 2 * count if numClasses > 0 else 0
    if len(payload) != GRID_HEADER.size + pixelBytes + labelBytes:
        raise TruncatedPayloadError("grid file %s holds %d payload bytes, header implies %d" % (path, len(payload) - GRID_HEADER.size, pixelBytes + labelBytes))

    pixels = np.frombuffer(payload, dtype=np.uint8, count=pixelBytes, offset=GRID_HEADER.size)
    labels = None
    if numClasses > 0:
        labels = np.frombuffer(payload, dtype="<u2", count=count, offset=GRID_HEADER.size + pixelBytes).astype(np.int64)
        if labels.size and labels.max() >= numClasses:
            raise LabelRangeError("grid file %s has a label outside [0, %d)" % (path, numClasses))

    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(samples=bytesToUnit(pixels).reshape(count, dim), labels=labels, range=(-1.0, 1.0), name=name, kind=KIND_RASTER, shape=(height, width, channels), numClasses=int(numClasses))


#Writes samples in [-1, 1] (or raw bytes) with optional labels.
def writeGrid(path, samples, shape, labels=None, numClasses=0):
    height, width, channels = shape
    samples = np.asarray(samples)
    pixels = samples.astype(np.uint8) if samples.dtype == np.uint8 else unitToBytes(samples)
    pixels = pixels.reshape(-1, height * width * channels)
    if labels is not None and numClasses < 1:
        numClasses = int(np.max(labels)) + 1 if len(labels) else 1
    with open(path, "wb") as handle:
        handle.write(GRID_HEADER.pack(GRID_MAGIC, pixels.shape[0], height, width, channels, numClasses if labels is not None else 0))
        handle.write(pixels.tobytes())
        if labels is not None:
            handle.write(np.asarray(labels).astype("<u2").tobytes())


#Resolves a --data argument: "<kind>[:n[:noise]]" for the synthetic sets, otherwise a grid file path.
def loadDataset(spec, seed=0):
    parts = str(spec).split(":")
    if parts[0] in SYNTH_KINDS:
        try:
            n = int(parts[1]) if len(parts) > 1 and parts[1] else 8000
            noise = float(parts[2]) if len(parts) > 2 and parts[2] else None
        except ValueError:
            raise ConfigError("invalid dataset spec %r; expected kind[:n[:noise]]" % spec)
        return synth2d(parts[0], n, seed=seed, noise=noise)
    if not os.path.exists(spec):
        raise DataError("dataset %r is neither a synthetic kind nor an existing grid file" % spec)
    return loadGrid(spec)


################## AUGMENTATION ##################

#Mirrors each raster whose coin is set, left to right.
def flipRaster(batch, coins, shape):
    height, width, channels = shape
    images = np.asarray(batch).reshape(-1, height, width, channels).copy()
    images[coins] = images[coins][:, :, ::-1, :]
    return images.reshape(len(images), -1)


#Shifts each raster by whole pixels, filling the exposed border with the low end of the range.
def translateRaster(batch, shifts, shape, fill):
    height, width, channels = shape
    images = np.asarray(batch).reshape(-1, height, width, channels)
    pad = MAX_SHIFT
    padded = np.pad(images, ((0, 0), (pad, pad), (pad, pad), (0, 0)), constant_values=fill)
    out = np.empty_like(images)
    for i, (dy, dx) in enumerate(shifts):
        out[i] = padded[i, pad - dy:pad - dy + height, pad - dx:pad - dx + width]
    return out.reshape(len(out), -1)


#Augments a batch by dataset kind. Rasters get a random flip, a shift of up to two pixels and uniform dequantization noise; 2D points get a small jitter.
def augment(batch, dataset, rng, enabled=True):
    batch = np.asarray(batch, dtype=np.float64)
    if not enabled or batch.shape[0] == 0:
        return batch.copy()
    lo, hi = dataset.range
    if dataset.kind == KIND_RASTER:
        if dataset.shape is None:
            raise ShapeError("raster augmentation needs the image shape")
        coins = rng.random(batch.shape[0]) < 0.5
        out = flipRaster(batch, coins, dataset.shape)
        shifts = rng.integers(-MAX_SHIFT, MAX_SHIFT + 1, size=(batch.shape[0], 2))
        out = translateRaster(out, shifts, dataset.shape, lo)
        out = out + rng.uniform(0.0, (hi - lo) / 255.0, size=out.shape)
    else:
        out = batch + JITTER_STD * rng.standard_normal(batch.shape)
    return np.clip(out, lo, hi)


################## BATCH LOADING ##################

#Serves the two mini-batches of every iteration: an augmented classification batch and a clean likelihood batch.
#Each iteration draws from its own sub-streams, so batches depend only on (seed, iteration).
class BatchLoader:
    def __init__(self, dataset, cfg):
        if len(dataset) == 0:
            raise DataError("cannot train on an empty dataset")
        self.dataset = dataset
        self.cfg = cfg

    def _indices(self, rng, size):
        return rng.choice(len(self.dataset), size=size, replace=len(self.dataset) < size)

    def batch(self, iteration):
        cfg, dataset = self.cfg, self.dataset
        dataRng = streamFor(cfg.seed, "data", iteration)
        augmentRng = streamFor(cfg.seed, "augment", iteration)

        genRows = self._indices(dataRng, cfg.genBatch)
        genValues = dataset.samples[genRows]
        genAugmented = False
        if cfg.augmentGenBatch:
            genValues = augment(genValues, dataset, augmentRng, cfg.augment)
            genAugmented = cfg.augment
        genBatch = TaggedBatch(genValues, None if dataset.labels is None else dataset.labels[genRows], genAugmented)

        clfBatch = None
        if dataset.labelled:
            clfRows = self._indices(dataRng, cfg.clfBatch)
            clfValues = augment(dataset.samples[clfRows], dataset, augmentRng, cfg.augment)
            clfBatch = TaggedBatch(clfValues, dataset.labels[clfRows], cfg.augment)
        return clfBatch, genBatch

    #Yields (iteration, clfBatch, genBatch). With prefetch > 0 a worker thread prepares batches ahead through a bounded queue; order is unchanged.
    def iterate(self, start, stop, prefetch=0):
        if prefetch <= 0:
            for iteration in range(start, stop):
                yield (iteration,) + self.batch(iteration)
            return

        pending = queue.Queue(maxsize=prefetch)
        stopEvent = threading.Event()

        def produce():
            try:
                for iteration in range(start, stop):
                    if stopEvent.is_set():
                        return
                    pending.put((iteration,) + self.batch(iteration))
            except Exception as error:
                #Handed to the consumer, which re-raises it in the training thread.
                pending.put(error)
                return
            pending.put(None)

        worker = threading.Thread(target=produce, name="batch-prefetch", daemon=True)
        worker.start()
        try:
            while True:
                item = pending.get()
                if item is None:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stopEvent.set()
            #Drain so a blocked producer can finish.
            while worker.is_alive():
                try:
                    pending.get_nowait()
                except queue.Empty:
                    worker.join(timeout=0.01)
