#DeskEBM
#Energy-based model training toolkit

#INIT DISTRIBUTION CONTROLLERS - Fitting, sampling and storing the initial sampling distribution of SGLD chains.

import logging
import struct

import numpy as np
from scipy.linalg import lapack

from App.errors import ConfigError, DataError, InvariantError, MalformedHeaderError, TruncatedPayloadError
from App.models.initDist import GaussianInit, MixtureInit, UniformInit, DEFAULT_CLAMP

LOGGER = logging.getLogger(__name__)

DEFAULT_EPS_REG = 1e-4

INIT_MODES = ("informative", "mixture", "uniform")

#Init file layout: magic, then D, epsReg, kind code, component count, clamp flag, clamp lo/hi.
INIT_MAGIC = b"EBMI"
INIT_HEADER = struct.Struct("<4sIdIIIdd")
COMPONENT_HEADER = struct.Struct("<id")
KIND_CODES = {"gaussian" : 0, "mixture" : 1, "uniform" : 2}


def _checkData(data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DataError("expected [N, D] data, got shape %s" % (data.shape,))
    if data.shape[0] < 1:
        raise DataError("cannot fit an init distribution to an empty dataset")
    if not np.all(np.isfinite(data)):
        raise DataError("data contains non-finite values")
    return data


#Lower Cholesky factor via LAPACK, reporting the failing pivot instead of a bare LinAlgError.
def choleskyFactor(matrix):
    factor, info = lapack.dpotrf(matrix, lower=1, clean=1)
    if info > 0:
        raise DataError("Cholesky factorization failed at pivot %d; the regularized covariance is not positive definite" % info)
    if info < 0:
        raise InvariantError("dpotrf rejected argument %d" % -info)
    return np.tril(factor)


#Fits N(mean, cov) to the whole dataset. The covariance divides by N, and the factor is of cov + epsReg I.
def fitGaussian(data, epsReg=DEFAULT_EPS_REG, clampRange=DEFAULT_CLAMP):
    if not epsReg > 0:
        raise ConfigError("epsReg must be positive, got %r" % epsReg)
    data = _checkData(data)
    mean = data.mean(axis=0)
    centered = data - mean
    covariance = centered.T @ centered / data.shape[0]
    factor = choleskyFactor(covariance + epsReg * np.eye(data.shape[1]))
    return GaussianInit(mean=mean, cholFactor=factor, epsReg=float(epsReg), clampRange=clampRange)


#Fits one Gaussian per class, weighted by the class counts.
def fitPerClass(data, labels, epsReg=DEFAULT_EPS_REG, numClasses=None, clampRange=DEFAULT_CLAMP):
    data = _checkData(data)
    labels = np.asarray(labels)
    if labels.shape != (data.shape[0],):
        raise DataError("labels must have one entry per sample")
    classes = np.unique(labels)
    if numClasses is not None:
        missing = sorted(set(range(numClasses)) - set(int(c) for c in classes))
        if missing:
            raise DataError("classes %s have no samples" % missing)
    components = [(int(c), fitGaussian(data[labels == c], epsReg, clampRange)) for c in classes]
    weights = np.array([np.count_nonzero(labels == c) for c in classes], dtype=np.float64) / data.shape[0]
    return MixtureInit(components=components, weights=weights, clampRange=clampRange)


#Uniform noise over the data range.
def fitUniform(data=None, lo=-1.0, hi=1.0, dim=None):
    if dim is None:
        dim = np.asarray(data).shape[1]
    if not hi > lo:
        raise ConfigError("uniform init needs lo < hi")
    return UniformInit(lo=float(lo), hi=float(hi), dim=int(dim))


#Picks the initializer named on the command line.
def initFromName(name, dataset, epsReg=DEFAULT_EPS_REG, clamp=True):
    clampRange = tuple(dataset.range) if clamp else None
    if name == "informative":
        return fitGaussian(dataset.samples, epsReg, clampRange)
    if name == "mixture":
        if dataset.labels is None:
            raise ConfigError("the mixture initializer needs a labelled dataset")
        return fitPerClass(dataset.samples, dataset.labels, epsReg, dataset.numClasses or None, clampRange)
    if name == "uniform":
        return fitUniform(lo=dataset.range[0], hi=dataset.range[1], dim=dataset.dim)
    raise ConfigError("unknown init %r; expected one of %s" % (name, ", ".join(INIT_MODES)))


def _clamp(samples, clampRange):
    if clampRange is None:
        return samples
    return np.clip(samples, clampRange[0], clampRange[1])


#Draws count i.i.d. samples. The mixture variant picks a component by weight first.
def sampleInit(dist, count, rng):
    if count < 0:
        raise ConfigError("sample count must be non-negative")
    if isinstance(dist, UniformInit):
        return rng.uniform(dist.lo, dist.hi, size=(count, dist.dim))
    if isinstance(dist, GaussianInit):
        z = rng.standard_normal((count, dist.dim))
        return _clamp(dist.mean + z @ dist.cholFactor.T, dist.clampRange)
    if isinstance(dist, MixtureInit):
        picks = rng.choice(len(dist.components), size=count, p=dist.weights)
        z = rng.standard_normal((count, dist.dim))
        samples = np.empty((count, dist.dim))
        for index, (_, component) in enumerate(dist.components):
            rows = picks == index
            samples[rows] = component.mean + z[rows] @ component.cholFactor.T
        return _clamp(samples, dist.clampRange)
    raise ConfigError("unsupported init distribution %r" % type(dist).__name__)


################## INIT FILE IO ##################

def _trilRows(factor):
    return factor[np.tril_indices(factor.shape[0])]


def _fromTrilRows(values, dim):
    factor = np.zeros((dim, dim))
    factor[np.tril_indices(dim)] = values
    return factor


#Serializes an init distribution: header, then per component its label, weight, mean and lower-triangular factor rows.
def initToBytes(dist):
    clampRange = dist.clampRange
    clampFlag = 0 if clampRange is None else 1
    lo, hi = (0.0, 0.0) if clampRange is None else clampRange
    if isinstance(dist, UniformInit):
        lo, hi, clampFlag = dist.lo, dist.hi, 0
        components = []
    elif isinstance(dist, GaussianInit):
        components = [(-1, 1.0, dist)]
    else:
        components = [(label, float(weight), component) for (label, component), weight in zip(dist.components, dist.weights)]

    parts = [INIT_HEADER.pack(INIT_MAGIC, dist.dim, float(dist.epsReg), KIND_CODES[dist.kind], len(components), clampFlag, float(lo), float(hi))]
    for label, weight, component in components:
        parts.append(COMPONENT_HEADER.pack(label, weight))
        parts.append(component.mean.astype("<f8").tobytes())
        parts.append(_trilRows(component.cholFactor).astype("<f8").tobytes())
    return b"".join(parts)


def initFromBytes(payload):
    if len(payload) < INIT_HEADER.size:
        raise MalformedHeaderError("init file shorter than its header")
    magic, dim, epsReg, kindCode, count, clampFlag, lo, hi = INIT_HEADER.unpack_from(payload, 0)
    if magic != INIT_MAGIC or kindCode not in KIND_CODES.values():
        raise MalformedHeaderError("not an init distribution file")
    clampRange = (lo, hi) if clampFlag else None
    if kindCode == KIND_CODES["uniform"]:
        return UniformInit(lo=lo, hi=hi, dim=dim)

    if kindCode == KIND_CODES["gaussian"] and count != 1:
        raise MalformedHeaderError("a gaussian init file holds exactly one component, header says %d" % count)
    if count < 1:
        raise MalformedHeaderError("a mixture init file needs at least one component")

    trilCount = dim * (dim + 1) // 2
    blockSize = COMPONENT_HEADER.size + 8 * (dim + trilCount)
    if len(payload) != INIT_HEADER.size + count * blockSize:
        raise TruncatedPayloadError("init file payload does not match its header")

    components = []
    offset = INIT_HEADER.size
    for _ in range(count):
        label, weight = COMPONENT_HEADER.unpack_from(payload, offset)
        offset += COMPONENT_HEADER.size
        mean = np.frombuffer(payload, dtype="<f8", count=dim, offset=offset).astype(np.float64)
        offset += 8 * dim
        tril = np.frombuffer(payload, dtype="<f8", count=trilCount, offset=offset)
        offset += 8 * trilCount
        components.append((label, weight, GaussianInit(mean=mean, cholFactor=_fromTrilRows(tril, dim), epsReg=epsReg, clampRange=clampRange)))

    if kindCode == KIND_CODES["gaussian"]:
        return components[0][2]
    return MixtureInit(components=[(label, g) for label, _, g in components], weights=np.array([w for _, w, _ in components]), clampRange=clampRange)


def saveInit(dist, path):
    with open(path, "wb") as handle:
        handle.write(initToBytes(dist))
    LOGGER.info("Saved %s init (D=%d) to %s", dist.kind, dist.dim, path)


def loadInit(path):
    try:
        with open(path, "rb") as handle:
            return initFromBytes(handle.read())
    except OSError as error:
        raise DataError("unable to read init file %s: %s" % (path, error))
