#DeskEBM
#Energy-based model training toolkit

#ENERGY NET CONTROLLERS - Building, evaluating, cloning and storing energy models.

import json
import logging

import numpy as np

from App.errors import ConfigError, ShapeError, DataError
from App.models.energyModel import EnergyModel, Layer, Mode
from App.models.tensor import Tensor
from App.controllers.tensor import asTensor, affine, leakyRelu, logSumExp, neg, reshape, softmax

LOGGER = logging.getLogger(__name__)

#Default trunk: three hidden layers, 128 wide for 2D data and 256 wide for flattened rasters.
DEFAULT_HIDDEN_LAYERS = 3
DEFAULT_WIDTH_2D = 128
DEFAULT_WIDTH_RASTER = 256
DEFAULT_SLOPE = 0.2


#Draws a layer with weights and biases uniform in [-1/sqrt(fanIn), 1/sqrt(fanIn)].
def _initLayer(fanIn, fanOut, rng):
    bound = 1.0 / np.sqrt(fanIn)
    weight = rng.uniform(-bound, bound, size=(fanIn, fanOut))
    bias = rng.uniform(-bound, bound, size=(fanOut,))
    return Layer(weight, bias)


#Builds a freshly initialized model for the given mode.
def buildModel(mode, inputDim, hiddenSizes=None, numClasses=0, slope=DEFAULT_SLOPE, seed=0):
    mode = Mode.parse(mode)
    if hiddenSizes is None:
        width = DEFAULT_WIDTH_2D if inputDim <= 2 else DEFAULT_WIDTH_RASTER
        hiddenSizes = [width] * DEFAULT_HIDDEN_LAYERS
    if inputDim < 1 or not hiddenSizes or min(hiddenSizes) < 1:
        raise ConfigError("invalid architecture: inputDim=%r hiddenSizes=%r" % (inputDim, hiddenSizes))
    if mode != Mode.UNCOND and numClasses < 1:
        raise ConfigError("%s mode needs labelled data (numClasses >= 1)" % mode.value)

    rng = np.random.default_rng(seed)
    sizes = [inputDim] + list(hiddenSizes)
    featureLayers = [_initLayer(sizes[i], sizes[i + 1], rng) for i in range(len(hiddenSizes))]
    classifierHead = _initLayer(sizes[-1], numClasses, rng) if mode in (Mode.MJEM, Mode.LSEJEM) else None
    energyHead = _initLayer(sizes[-1], 1, rng) if mode in (Mode.UNCOND, Mode.MJEM) else None
    return EnergyModel(mode, featureLayers, classifierHead, energyHead, slope=slope, seed=seed)


def _checkInput(model, x):
    x = asTensor(x)
    if len(x.shape) != 2 or x.shape[1] != model.inputDim:
        raise ShapeError("model expects [B, %d] inputs, got %s" % (model.inputDim, x.shape))
    return x


#Penultimate-layer activations: every feature layer followed by its leaky ReLU.
def features(model, x):
    h = _checkInput(model, x)
    for layer in model.featureLayers:
        h = leakyRelu(affine(h, layer.weight, layer.bias), model.slope)
    return h


def logits(model, x):
    if model.classifierHead is None:
        raise ConfigError("%s mode has no classifier head" % model.mode.value)
    h = features(model, x)
    return affine(h, model.classifierHead.weight, model.classifierHead.bias)


#Scalar energy per row. The energy head is a raw affine output; lsejem mode uses -logSumExp of the logits.
def energy(model, x):
    if model.mode == Mode.LSEJEM:
        return neg(logSumExp(logits(model, x)))
    if model.energyHead is None:
        raise ConfigError("%s mode has no energy head" % model.mode.value)
    h = features(model, x)
    out = affine(h, model.energyHead.weight, model.energyHead.bias)
    return reshape(out, (out.shape[0],))


#Softmax over the classifier logits.
def classPosterior(model, x):
    if model.classifierHead is None:
        raise ConfigError("class posterior is undefined in %s mode" % model.mode.value)
    return softmax(logits(model, x))


#Returns the argmax class for each row.
def predict(model, x):
    return np.argmax(logits(model, x).values, axis=1)


#Copies every parameter into an independent model, for frozen snapshots.
def cloneModel(model):
    def copyLayer(layer):
        return None if layer is None else Layer(layer.weight.values.copy(), layer.bias.values.copy())
    return EnergyModel(model.mode, [copyLayer(layer) for layer in model.featureLayers], copyLayer(model.classifierHead), copyLayer(model.energyHead), slope=model.slope, seed=model.seed)


################## CHECKPOINT IO ##################

def encodeHeader(header):
    return np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)


def decodeHeader(array):
    return json.loads(bytes(np.asarray(array, dtype=np.uint8)).decode("utf-8"))


#Named little-endian float64 arrays for every parameter, keyed "param/<name>".
def modelArrays(model):
    return {"param/" + name : tensor.values.astype("<f8") for name, tensor in model.namedParameters()}


#Rebuilds a model from a checkpoint header and its parameter arrays.
def modelFromArrays(header, arrays):
    try:
        model = buildModel(header["mode"], header["inputDim"], header["hiddenSizes"], header["numClasses"], header["slope"], header.get("seed") or 0)
        for name, tensor in model.namedParameters():
            stored = np.asarray(arrays["param/" + name], dtype=np.float64)
            if stored.shape != tensor.values.shape:
                raise DataError("checkpoint parameter %s has shape %s, expected %s" % (name, stored.shape, tensor.values.shape))
            tensor.values = stored.copy()
    except KeyError as missing:
        raise DataError("checkpoint is missing %s" % missing)
    model.seed = header.get("seed")
    return model


#Writes the model alone: a JSON header plus its named parameter arrays.
def saveModel(model, path):
    arrays = modelArrays(model)
    arrays["header"] = encodeHeader({"kind" : "model", "model" : model.toDict()})
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    LOGGER.info("Saved model to %s", path)
    return path


def loadModel(path):
    try:
        with np.load(path) as stored:
            arrays = {key : stored[key] for key in stored.files}
    except (OSError, ValueError) as error:
        raise DataError("unable to read checkpoint %s: %s" % (path, error))
    if "header" not in arrays:
        raise DataError("checkpoint %s has no header" % path)
    header = decodeHeader(arrays["header"])
    return modelFromArrays(header["model"], arrays)
