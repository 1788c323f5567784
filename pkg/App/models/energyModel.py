#DeskEBM
#Energy-based model training toolkit

#ENERGY MODEL - A feed-forward feature trunk with an optional classifier head and an optional scalar energy head.

from enum import Enum

from App.errors import ConfigError
from App.models.tensor import Tensor


#The three configurations an energy model can take.
class Mode(str, Enum):
    UNCOND = "uncond"
    MJEM = "mjem"
    LSEJEM = "lsejem"

    @classmethod
    def parse(cls, value):
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError("unknown mode %r; expected one of uncond, mjem, lsejem" % value)


#A fully connected layer: weight [fanIn, fanOut] and bias [fanOut].
class Layer:
    def __init__(self, weight, bias):
        self.weight = weight if isinstance(weight, Tensor) else Tensor(weight, requiresGrad=True)
        self.bias = bias if isinstance(bias, Tensor) else Tensor(bias, requiresGrad=True)
        self.weight.requiresGrad = True
        self.bias.requiresGrad = True

    @property
    def fanIn(self):
        return self.weight.shape[0]

    @property
    def fanOut(self):
        return self.weight.shape[1]


class EnergyModel:
    def __init__(self, mode, featureLayers, classifierHead=None, energyHead=None, slope=0.2, seed=None):
        self.mode = Mode.parse(mode)
        self.featureLayers = list(featureLayers)
        self.classifierHead = classifierHead
        self.energyHead = energyHead
        self.slope = slope
        self.seed = seed
        self.validate()

    #Checks the head layout required by the mode, and that consecutive layers chain.
    def validate(self):
        if not self.featureLayers:
            raise ConfigError("an energy model needs at least one feature layer")
        if self.mode == Mode.UNCOND and (self.energyHead is None or self.classifierHead is not None):
            raise ConfigError("uncond mode needs an energy head and no classifier head")
        if self.mode == Mode.MJEM and (self.energyHead is None or self.classifierHead is None):
            raise ConfigError("mjem mode needs both a classifier head and an energy head")
        if self.mode == Mode.LSEJEM and (self.classifierHead is None or self.energyHead is not None):
            raise ConfigError("lsejem mode needs a classifier head and no energy head")

        previous = self.featureLayers[0].fanIn
        for layer in self.featureLayers:
            if layer.fanIn != previous:
                raise ConfigError("feature layers do not chain: %d != %d" % (layer.fanIn, previous))
            previous = layer.fanOut
        for head in (self.classifierHead, self.energyHead):
            if head is not None and head.fanIn != previous:
                raise ConfigError("head expects %d features, trunk gives %d" % (head.fanIn, previous))
        if self.energyHead is not None and self.energyHead.fanOut != 1:
            raise ConfigError("the energy head must have a single output")

    @property
    def inputDim(self):
        return self.featureLayers[0].fanIn

    @property
    def featureDim(self):
        return self.featureLayers[-1].fanOut

    @property
    def hiddenSizes(self):
        return [layer.fanOut for layer in self.featureLayers]

    @property
    def numClasses(self):
        return 0 if self.classifierHead is None else self.classifierHead.fanOut

    #Returns every parameter tensor under a stable name, in a fixed order.
    def namedParameters(self):
        named = []
        for i, layer in enumerate(self.featureLayers):
            named.append(("feature.%d.weight" % i, layer.weight))
            named.append(("feature.%d.bias" % i, layer.bias))
        if self.classifierHead is not None:
            named.append(("classifier.weight", self.classifierHead.weight))
            named.append(("classifier.bias", self.classifierHead.bias))
        if self.energyHead is not None:
            named.append(("energy.weight", self.energyHead.weight))
            named.append(("energy.bias", self.energyHead.bias))
        return named

    def parameters(self):
        return [tensor for _, tensor in self.namedParameters()]

    def zeroGrad(self):
        for tensor in self.parameters():
            tensor.zeroGrad()

    #Describes the architecture for checkpoint headers.
    def toDict(self):
        return {
            "mode" : self.mode.value,
            "inputDim" : self.inputDim,
            "hiddenSizes" : self.hiddenSizes,
            "numClasses" : self.numClasses,
            "slope" : self.slope,
            "seed" : self.seed
        }

    def __repr__(self):
        return "EnergyModel(%s)" % self.toDict()
