#DeskEBM
#Energy-based model training toolkit

#INIT DISTRIBUTION MODELS - The distributions SGLD chains start from.

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

#Canonical data range; initial samples are clamped to it unless clamping is switched off.
DEFAULT_CLAMP = (-1.0, 1.0)


#A single Gaussian fitted to the whole training set. Samples are mean + L z, so their covariance is L L^T = Sigma + epsReg I.
@dataclass
class GaussianInit:
    mean: np.ndarray
    cholFactor: np.ndarray
    epsReg: float
    clampRange: Optional[Tuple[float, float]] = DEFAULT_CLAMP

    kind = "gaussian"

    @property
    def dim(self):
        return int(self.mean.shape[0])

    #The fitted covariance, without the regularizing ridge.
    @property
    def covariance(self):
        return self.cholFactor @ self.cholFactor.T - self.epsReg * np.eye(self.dim)

    @property
    def storedFloats(self):
        return self.dim + self.dim * (self.dim + 1) // 2

    def toDict(self):
        return {"kind" : self.kind, "dim" : self.dim, "epsReg" : self.epsReg, "clampRange" : self.clampRange}


#One Gaussian per class, weighted by class frequency.
@dataclass
class MixtureInit:
    components: List[Tuple[int, GaussianInit]]
    weights: np.ndarray
    clampRange: Optional[Tuple[float, float]] = DEFAULT_CLAMP

    kind = "mixture"

    @property
    def dim(self):
        return self.components[0][1].dim

    @property
    def epsReg(self):
        return self.components[0][1].epsReg

    @property
    def storedFloats(self):
        return sum(component.storedFloats for _, component in self.components)

    def toDict(self):
        return {"kind" : self.kind, "dim" : self.dim, "epsReg" : self.epsReg, "classes" : [label for label, _ in self.components], "weights" : [float(w) for w in self.weights]}


#Uniform noise over [lo, hi]^D, the baseline starting point.
@dataclass
class UniformInit:
    lo: float
    hi: float
    dim: int
    clampRange: Optional[Tuple[float, float]] = field(default=None)

    kind = "uniform"
    epsReg = 0.0

    @property
    def storedFloats(self):
        return 2

    def toDict(self):
        return {"kind" : self.kind, "dim" : self.dim, "lo" : self.lo, "hi" : self.hi}
