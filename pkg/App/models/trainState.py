#DeskEBM
#Energy-based model training toolkit

#TRAIN STATE MODELS - Everything a run carries between iterations, and the verdict of the divergence monitor.

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from App.models.energyModel import EnergyModel
from App.models.replayBuffer import ReplayBuffer
from App.models.trainConfig import TrainConfig, SgldConfig


#Model, buffer, init distribution and momentum buffers, plus the iteration counter and metric history.
#Randomness is drawn per iteration from (seed, stream, iteration), so seed and iteration are the whole rng state.
@dataclass
class TrainState:
    model: EnergyModel
    buffer: ReplayBuffer
    p0: object
    cfg: TrainConfig
    sgld: SgldConfig
    moments: List[np.ndarray] = field(default_factory=list)
    iteration: int = 0
    history: list = field(default_factory=list)
    #Raster shape of the training data, or None for flat vectors.
    dataShape: Optional[tuple] = None
    #Chain starts, negatives and fresh-start mask of the most recent step, kept for diagnostics.
    lastInit: Optional[np.ndarray] = field(default=None, repr=False)
    lastNegatives: Optional[np.ndarray] = field(default=None, repr=False)
    lastFreshMask: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.moments:
            self.moments = [np.zeros_like(tensor.values) for tensor in self.model.parameters()]

    @property
    def seed(self):
        return self.cfg.seed

    @property
    def epoch(self):
        return self.iteration // self.cfg.itersPerEpoch

    def toDict(self):
        return {
            "iteration" : self.iteration,
            "epoch" : self.epoch,
            "seed" : self.seed,
            "model" : self.model.toDict(),
            "buffer" : self.buffer.toDict(),
            "init" : self.p0.kind,
            "historyLength" : len(self.history)
        }


@dataclass
class DivergenceStatus:
    diverged: bool
    iteration: Optional[int] = None
    windowMean: Optional[float] = None

    @property
    def healthy(self):
        return not self.diverged

    def toDict(self):
        return {"status" : "diverged" if self.diverged else "healthy", "iteration" : self.iteration, "windowMean" : self.windowMean}
