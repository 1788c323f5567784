#DeskEBM
#Energy-based model training toolkit

#EVALUATION REPORT MODEL - Sample quality and energy statistics of a trained model.

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class EvalReport:
    mmd: float
    bandwidth: float
    meanGap: np.ndarray
    covFrobeniusGap: float
    #-E statistics (mean, std, median) for x_pos, x_neg, x_init and uniform noise.
    energyStats: dict = field(default_factory=dict)
    accuracy: Optional[float] = None
    #MMD between two disjoint halves of the reference data.
    mmdBaseline: Optional[float] = None

    def toDict(self):
        return {
            "mmd" : self.mmd,
            "bandwidth" : self.bandwidth,
            "mmdBaseline" : self.mmdBaseline,
            "meanGap" : [float(v) for v in self.meanGap],
            "covFrobeniusGap" : self.covFrobeniusGap,
            "energyStats" : self.energyStats,
            "accuracy" : self.accuracy
        }
