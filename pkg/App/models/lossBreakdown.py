#DeskEBM
#Energy-based model training toolkit

#LOSS BREAKDOWN MODEL - The per-step loss terms and energy statistics that training logs.

import math
from dataclasses import dataclass, field
from typing import Optional

from App.models.tensor import Tensor

#Column order of the per-step metrics CSV.
METRIC_COLUMNS = ("iter", "clf_loss", "gen_loss", "e_pos_mean", "e_neg_mean", "e_pos_sq_mean", "e_neg_sq_mean", "acc")


@dataclass
class LossBreakdown:
    genLoss: float
    ePosMean: float
    eNegMean: float
    ePosSqMean: float
    eNegSqMean: float
    total: float
    clfLoss: Optional[float] = None
    acc: Optional[float] = None
    iteration: Optional[int] = None
    #The differentiable total, kept for the backward pass and left out of comparisons.
    objective: Optional[Tensor] = field(default=None, repr=False, compare=False)

    #Absolute gap between mean positive and mean negative energy.
    @property
    def energyGap(self):
        return abs(self.ePosMean - self.eNegMean)

    @property
    def finite(self):
        values = [self.genLoss, self.ePosMean, self.eNegMean, self.ePosSqMean, self.eNegSqMean, self.total]
        if self.clfLoss is not None:
            values.append(self.clfLoss)
        return all(math.isfinite(v) for v in values)

    #One metrics CSV row. Floats are written with repr so reruns compare bitwise.
    def toRow(self):
        def fmt(value):
            return "" if value is None else repr(float(value))
        return [str(self.iteration if self.iteration is not None else ""), fmt(self.clfLoss), fmt(self.genLoss), fmt(self.ePosMean), fmt(self.eNegMean), fmt(self.ePosSqMean), fmt(self.eNegSqMean), fmt(self.acc)]

    def toDict(self):
        return {
            "iter" : self.iteration,
            "clfLoss" : self.clfLoss,
            "genLoss" : self.genLoss,
            "ePosMean" : self.ePosMean,
            "eNegMean" : self.eNegMean,
            "ePosSqMean" : self.ePosSqMean,
            "eNegSqMean" : self.eNegSqMean,
            "total" : self.total,
            "acc" : self.acc
        }
