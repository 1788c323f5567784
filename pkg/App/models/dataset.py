#DeskEBM
#Energy-based model training toolkit

#DATASET MODEL - Samples, optional labels and the declared value range of a training set.

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from App.errors import DataError, LabelRangeError

#Dataset kinds, which decide augmentation and SGLD clamping.
KIND_2D = "2d"
KIND_RASTER = "raster"


@dataclass
class Dataset:
    samples: np.ndarray
    labels: Optional[np.ndarray] = None
    range: Tuple[float, float] = (-1.0, 1.0)
    name: str = "dataset"
    kind: str = KIND_2D
    shape: Optional[Tuple[int, int, int]] = None
    numClasses: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise DataError("dataset samples must be [N, D], got shape %s" % (self.samples.shape,))
        lo, hi = self.range
        if self.samples.size and (self.samples.min() < lo or self.samples.max() > hi):
            raise DataError("dataset %s has samples outside its range [%g, %g]" % (self.name, lo, hi))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.samples.shape[0],):
                raise DataError("dataset %s needs one label per sample" % self.name)
            if self.numClasses == 0 and self.labels.size:
                self.numClasses = int(self.labels.max()) + 1
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.numClasses):
                raise LabelRangeError("dataset %s has labels outside [0, %d)" % (self.name, self.numClasses))

    def __len__(self):
        return int(self.samples.shape[0])

    @property
    def dim(self):
        return int(self.samples.shape[1])

    @property
    def labelled(self):
        return self.labels is not None and self.numClasses > 0

    def toDict(self):
        return {
            "name" : self.name,
            "kind" : self.kind,
            "size" : len(self),
            "dim" : self.dim,
            "range" : list(self.range),
            "shape" : None if self.shape is None else list(self.shape),
            "numClasses" : self.numClasses
        }


#A batch tagged with whether it went through augmentation, so the loss can check the two-batch contract.
@dataclass
class TaggedBatch:
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    augmented: bool = False
