#DeskEBM
#Energy-based model training toolkit

#REPLAY BUFFER MODEL - Fixed capacity store of past negative samples, used to warm start SGLD chains.

import numpy as np

from App.errors import ConfigError

DEFAULT_CAPACITY = 10000
DEFAULT_REINIT_PROB = 0.05


class ReplayBuffer:
    def __init__(self, dim, capacity=DEFAULT_CAPACITY, reinitProb=DEFAULT_REINIT_PROB):
        if capacity < 1:
            raise ConfigError("buffer capacity must be positive")
        if not 0.0 <= reinitProb <= 1.0:
            raise ConfigError("reinitialization probability must lie in [0, 1]")
        self.dim = int(dim)
        self.capacity = int(capacity)
        self.reinitProb = float(reinitProb)
        self.entries = np.zeros((self.capacity, self.dim))
        self.count = 0

    def __len__(self):
        return self.count

    @property
    def full(self):
        return self.count == self.capacity

    #Read-only copy of the filled rows.
    def snapshot(self):
        rows = self.entries[:self.count].copy()
        rows.setflags(write=False)
        return rows

    def toDict(self):
        return {"dim" : self.dim, "capacity" : self.capacity, "reinitProb" : self.reinitProb, "count" : self.count}
