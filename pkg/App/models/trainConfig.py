#DeskEBM
#Energy-based model training toolkit

#TRAINING CONFIGURATION MODELS - Hyper-parameters of the training loop and of the SGLD sampler.

from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

from App.errors import ConfigError
from App.models.energyModel import Mode


#SGLD settings: K steps of x - stepSize * dE/dx + noiseScale * N(0, I), optionally clamped to a range after each step.
@dataclass
class SgldConfig:
    steps: int = 10
    stepSize: float = 1.0
    noiseScale: float = 0.001
    clampRange: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("sgld_steps must be a positive integer, got %r" % self.steps)
        if not self.stepSize > 0:
            raise ConfigError("sgld_step_size must be positive, got %r" % self.stepSize)
        if not self.noiseScale >= 0:
            raise ConfigError("sgld_noise must be non-negative, got %r" % self.noiseScale)
        if self.clampRange is not None:
            lo, hi = self.clampRange
            if not hi > lo:
                raise ConfigError("sgld clamp range needs lo < hi")
            self.clampRange = (float(lo), float(hi))
        self.steps = int(self.steps)


@dataclass
class TrainConfig:
    epochs: int = 200
    itersPerEpoch: int = 390
    clfBatch: int = 128
    genBatch: int = 64
    learningRate: float = 1e-4
    momentum: float = 0.9
    sgld: SgldConfig = field(default_factory=SgldConfig)
    bufferCapacity: int = 10000
    reinitProb: float = 0.05
    regCoeff: float = 0.05
    injectSigma: float = 0.0
    mode: str = "uncond"
    seed: int = 0
    divergenceThreshold: float = 1e3
    divergenceWindow: int = 50
    init: str = "informative"
    epsReg: float = 1e-4
    clampInit: bool = True
    #"auto" clamps SGLD steps for raster data only; "none" never; "lo,hi" always.
    sgldClamp: str = "auto"
    #0 picks the default width for the data dimension.
    hiddenWidth: int = 0
    hiddenLayers: int = 3
    slope: float = 0.2
    augment: bool = True
    augmentGenBatch: bool = False
    sampleEvery: int = 1
    checkpointEvery: int = 1
    gridSamples: int = 64
    prefetch: int = 0

    def __post_init__(self):
        self.mode = Mode.parse(self.mode).value
        for name in ("epochs", "iters_per_epoch", "clf_batch", "gen_batch", "buffer_capacity", "divergence_window", "hidden_layers", "sample_every", "checkpoint_every", "grid_samples", "prefetch", "hidden_width"):
            value = getattr(self, _fieldName(name))
            if int(value) != value:
                raise ConfigError("%s must be an integer, got %r" % (name, value))
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        for name in ("iters_per_epoch", "clf_batch", "gen_batch", "buffer_capacity", "divergence_window", "hidden_layers", "sample_every", "checkpoint_every", "grid_samples"):
            if getattr(self, _fieldName(name)) < 1:
                raise ConfigError("%s must be positive" % name)
        if self.prefetch < 0 or self.hiddenWidth < 0:
            raise ConfigError("prefetch and hidden_width must be non-negative")
        if not 0.0 <= self.reinitProb <= 1.0:
            raise ConfigError("reinit_prob must lie in [0, 1], got %r" % self.reinitProb)
        if self.learningRate < 0 or self.momentum < 0 or self.regCoeff < 0 or self.injectSigma < 0:
            raise ConfigError("learning_rate, momentum, reg_coeff and inject_sigma must be non-negative")
        if not self.divergenceThreshold > 0:
            raise ConfigError("divergence_threshold must be positive")
        if not self.epsReg > 0:
            raise ConfigError("eps_reg must be positive")
        if not 0.0 <= self.slope < 1.0:
            raise ConfigError("slope must lie in [0, 1)")
        if self.init not in ("informative", "mixture", "uniform"):
            raise ConfigError("init must be informative, mixture or uniform, got %r" % self.init)

    @property
    def modeEnum(self):
        return Mode.parse(self.mode)

    def toDict(self):
        return asdict(self)


#Maps a config-file key such as iters_per_epoch onto the dataclass field itersPerEpoch.
def _fieldName(key):
    head, *rest = key.split("_")
    return head + "".join(part.capitalize() for part in rest)
