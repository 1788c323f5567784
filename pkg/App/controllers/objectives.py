#DeskEBM
#Energy-based model training toolkit

#OBJECTIVE CONTROLLERS - L2-regularized contrastive divergence, the joint classification + likelihood objective, and injected data noise.

import numpy as np

from App.errors import ConfigError, ShapeError
from App.models.dataset import TaggedBatch
from App.models.energyModel import Mode
from App.models.lossBreakdown import LossBreakdown
from App.models.tensor import Tensor
from App.controllers.tensor import asTensor, add, sub, square, scale, mean, softmaxCrossEntropy
from App.controllers.energyNet import energy, logits

DEFAULT_REG_COEFF = 0.05


#Mean over the batch of E+ - E- + regCoeff * (E+^2 + E-^2).
def cdL2Loss(ePos, eNeg, regCoeff):
    ePos, eNeg = asTensor(ePos), asTensor(eNeg)
    if ePos.shape != eNeg.shape or len(ePos.shape) != 1:
        raise ShapeError("positive and negative energies must be equal-length vectors, got %s and %s" % (ePos.shape, eNeg.shape))
    if regCoeff < 0:
        raise ConfigError("reg_coeff must be non-negative, got %r" % regCoeff)
    contrast = sub(ePos, eNeg)
    if regCoeff:
        contrast = add(contrast, scale(add(square(ePos), square(eNeg)), regCoeff))
    return mean(contrast)


#Unwraps a batch, refusing an augmented batch on the likelihood side unless the ablation allows it.
def _likelihoodBatch(batch, allowAugmented):
    if isinstance(batch, TaggedBatch):
        if batch.augmented and not allowAugmented:
            raise ConfigError("the likelihood batch must not be augmented")
        return batch.values
    return batch


def _classifierBatch(batch, labels):
    if isinstance(batch, TaggedBatch):
        return batch.values, batch.labels if labels is None else labels
    return batch, labels


def _energyStats(ePos, eNeg):
    return {
        "ePosMean" : float(np.mean(ePos.values)),
        "eNegMean" : float(np.mean(eNeg.values)),
        "ePosSqMean" : float(np.mean(ePos.values ** 2)),
        "eNegSqMean" : float(np.mean(eNeg.values ** 2))
    }


#Likelihood-only objective, used on its own in uncond mode.
def generativeLoss(model, xGenPos, xGenNeg, regCoeff, allowAugmented=False):
    xPos = _likelihoodBatch(xGenPos, allowAugmented)
    xNeg = _likelihoodBatch(xGenNeg, allowAugmented)
    ePos = energy(model, xPos)
    eNeg = energy(model, Tensor(np.asarray(asTensor(xNeg).values)))
    genLoss = cdL2Loss(ePos, eNeg, regCoeff)
    value = genLoss.item()
    return LossBreakdown(genLoss=value, total=value, objective=genLoss, **_energyStats(ePos, eNeg))


#Cross-entropy on the (augmented) classification batch plus the likelihood objective on the clean batch.
def jointLoss(model, xClf, y, xGenPos, xGenNeg, regCoeff, allowAugmented=False):
    if model.mode not in (Mode.MJEM, Mode.LSEJEM):
        raise ConfigError("jointLoss needs an mjem or lsejem model, got %s" % model.mode.value)
    xClf, y = _classifierBatch(xClf, y)
    if y is None:
        raise ConfigError("jointLoss needs labels for the classification batch")

    clfLogits = logits(model, xClf)
    clfLoss = softmaxCrossEntropy(clfLogits, y)
    acc = float(np.mean(np.argmax(clfLogits.values, axis=1) == np.asarray(y)))

    gen = generativeLoss(model, xGenPos, xGenNeg, regCoeff, allowAugmented)
    objective = add(clfLoss, gen.objective)
    return LossBreakdown(
        genLoss=gen.genLoss,
        clfLoss=clfLoss.item(),
        total=clfLoss.item() + gen.genLoss,
        acc=acc,
        ePosMean=gen.ePosMean,
        eNegMean=gen.eNegMean,
        ePosSqMean=gen.ePosSqMean,
        eNegSqMean=gen.eNegSqMean,
        objective=objective
    )


#Adds i.i.d. N(0, sigma^2) noise to the data. sigma = 0 hands back an unchanged copy. Off by default in training.
def injectNoise(x, sigmaData, rng):
    if sigmaData < 0:
        raise ConfigError("inject_sigma must be non-negative, got %r" % sigmaData)
    if isinstance(x, TaggedBatch):
        return TaggedBatch(injectNoise(x.values, sigmaData, rng), x.labels, x.augmented)
    if isinstance(x, Tensor):
        return Tensor(injectNoise(x.values, sigmaData, rng))
    values = np.array(x, dtype=np.float64)
    if sigmaData == 0:
        return values
    return values + sigmaData * rng.standard_normal(values.shape)
