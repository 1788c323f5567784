import pytest, logging
import numpy as np

from App.errors import ConfigError, ShapeError
from App.models.dataset import TaggedBatch
from App.models.tensor import Tensor
from App.controllers.tensor import backward, gradient
from App.controllers.energyNet import buildModel
from App.controllers.objectives import cdL2Loss, generativeLoss, jointLoss, injectNoise

LOGGER = logging.getLogger(__name__)

########## Unit Tests ##########
# Unit Test 1: the hand example E+ = 1, E- = 2, reg 0.1 gives 1 - 2 + 0.1 * (1 + 4) = -0.5.
def testCdL2HandExample():
    assert np.isclose(cdL2Loss(np.array([1.0]), np.array([2.0]), 0.1).item(), -0.5)

# Unit Test 2: with no regularization the loss is the mean energy difference.
def testCdL2Unregularized():
    loss = cdL2Loss(np.array([1.0, 3.0]), np.array([0.0, 2.0]), 0.0)
    assert np.isclose(loss.item(), 1.0)

# Unit Test 3: mismatched energy vectors and negative coefficients are rejected.
def testCdL2Errors():
    with pytest.raises(ShapeError):
        cdL2Loss(np.zeros(3), np.zeros(2), 0.1)
    with pytest.raises(ConfigError):
        cdL2Loss(np.zeros(2), np.zeros(2), -0.1)

# Unit Test 4: the likelihood loss backpropagates into every parameter and reports consistent energy statistics.
def testGenerativeLossGradient():
    model = buildModel("uncond", 2, [6], seed=0)
    rng = np.random.default_rng(1)
    breakdown = generativeLoss(model, rng.uniform(-1, 1, (8, 2)), rng.uniform(-1, 1, (8, 2)), 0.05)
    model.zeroGrad()
    backward(breakdown.objective)
    assert all(tensor.grad is not None for tensor in model.parameters())
    assert breakdown.clfLoss is None and breakdown.total == breakdown.genLoss
    assert np.isfinite(breakdown.ePosSqMean) and breakdown.ePosSqMean >= breakdown.ePosMean ** 2 - 1e-12

# Unit Test 5: the joint loss is cross entropy plus the likelihood term, and reports accuracy.
def testJointLossDecomposition():
    model = buildModel("mjem", 2, [6], numClasses=3, seed=2)
    rng = np.random.default_rng(3)
    clf = TaggedBatch(rng.uniform(-1, 1, (10, 2)), rng.integers(0, 3, 10), augmented=True)
    gen = TaggedBatch(rng.uniform(-1, 1, (8, 2)))
    breakdown = jointLoss(model, clf, None, gen, rng.uniform(-1, 1, (8, 2)), 0.05)
    assert np.isclose(breakdown.total, breakdown.clfLoss + breakdown.genLoss)
    assert np.isclose(breakdown.objective.item(), breakdown.total)
    assert 0.0 <= breakdown.acc <= 1.0

# Unit Test 6: an augmented likelihood batch breaks the two-batch contract unless the ablation allows it.
def testAugmentedGenBatchRejected():
    model = buildModel("uncond", 2, [6], seed=0)
    gen = TaggedBatch(np.zeros((4, 2)), augmented=True)
    with pytest.raises(ConfigError):
        generativeLoss(model, gen, np.zeros((4, 2)), 0.05)
    assert generativeLoss(model, gen, np.zeros((4, 2)), 0.05, allowAugmented=True).finite

# Unit Test 7: the joint loss needs a classifier head and labels.
def testJointLossRequirements():
    x = np.zeros((4, 2))
    with pytest.raises(ConfigError):
        jointLoss(buildModel("uncond", 2, [4]), x, np.zeros(4, dtype=int), x, x, 0.05)
    with pytest.raises(ConfigError):
        jointLoss(buildModel("lsejem", 2, [4], numClasses=2), x, None, x, x, 0.05)

# Unit Test 8: sigma = 0 leaves data unchanged; otherwise the noise has the requested scale.
def testInjectNoise():
    x = np.random.default_rng(0).uniform(-1, 1, (2000, 2))
    assert np.array_equal(injectNoise(x, 0.0, np.random.default_rng(1)), x)
    noisy = injectNoise(x, 0.1, np.random.default_rng(1))
    assert abs(np.std(noisy - x) - 0.1) < 0.01
    tagged = injectNoise(TaggedBatch(x, None, True), 0.1, np.random.default_rng(1))
    assert tagged.augmented and np.array_equal(tagged.values, noisy)
    with pytest.raises(ConfigError):
        injectNoise(x, -1.0, np.random.default_rng(1))

########## Integration Tests ##########
# Integration Test 1: a million scalar draws shift the mean by under 0.001 and add sigma^2 of variance; two passes add their variances.
def testInjectNoiseMoments():
    x = np.zeros(1000000)
    once = injectNoise(x, 0.1, np.random.default_rng(2))
    assert abs(once.mean()) < 0.001
    assert 0.0097 <= once.var() <= 0.0103
    twice = injectNoise(once, 0.2, np.random.default_rng(3))
    assert abs(twice.var() - 0.05) < 0.05 * 0.03

# Integration Test 2: d/dE+ is (1 + 2rE+)/B and d/dE- is (-1 + 2rE-)/B.
def testCdL2Gradient():
    reg = 0.3
    ePos = Tensor(np.array([0.5, -1.0, 2.0, 0.0]), requiresGrad=True)
    eNeg = Tensor(np.array([1.5, 0.25, -0.75, 3.0]), requiresGrad=True)
    gradPos, gradNeg = gradient(cdL2Loss(ePos, eNeg, reg), [ePos, eNeg])
    assert np.allclose(gradPos, (1.0 + 2.0 * reg * ePos.values) / 4.0)
    assert np.allclose(gradNeg, (-1.0 + 2.0 * reg * eNeg.values) / 4.0)

# Integration Test 3: the loss is smallest at E+ = -1/(2r), E- = 1/(2r), where it equals -1/(2r).
def testCdL2Minimizer():
    reg = 0.1
    ePos = Tensor(np.full(3, -1.0 / (2.0 * reg)), requiresGrad=True)
    eNeg = Tensor(np.full(3, 1.0 / (2.0 * reg)), requiresGrad=True)
    loss = cdL2Loss(ePos, eNeg, reg)
    assert np.isclose(loss.item(), -5.0)
    gradPos, gradNeg = gradient(loss, [ePos, eNeg])
    assert np.allclose(gradPos, 0.0) and np.allclose(gradNeg, 0.0)
    rng = np.random.default_rng(4)
    for _ in range(20):
        nudged = cdL2Loss(ePos.values + rng.normal(scale=0.5, size=3), eNeg.values + rng.normal(scale=0.5, size=3), reg)
        assert nudged.item() > loss.item()
