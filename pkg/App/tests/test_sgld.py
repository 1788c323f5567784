import pytest, logging
import numpy as np

from App.errors import DivergenceError, ShapeError, TruncatedPayloadError
from App.models.replayBuffer import ReplayBuffer
from App.models.tensor import Tensor
from App.models.trainConfig import SgldConfig
from App.controllers.tensor import scale, square, rowSum, sumAll, backward
from App.controllers.energyNet import buildModel, energy
from App.controllers.initDist import fitUniform
from App.controllers.sgld import drawInit, sgldChain, push, restoreBuffer, bufferSnapshot, dumpBuffer, loadBufferDump

LOGGER = logging.getLogger(__name__)

# E(x) = |x|^2 / 2 per row.
def quadraticEnergy(x):
    return scale(rowSum(square(x)), 0.5)

########## Unit Tests ##########
# Unit Test 1: with an empty buffer every chain starts from p0.
def testDrawInitEmptyBuffer():
    buffer = ReplayBuffer(2, capacity=10, reinitProb=0.0)
    samples, fresh = drawInit(buffer, fitUniform(dim=2), 8, np.random.default_rng(0), withMask=True)
    assert samples.shape == (8, 2) and fresh.all()

# Unit Test 2: with rho = 0 and a full buffer every start is a buffer entry.
def testDrawInitFromBuffer():
    buffer = ReplayBuffer(2, capacity=4, reinitProb=0.0)
    push(buffer, np.array([[5.0, 5.0], [6.0, 6.0], [7.0, 7.0], [8.0, 8.0]]), np.random.default_rng(0))
    samples = drawInit(buffer, fitUniform(dim=2), 20, np.random.default_rng(1))
    assert set(samples[:, 0].tolist()) <= {5.0, 6.0, 7.0, 8.0}

# Unit Test 3: the buffer fills up to capacity, then replaces entries and never grows.
def testPushCapacity():
    buffer = ReplayBuffer(1, capacity=5)
    push(buffer, np.arange(3.0).reshape(3, 1), np.random.default_rng(0))
    assert len(buffer) == 3 and not buffer.full
    push(buffer, np.arange(3.0, 10.0).reshape(7, 1), np.random.default_rng(1))
    assert len(buffer) == 5 and buffer.full
    assert set(buffer.entries[:, 0].tolist()) <= set(np.arange(10.0).tolist())
    assert buffer.entries[:, 0].max() >= 5.0

# Unit Test 4: samples of the wrong width are rejected.
def testPushShapeMismatch():
    with pytest.raises(ShapeError):
        push(ReplayBuffer(2, capacity=5), np.zeros((3, 3)), np.random.default_rng(0))

# Unit Test 5: the snapshot is a read-only copy of the filled rows.
def testSnapshotReadOnly():
    buffer = ReplayBuffer(2, capacity=5)
    push(buffer, np.ones((2, 2)), np.random.default_rng(0))
    snapshot = bufferSnapshot(buffer)
    assert snapshot.shape == (2, 2)
    with pytest.raises(ValueError):
        snapshot[0, 0] = 3.0

# Unit Test 6: a noiseless chain on E = x^2/2 contracts by (1 - alpha) per step.
def testNoiselessChainClosedForm():
    x0 = np.array([[1.0, -2.0], [0.5, 3.0]])
    cfg = SgldConfig(steps=7, stepSize=0.5, noiseScale=0.0)
    out = sgldChain(quadraticEnergy, x0, cfg, np.random.default_rng(0))
    assert np.allclose(out, (0.5 ** 7) * x0, atol=1e-10, rtol=0.0)

# Unit Test 7: chains stop with a divergence error on non-finite energies, naming the step.
def testChainDivergence():
    cfg = SgldConfig(steps=5, stepSize=1.0, noiseScale=0.0)
    def explodingEnergy(x):
        return scale(rowSum(square(x)), -1e308)
    with pytest.raises(DivergenceError) as error:
        sgldChain(explodingEnergy, np.ones((2, 2)) * 10.0, cfg, np.random.default_rng(0))
    assert error.value.step is not None and error.value.step >= 1

# Unit Test 8: clamping keeps every step inside the range.
def testChainClamp():
    cfg = SgldConfig(steps=3, stepSize=10.0, noiseScale=0.0, clampRange=(-1.0, 1.0))
    out = sgldChain(quadraticEnergy, np.array([[0.9, -0.9]]), cfg, np.random.default_rng(0))
    assert out.min() >= -1.0 and out.max() <= 1.0

# Unit Test 9: running a chain leaves the model parameters and their gradients untouched.
def testChainDetachesParameters():
    model = buildModel("uncond", 2, [8, 8], seed=1)
    before = [tensor.values.copy() for tensor in model.parameters()]
    negatives = sgldChain(model, np.zeros((4, 2)), SgldConfig(steps=5, stepSize=0.1, noiseScale=0.01), np.random.default_rng(0))
    assert isinstance(negatives, np.ndarray)
    for tensor, values in zip(model.parameters(), before):
        assert np.array_equal(tensor.values, values) and tensor.grad is None
    # A loss built on the negatives has no path back through the chain.
    x = Tensor(negatives)
    backward(sumAll(square(x)))
    assert x.grad is None

########## Integration Tests ##########
# Integration Test 1: the fresh-start branch fires at rate rho, within 5 binomial standard deviations.
def testReinitFrequency():
    rho, draws = 0.05, 100000
    buffer = ReplayBuffer(2, capacity=10, reinitProb=rho)
    push(buffer, np.zeros((10, 2)), np.random.default_rng(0))
    _, fresh = drawInit(buffer, fitUniform(dim=2), draws, np.random.default_rng(1), withMask=True)
    sigma = np.sqrt(draws * rho * (1 - rho))
    assert abs(fresh.sum() - draws * rho) < 5 * sigma

# Integration Test 2: the buffer saturates at the default capacity of 10,000.
def testBufferSaturation():
    buffer = ReplayBuffer(2)
    rng = np.random.default_rng(3)
    for _ in range(200):
        push(buffer, rng.normal(size=(64, 2)), rng)
    assert buffer.capacity == 10000 and len(buffer) == 10000

# Integration Test 3: the stationary variance of the noisy chain on x^2/2 is sigma^2 / (alpha (2 - alpha)).
def testStationaryVariance():
    alpha, sigma = 0.5, 0.1
    cfg = SgldConfig(steps=50, stepSize=alpha, noiseScale=sigma)
    out = sgldChain(quadraticEnergy, np.zeros((20000, 1)), cfg, np.random.default_rng(11))
    expected = sigma ** 2 / (alpha * (2 - alpha))
    LOGGER.info("empirical variance %.5f, expected %.5f", out.var(), expected)
    assert abs(out.var() - expected) < 0.1 * expected

# Integration Test 4: a buffer dump reloads into an identical buffer.
def testBufferDumpRoundTrip(tmp_path):
    buffer = ReplayBuffer(3, capacity=20, reinitProb=0.1)
    push(buffer, np.random.default_rng(4).normal(size=(12, 3)), np.random.default_rng(5))
    path = str(tmp_path / "buffer.bin")
    dumpBuffer(buffer, path)
    rows = loadBufferDump(path)
    assert np.array_equal(rows, buffer.snapshot())
    restored = restoreBuffer(rows, 20, 0.1)
    assert len(restored) == 12 and np.array_equal(restored.snapshot(), buffer.snapshot())
    with open(path, "ab") as handle:
        handle.write(b"\x00")
    with pytest.raises(TruncatedPayloadError):
        loadBufferDump(path)

# Integration Test 5: noiseless chains with a small step lower the network energy.
def testNoiselessChainDescends():
    model = buildModel("uncond", 2, [16, 16], seed=6)
    x0 = np.random.default_rng(7).uniform(-1, 1, size=(32, 2))
    cfg = SgldConfig(steps=10, stepSize=1e-3, noiseScale=0.0)
    out = sgldChain(model, x0, cfg, np.random.default_rng(0))
    before, after = energy(model, x0).values.sum(), energy(model, out).values.sum()
    LOGGER.info("total energy %.6f -> %.6f", before, after)
    assert after < before

# Integration Test 6: a separate init stream changes only the rows drawn from p0.
def testDrawInitSeparateInitStream():
    buffer = ReplayBuffer(2, capacity=50, reinitProb=0.3)
    push(buffer, np.random.default_rng(0).normal(size=(50, 2)) + 5.0, np.random.default_rng(1))
    first, freshA = drawInit(buffer, fitUniform(dim=2), 200, np.random.default_rng(2), withMask=True, initRng=np.random.default_rng(3))
    second, freshB = drawInit(buffer, fitUniform(dim=2), 200, np.random.default_rng(2), withMask=True, initRng=np.random.default_rng(4))
    assert np.array_equal(freshA, freshB) and freshA.any() and not freshA.all()
    assert np.array_equal(first[~freshA], second[~freshA])
    assert not np.array_equal(first[freshA], second[freshA])
