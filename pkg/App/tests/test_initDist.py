import pytest, logging
import numpy as np

from App.errors import ConfigError, DataError, MalformedHeaderError, TruncatedPayloadError
from App.models.initDist import GaussianInit, MixtureInit, UniformInit
from App.controllers.initDist import INIT_HEADER, KIND_CODES, choleskyFactor, fitGaussian, fitPerClass, fitUniform, initFromName, sampleInit, initToBytes, initFromBytes, saveInit, loadInit

LOGGER = logging.getLogger(__name__)

########## Unit Tests ##########
# Unit Test 1: the fitted mean and covariance (divided by N) match numpy, and the ridge is removed from the reported covariance.
def testFitGaussianMoments():
    data = np.random.default_rng(0).normal(size=(200, 3)) * [0.3, 0.1, 0.2]
    dist = fitGaussian(data, epsReg=1e-4, clampRange=None)
    assert np.allclose(dist.mean, data.mean(axis=0))
    assert np.allclose(dist.covariance, np.cov(data, rowvar=False, bias=True))
    assert np.array_equal(dist.cholFactor, np.tril(dist.cholFactor))

# Unit Test 2: a single repeated point still fits thanks to the ridge.
def testFitDegenerateData():
    dist = fitGaussian(np.full((10, 2), 0.5), epsReg=1e-4, clampRange=None)
    assert np.allclose(dist.cholFactor, np.eye(2) * 1e-2)

# Unit Test 3: empty or non-finite data and non-positive ridges are rejected.
def testFitGaussianErrors():
    with pytest.raises(DataError):
        fitGaussian(np.zeros((0, 2)))
    with pytest.raises(DataError):
        fitGaussian(np.array([[0.0, np.nan]]))
    with pytest.raises(ConfigError):
        fitGaussian(np.zeros((3, 2)), epsReg=0.0)

# Unit Test 4: a matrix that is not positive definite reports its failing pivot.
def testCholeskyPivot():
    with pytest.raises(DataError) as error:
        choleskyFactor(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert "pivot 2" in str(error.value)

# Unit Test 5: per-class fitting gives one weighted component per class.
def testFitPerClass():
    rng = np.random.default_rng(1)
    data = np.vstack([rng.normal(-0.5, 0.05, size=(30, 2)), rng.normal(0.5, 0.05, size=(10, 2))])
    labels = np.array([0] * 30 + [1] * 10)
    dist = fitPerClass(data, labels, clampRange=None)
    assert [label for label, _ in dist.components] == [0, 1]
    assert np.allclose(dist.weights, [0.75, 0.25])
    assert np.allclose(dist.components[1][1].mean, data[30:].mean(axis=0))
    with pytest.raises(DataError):
        fitPerClass(data, labels, numClasses=3)

# Unit Test 6: samples are clamped into the data range by default.
def testSampleInitClamped():
    dist = fitGaussian(np.random.default_rng(2).normal(0.9, 0.5, size=(100, 2)))
    samples = sampleInit(dist, 500, np.random.default_rng(3))
    assert samples.shape == (500, 2) and samples.min() >= -1.0 and samples.max() <= 1.0

# Unit Test 7: uniform p0 covers [lo, hi]^D.
def testUniformInit():
    dist = fitUniform(lo=-1.0, hi=1.0, dim=3)
    samples = sampleInit(dist, 1000, np.random.default_rng(4))
    assert samples.shape == (1000, 3) and samples.min() >= -1.0 and samples.max() <= 1.0
    with pytest.raises(ConfigError):
        fitUniform(lo=1.0, hi=1.0, dim=2)

# Unit Test 8: zero samples is an empty array, not an error.
def testSampleZero():
    assert sampleInit(fitUniform(dim=2), 0, np.random.default_rng(0)).shape == (0, 2)

# Unit Test 9: initializers are picked by name; mixture needs labels.
def testInitFromName(eightGaussians):
    assert isinstance(initFromName("informative", eightGaussians), GaussianInit)
    assert isinstance(initFromName("mixture", eightGaussians), MixtureInit)
    assert isinstance(initFromName("uniform", eightGaussians), UniformInit)
    with pytest.raises(ConfigError):
        initFromName("pretrained", eightGaussians)

########## Integration Tests ##########
# Integration Test 1: fitting recovers a known 2D Gaussian, and sampling the fit reproduces its moments.
def testInformativeFidelity():
    rng = np.random.default_rng(7)
    mu = np.array([0.2, -0.1])
    sigma = np.array([[0.04, 0.01], [0.01, 0.02]])
    data = rng.multivariate_normal(mu, sigma, size=100000)
    dist = fitGaussian(data, clampRange=None)
    assert np.all(np.abs(dist.mean - mu) < 0.01)
    assert np.linalg.norm(dist.covariance - sigma) < 0.02
    samples = sampleInit(dist, 100000, np.random.default_rng(8))
    assert np.all(np.abs(samples.mean(axis=0) - mu) < 0.01)
    assert np.linalg.norm(np.cov(samples, rowvar=False) - sigma) < 0.02

# Integration Test 2: every init kind survives a save and load unchanged.
@pytest.mark.parametrize("name", ["informative", "mixture", "uniform"])
def testInitFileRoundTrip(tmp_path, eightGaussians, name):
    dist = initFromName(name, eightGaussians)
    path = str(tmp_path / "init.ebmi")
    saveInit(dist, path)
    restored = loadInit(path)
    assert restored.kind == dist.kind and restored.dim == dist.dim
    first = sampleInit(dist, 50, np.random.default_rng(1))
    second = sampleInit(restored, 50, np.random.default_rng(1))
    assert np.array_equal(first, second)

# Integration Test 3: corrupted init files give distinct data errors.
def testInitFileCorruption(eightGaussians):
    payload = initToBytes(initFromName("informative", eightGaussians))
    with pytest.raises(MalformedHeaderError):
        initFromBytes(b"XXXX" + payload[4:])
    with pytest.raises(TruncatedPayloadError):
        initFromBytes(payload[:-8])
    with pytest.raises(MalformedHeaderError):
        initFromBytes(payload[:10])

# Integration Test 4: the three-point hand example, and a Cholesky factor that rebuilds the ridged covariance.
def testHandCovariance():
    data = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    dist = fitGaussian(data, epsReg=1e-4, clampRange=None)
    assert np.allclose(dist.mean, [2.0 / 3.0, 2.0 / 3.0])
    assert np.allclose(dist.covariance, [[8.0 / 9.0, -4.0 / 9.0], [-4.0 / 9.0, 8.0 / 9.0]])
    rebuilt = dist.cholFactor @ dist.cholFactor.T
    assert np.linalg.norm(rebuilt - (dist.covariance + 1e-4 * np.eye(2))) < 1e-10

# Integration Test 5: per-class components land on their clusters.
def testMixtureSeparatesClusters():
    rng = np.random.default_rng(9)
    data = np.vstack([rng.normal(-5.0, 1.0, size=(1000, 2)), rng.normal(5.0, 1.0, size=(1000, 2))])
    dist = fitPerClass(data, np.repeat([0, 1], 1000), clampRange=None)
    assert np.all(np.abs(dist.components[0][1].mean + 5.0) < 0.5)
    assert np.all(np.abs(dist.components[1][1].mean - 5.0) < 0.5)
    assert np.isclose(np.sum(dist.weights), 1.0, atol=1e-12)

# Integration Test 6: fitting A x + b gives mean A mu + b and covariance A Sigma A^T.
def testFitGaussianAffine():
    data = np.random.default_rng(10).normal(size=(500, 2)) * [0.4, 0.2]
    A = np.array([[1.5, -0.5], [0.25, 2.0]])
    b = np.array([0.3, -0.7])
    base = fitGaussian(data, clampRange=None)
    moved = fitGaussian(data @ A.T + b, clampRange=None)
    assert np.allclose(moved.mean, A @ base.mean + b)
    assert np.allclose(moved.covariance, A @ base.covariance @ A.T, atol=1e-10)

# Integration Test 7: a Gaussian stores D + D(D+1)/2 floats, and its file holds exactly those.
@pytest.mark.parametrize("dim", [1, 2, 5])
def testGaussianStorage(dim):
    dist = fitGaussian(np.random.default_rng(dim).normal(size=(50, dim)))
    assert dist.storedFloats == dim + dim * (dim + 1) // 2
    payload = initToBytes(dist)
    assert len(payload) - INIT_HEADER.size == 12 + 8 * dist.storedFloats

# Integration Test 8: samples of N(0, [[2, 1], [1, 2]]) reproduce its covariance.
def testSampleKnownCovariance():
    sigma = np.array([[2.0, 1.0], [1.0, 2.0]])
    dist = GaussianInit(mean=np.zeros(2), cholFactor=np.linalg.cholesky(sigma + 1e-4 * np.eye(2)), epsReg=1e-4, clampRange=None)
    samples = sampleInit(dist, 100000, np.random.default_rng(12))
    assert np.all(np.abs(samples.mean(axis=0)) < 0.03)
    assert np.abs(np.cov(samples, rowvar=False) - sigma).max() < 0.05

# Integration Test 9: component counts that contradict the kind are malformed headers.
def testInitComponentCount(eightGaussians):
    def withCount(payload, kind, count):
        fields = list(INIT_HEADER.unpack_from(payload, 0))
        fields[3], fields[4] = KIND_CODES[kind], count
        return INIT_HEADER.pack(*fields) + payload[INIT_HEADER.size:]

    single = initToBytes(initFromName("informative", eightGaussians))
    with pytest.raises(MalformedHeaderError):
        initFromBytes(withCount(single, "gaussian", 0))
    with pytest.raises(MalformedHeaderError):
        initFromBytes(withCount(single, "gaussian", 2))
    with pytest.raises(MalformedHeaderError):
        initFromBytes(withCount(single, "mixture", 0))
