import pytest, logging
import numpy as np

from App.errors import ConfigError, DataError, MalformedHeaderError, TruncatedPayloadError, LabelRangeError
from App.models.dataset import Dataset, KIND_RASTER
from App.models.trainConfig import TrainConfig
from App.controllers.datasets import SYNTH_KINDS, GRID_HEADER, synth2d, loadGrid, writeGrid, loadDataset, bytesToUnit, unitToBytes, flipRaster, translateRaster, augment, BatchLoader

LOGGER = logging.getLogger(__name__)

def rasterDataset(count=12, shape=(4, 4, 1), numClasses=3, seed=0):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(count, int(np.prod(shape)))).astype(np.uint8)
    labels = rng.integers(0, numClasses, size=count)
    return Dataset(bytesToUnit(pixels), labels, (-1.0, 1.0), "raster", KIND_RASTER, shape, numClasses)

########## Unit Tests ##########
# Unit Test 1: every synthetic kind stays inside [-1, 1]^2 and is reproducible from its seed.
@pytest.mark.parametrize("kind", SYNTH_KINDS)
def testSynthKinds(kind):
    data = synth2d(kind, 400, seed=1)
    assert data.samples.shape == (400, 2)
    assert data.samples.min() >= -1.0 and data.samples.max() <= 1.0
    assert np.array_equal(data.samples, synth2d(kind, 400, seed=1).samples)

# Unit Test 2: eight gaussians are labelled and spread evenly over the octagon's modes.
def testEightGaussiansLabels():
    data = synth2d("eight_gaussians", 803, seed=0)
    assert data.numClasses == 8
    counts = np.bincount(data.labels, minlength=8)
    assert counts.max() - counts.min() <= 1
    radii = np.linalg.norm(data.samples, axis=1)
    assert abs(np.median(radii) - 0.7) < 0.05

# Unit Test 3: two moons carry two classes; two rings and the checkerboard are unlabelled.
def testSynthLabelling():
    assert synth2d("two_moons", 100).numClasses == 2
    assert not synth2d("two_rings", 100).labelled
    assert not synth2d("checkerboard", 100).labelled

# Unit Test 4: unknown kinds and empty sizes are configuration errors.
def testSynthErrors():
    with pytest.raises(ConfigError):
        synth2d("spirals", 10)
    with pytest.raises(ConfigError):
        synth2d("two_moons", 0)

# Unit Test 5: bytes map onto [-1, 1] and back without loss.
def testByteScaling():
    values = np.arange(256, dtype=np.uint8)
    unit = bytesToUnit(values)
    assert unit[0] == -1.0 and unit[-1] == 1.0
    assert np.array_equal(unitToBytes(unit), values)

# Unit Test 6: dataset specs name a synthetic kind with an optional size and noise.
def testLoadDatasetSpec(tmp_path):
    assert len(loadDataset("two_moons:300")) == 300
    assert len(loadDataset("checkerboard")) == 8000
    assert np.array_equal(loadDataset("eight_gaussians:50:0.0").samples, loadDataset("eight_gaussians:50:0").samples)
    with pytest.raises(ConfigError):
        loadDataset("two_moons:many")
    with pytest.raises(DataError):
        loadDataset(str(tmp_path / "missing.bin"))

# Unit Test 7: flipping mirrors columns and translation fills the exposed border.
def testFlipAndTranslate():
    image = np.arange(9.0).reshape(1, 9)
    flipped = flipRaster(image, np.array([True]), (3, 3, 1))
    assert np.array_equal(flipped.reshape(3, 3), np.arange(9.0).reshape(3, 3)[:, ::-1])
    shifted = translateRaster(image, np.array([[0, 1]]), (3, 3, 1), -1.0)
    assert np.array_equal(shifted.reshape(3, 3)[:, 0], [-1.0, -1.0, -1.0])
    assert np.array_equal(shifted.reshape(3, 3)[:, 1:], np.arange(9.0).reshape(3, 3)[:, :2])

# Unit Test 8: augmentation stays inside the data range and can be switched off.
def testAugmentRange():
    raster = rasterDataset()
    out = augment(raster.samples, raster, np.random.default_rng(0))
    assert out.shape == raster.samples.shape and out.min() >= -1.0 and out.max() <= 1.0
    assert np.array_equal(augment(raster.samples, raster, np.random.default_rng(0), enabled=False), raster.samples)
    points = synth2d("two_moons", 50)
    jittered = augment(points.samples, points, np.random.default_rng(1))
    assert 0.0 < np.abs(jittered - points.samples).max() < 0.1

# Unit Test 9: the likelihood batch is clean while the classification batch is augmented.
def testBatchLoaderTwoBatches():
    cfg = TrainConfig(clfBatch=8, genBatch=6, seed=4)
    clf, gen = BatchLoader(rasterDataset(), cfg).batch(0)
    assert clf.augmented and clf.values.shape == (8, 16) and clf.labels.shape == (8,)
    assert not gen.augmented and gen.values.shape == (6, 16)
    assert all(any(np.array_equal(row, sample) for sample in rasterDataset().samples) for row in gen.values)

# Unit Test 10: unlabelled data yields no classification batch.
def testBatchLoaderUnlabelled():
    clf, gen = BatchLoader(synth2d("two_rings", 100), TrainConfig(genBatch=10)).batch(3)
    assert clf is None and gen.values.shape == (10, 2)

########## Integration Tests ##########
# Integration Test 1: grid files round trip pixels and labels exactly.
def testGridRoundTrip(tmp_path):
    data = rasterDataset(count=5, shape=(3, 2, 3), numClasses=4)
    path = str(tmp_path / "toy.ebmg")
    writeGrid(path, data.samples, data.shape, data.labels, data.numClasses)
    loaded = loadGrid(path)
    assert loaded.shape == (3, 2, 3) and loaded.numClasses == 4 and loaded.kind == KIND_RASTER
    assert np.array_equal(loaded.samples, data.samples)
    assert np.array_equal(loaded.labels, data.labels)

# Integration Test 2: corrupted grid files give distinct errors.
def testGridCorruption(tmp_path):
    path = tmp_path / "toy.ebmg"
    writeGrid(str(path), np.zeros((2, 4), dtype=np.uint8), (2, 2, 1), np.array([0, 1]), 2)
    payload = path.read_bytes()

    path.write_bytes(b"NOPE" + payload[4:])
    with pytest.raises(MalformedHeaderError):
        loadGrid(str(path))
    path.write_bytes(payload[:GRID_HEADER.size - 1])
    with pytest.raises(MalformedHeaderError):
        loadGrid(str(path))
    path.write_bytes(payload[:-1])
    with pytest.raises(TruncatedPayloadError):
        loadGrid(str(path))
    path.write_bytes(payload[:-2] + np.array([7], dtype="<u2").tobytes())
    with pytest.raises(LabelRangeError):
        loadGrid(str(path))

# Integration Test 3: batches depend only on seed and iteration, with or without prefetching.
def testBatchLoaderDeterminism():
    data = synth2d("eight_gaussians", 300, seed=2)
    cfg = TrainConfig(clfBatch=16, genBatch=12, seed=9)
    plain = list(BatchLoader(data, cfg).iterate(0, 6))
    prefetched = list(BatchLoader(data, cfg).iterate(0, 6, prefetch=2))
    assert [item[0] for item in prefetched] == list(range(6))
    for (i, clfA, genA), (j, clfB, genB) in zip(plain, prefetched):
        assert i == j
        assert np.array_equal(clfA.values, clfB.values) and np.array_equal(genA.values, genB.values)
    # Starting midway gives the same batches as the full run did.
    resumed = list(BatchLoader(data, cfg).iterate(3, 6))
    assert np.array_equal(resumed[0][2].values, plain[3][2].values)

# Integration Test 4: abandoning a prefetching iterator early does not hang.
def testPrefetchEarlyStop():
    loader = BatchLoader(synth2d("two_moons", 100), TrainConfig(clfBatch=4, genBatch=4))
    for iteration, _, _ in loader.iterate(0, 100, prefetch=1):
        if iteration == 2:
            break

# Integration Test 5: 2D jitter adds 1e-4 of variance per axis.
def testJitterVariance():
    points = Dataset(np.zeros((1000000, 2)))
    jittered = augment(points.samples, points, np.random.default_rng(5))
    assert np.all((0.9e-4 <= jittered.var(axis=0)) & (jittered.var(axis=0) <= 1.1e-4))

# Integration Test 6: each eight gaussians mode averages to its octagon vertex.
def testEightGaussiansModeMeans():
    data = synth2d("eight_gaussians", 8000, seed=6)
    for label in range(8):
        angle = 2.0 * np.pi * label / 8.0
        center = 0.7 * np.array([np.cos(angle), np.sin(angle)])
        assert np.linalg.norm(data.samples[data.labels == label].mean(axis=0) - center) < 0.02

# Integration Test 7: an error raised while prefetching reaches the consumer instead of ending the batches early.
def testPrefetchForwardsErrors(monkeypatch):
    loader = BatchLoader(synth2d("two_moons", 100), TrainConfig(clfBatch=4, genBatch=4))
    original = BatchLoader.batch
    def failingBatch(self, iteration):
        if iteration == 3:
            raise DataError("unreadable batch")
        return original(self, iteration)
    monkeypatch.setattr(BatchLoader, "batch", failingBatch)
    seen = []
    with pytest.raises(DataError):
        for iteration, _, _ in loader.iterate(0, 10, prefetch=2):
            seen.append(iteration)
    assert seen == [0, 1, 2]
