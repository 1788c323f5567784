#DeskEBM
#Energy-based model training toolkit

#EVALUATION CONTROLLERS - Two-sample tests, energy histograms, PCA projections of features, and sample grids.

import csv
import logging
import math

import numpy as np
from scipy.spatial.distance import cdist, pdist
from PIL import Image
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from App.errors import ConfigError, DataError, ShapeError
from App.models.evalReport import EvalReport
from App.models.tensor import Tensor, resetGraph
from App.controllers.energyNet import energy, features, predict
from App.controllers.initDist import sampleInit
from App.controllers.sgld import sgldChain

LOGGER = logging.getLogger(__name__)

GROUPS = ("x_pos", "x_neg", "x_init", "uniform")


def _gaussianKernel(a, b, bandwidth):
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * bandwidth ** 2))


#Unbiased squared MMD with a Gaussian kernel, clipped at zero.
def mmd(a, b, bandwidth):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError("mmd needs [N, D] and [M, D] samples, got %s and %s" % (a.shape, b.shape))
    n, m = a.shape[0], b.shape[0]
    if n < 2 or m < 2:
        raise DataError("mmd needs at least two samples per set")
    if not bandwidth > 0:
        raise ConfigError("mmd bandwidth must be positive")

    kaa = _gaussianKernel(a, a, bandwidth)
    kbb = _gaussianKernel(b, b, bandwidth)
    kab = _gaussianKernel(a, b, bandwidth)
    termA = (kaa.sum() - np.trace(kaa)) / (n * (n - 1))
    termB = (kbb.sum() - np.trace(kbb)) / (m * (m - 1))
    return max(float(termA + termB - 2.0 * kab.mean()), 0.0)


#Median pairwise distance on the pooled sample. Falls back to 1.0 when every point coincides.
def medianBandwidth(a, b):
    pooled = np.vstack([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)])
    if pooled.shape[0] < 2:
        return 1.0
    median = float(np.median(pdist(pooled)))
    return median if median > 0 else 1.0


def _negEnergy(model, samples):
    values = -energy(model, Tensor(samples)).values
    resetGraph()
    return values


################## ENERGY HISTOGRAMS ##################

#Histograms of -E per group, and per class where a group carries labels, over shared bin edges.
#groups maps a name to samples or to (samples, labels).
def energyHistogram(model, groups, bins=30):
    scores = {}
    labelsByGroup = {}
    for name, group in groups.items():
        samples, labels = group if isinstance(group, tuple) else (group, None)
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[0] == 0:
            raise DataError("histogram group %s is empty" % name)
        scores[name] = _negEnergy(model, samples)
        labelsByGroup[name] = None if labels is None else np.asarray(labels)

    pooled = np.concatenate(list(scores.values()))
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)

    table = {"edges" : edges, "counts" : {}, "classCounts" : {}}
    for name, values in scores.items():
        table["counts"][name] = np.histogram(values, bins=edges)[0]
        labels = labelsByGroup[name]
        if labels is not None:
            table["classCounts"][name] = {int(c) : np.histogram(values[labels == c], bins=edges)[0] for c in np.unique(labels)}
    table["scores"] = scores
    return table


def writeHistogramCsv(table, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["group", "class", "bin_lo", "bin_hi", "count"])
        edges = table["edges"]
        for name, counts in table["counts"].items():
            rows = [("all", counts)] + sorted(table["classCounts"].get(name, {}).items())
            for label, binCounts in rows:
                for i, count in enumerate(binCounts):
                    writer.writerow([name, label, repr(float(edges[i])), repr(float(edges[i + 1])), int(count)])


def plotHistogram(table, path):
    figure, axis = plt.subplots(figsize=(6, 4))
    edges = table["edges"]
    for name, counts in table["counts"].items():
        axis.stairs(counts, edges, label=name)
    axis.set_xlabel("-E(x)")
    axis.set_ylabel("count")
    axis.legend()
    figure.tight_layout()
    figure.savefig(path)
    plt.close(figure)


################## PCA ##################

#Projects centered features onto the top-k right singular directions. Each direction is flipped so its largest-magnitude entry is positive.
#Returns the projection, the explained-variance fractions and the directions.
def pcaProject(feats, k=2):
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < k or feats.shape[1] < k:
        raise ShapeError("pcaProject needs at least %d rows and columns, got %s" % (k, feats.shape))
    centered = feats - feats.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    totalVariance = float(np.sum(singular ** 2))
    if totalVariance <= 0:
        raise DataError("cannot project degenerate (identical) features")

    directions = vt[:k]
    pivots = np.argmax(np.abs(directions), axis=1)
    signs = np.sign(directions[np.arange(k), pivots])
    directions = directions * signs[:, None]
    explained = singular[:k] ** 2 / totalVariance
    return centered @ directions.T, explained, directions


#Centroid distances between groups in the PCA plane of penultimate features, plus each group's mean distance to its own centroid.
def manifoldDistances(model, groups, k=2):
    names = list(groups)
    blocks = []
    for name in names:
        blocks.append(features(model, Tensor(np.asarray(groups[name], dtype=np.float64))).values)
        resetGraph()
    projected, explained, _ = pcaProject(np.vstack(blocks), k)

    points = {}
    offset = 0
    for name, block in zip(names, blocks):
        points[name] = projected[offset:offset + len(block)]
        offset += len(block)
    centroids = {name : pts.mean(axis=0) for name, pts in points.items()}
    spread = {name : float(np.mean(np.linalg.norm(pts - centroids[name], axis=1))) for name, pts in points.items()}
    distances = {}
    for i, first in enumerate(names):
        for second in names[i + 1:]:
            distances["%s|%s" % (first, second)] = float(np.linalg.norm(centroids[first] - centroids[second]))
    return {"points" : points, "centroids" : centroids, "spread" : spread, "distances" : distances, "explained" : explained}


def writeManifoldCsv(manifold, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["kind", "name", "value"])
        for name, value in manifold["distances"].items():
            writer.writerow(["centroid_distance", name, repr(value)])
        for name, value in manifold["spread"].items():
            writer.writerow(["spread", name, repr(value)])
        for i, value in enumerate(manifold["explained"]):
            writer.writerow(["explained_variance", "pc%d" % (i + 1), repr(float(value))])


def plotManifold(manifold, path):
    figure, axis = plt.subplots(figsize=(5, 5))
    for name, pts in manifold["points"].items():
        axis.scatter(pts[:, 0], pts[:, 1], s=4, alpha=0.5, label=name)
    axis.set_xlabel("pc1")
    axis.set_ylabel("pc2")
    axis.legend()
    figure.tight_layout()
    figure.savefig(path)
    plt.close(figure)


################## SAMPLE GRIDS ##################

#Smallest near-square layout that holds count tiles.
def gridLayout(count):
    cols = max(1, math.ceil(math.sqrt(count)))
    rows = max(1, math.ceil(count / cols))
    return rows, cols


#Raster samples become a tiled binary pixmap; 2D samples become an "x y" text scatter.
def renderGrid(samples, layout, path, shape=None):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        samples = samples.reshape(len(samples), -1)
    rows, cols = layout
    if rows * cols < samples.shape[0]:
        raise ConfigError("a %dx%d layout cannot hold %d samples" % (rows, cols, samples.shape[0]))

    if shape is None:
        if samples.shape[1] != 2:
            raise ShapeError("samples of dimension %d need a raster shape" % samples.shape[1])
        with open(path, "w") as handle:
            handle.write("# x y\n")
            for x, y in samples:
                handle.write("%r %r\n" % (float(x), float(y)))
        return path

    height, width, channels = shape
    if samples.shape[1] != height * width * channels:
        raise ShapeError("samples of dimension %d do not match raster shape %s" % (samples.shape[1], shape))
    pixels = np.clip(np.round((samples + 1.0) * 127.5), 0, 255).astype(np.uint8).reshape(-1, height, width, channels)
    canvas = np.zeros((rows * height, cols * width, channels), dtype=np.uint8)
    for index, tile in enumerate(pixels):
        r, c = divmod(index, cols)
        canvas[r * height:(r + 1) * height, c * width:(c + 1) * width] = tile
    if channels == 1:
        canvas = np.repeat(canvas, 3, axis=2)
    Image.fromarray(canvas[:, :, :3], mode="RGB").save(path, format="PPM")
    return path


#Reads a pixmap back as an [H, W, 3] byte array.
def readPixmap(path):
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"), dtype=np.uint8)
    except OSError as error:
        raise DataError("unable to read pixmap %s: %s" % (path, error))


################## EVALUATION REPORT ##################

#Draws fresh-chain samples from p0 and scores them against held-out data.
#The baseline is the MMD between two disjoint halves of the reference set.
def evaluate(model, reference, p0, sgldConfig, rng, count=None, labels=None):
    reference = np.asarray(reference, dtype=np.float64)
    count = reference.shape[0] if count is None else count
    x0 = sampleInit(p0, count, rng)
    negatives = sgldChain(model, x0, sgldConfig, rng)

    bandwidth = medianBandwidth(negatives, reference)
    half = reference.shape[0] // 2
    baseline = mmd(reference[:half], reference[half:], bandwidth) if half >= 2 and reference.shape[0] - half >= 2 else None
    meanGap = np.abs(negatives.mean(axis=0) - reference.mean(axis=0))
    covGap = float(np.linalg.norm(np.cov(negatives, rowvar=False, bias=True) - np.cov(reference, rowvar=False, bias=True)))

    uniform = rng.uniform(-1.0, 1.0, size=reference.shape)
    stats = {}
    for name, samples in zip(GROUPS, (reference, negatives, x0, uniform)):
        scores = _negEnergy(model, samples)
        stats[name] = {"mean" : float(np.mean(scores)), "std" : float(np.std(scores)), "median" : float(np.median(scores))}

    accuracy = None
    if labels is not None and model.classifierHead is not None:
        accuracy = float(np.mean(predict(model, Tensor(reference)) == np.asarray(labels)))
        resetGraph()
    report = EvalReport(mmd=mmd(negatives, reference, bandwidth), bandwidth=bandwidth, meanGap=meanGap, covFrobeniusGap=covGap, energyStats=stats, accuracy=accuracy, mmdBaseline=baseline)
    return report, {"x_pos" : reference, "x_neg" : negatives, "x_init" : x0, "uniform" : uniform}


def writeReportCsv(report, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        writer.writerow(["mmd", repr(report.mmd)])
        writer.writerow(["mmd_baseline", "" if report.mmdBaseline is None else repr(report.mmdBaseline)])
        writer.writerow(["bandwidth", repr(report.bandwidth)])
        for i, value in enumerate(report.meanGap):
            writer.writerow(["mean_gap_%d" % i, repr(float(value))])
        writer.writerow(["cov_frobenius_gap", repr(report.covFrobeniusGap)])
        for name, stats in report.energyStats.items():
            for key, value in stats.items():
                writer.writerow(["neg_energy_%s_%s" % (key, name), repr(value)])
        writer.writerow(["accuracy", "" if report.accuracy is None else repr(report.accuracy)])
    return path
