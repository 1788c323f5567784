#DeskEBM
#Energy-based model training toolkit

#TRAINER CONTROLLERS - The training loop: negative sampling, the loss per mode, the momentum update, buffer upkeep, divergence monitoring and checkpoints.

import csv
import dataclasses
import json
import logging
import os
import shutil
import time

import numpy as np
from tqdm import tqdm

from App.errors import ConfigError, DataError, DivergenceError
from App.models.energyModel import Mode
from App.models.lossBreakdown import LossBreakdown, METRIC_COLUMNS
from App.models.replayBuffer import ReplayBuffer
from App.models.tensor import resetGraph
from App.models.trainState import TrainState, DivergenceStatus
from App.controllers.tensor import backward
from App.controllers.energyNet import DEFAULT_WIDTH_2D, DEFAULT_WIDTH_RASTER, buildModel, modelArrays, modelFromArrays, encodeHeader, decodeHeader
from App.controllers.initDist import initFromName, initToBytes, initFromBytes
from App.controllers.sgld import drawInit, sgldChain, push, restoreBuffer
from App.controllers.objectives import generativeLoss, jointLoss, injectNoise
from App.controllers.config import configToText, parseConfigText, buildTrainConfig, resolveSgldClamp
from App.controllers.seeding import streamFor, childSeed
from App.controllers.datasets import BatchLoader
from App.controllers.evalDiag import renderGrid, gridLayout

LOGGER = logging.getLogger(__name__)

EPOCH_COLUMNS = ("epoch", "seconds", "gen_loss", "acc")
#History columns stored in checkpoints, in this order.
HISTORY_FIELDS = ("iteration", "clfLoss", "genLoss", "ePosMean", "eNegMean", "ePosSqMean", "eNegSqMean", "acc", "total")


#Builds the starting state of a run: fitted p0, a fresh model and an empty buffer.
def initState(cfg, dataset):
    p0 = initFromName(cfg.init, dataset, cfg.epsReg, cfg.clampInit)
    width = cfg.hiddenWidth or (DEFAULT_WIDTH_2D if dataset.dim <= 2 else DEFAULT_WIDTH_RASTER)
    hiddenSizes = [width] * cfg.hiddenLayers
    numClasses = dataset.numClasses if cfg.modeEnum != Mode.UNCOND else 0
    model = buildModel(cfg.mode, dataset.dim, hiddenSizes, numClasses, cfg.slope, seed=childSeed(cfg.seed, "model"))
    buffer = ReplayBuffer(dataset.dim, cfg.bufferCapacity, cfg.reinitProb)
    return TrainState(model=model, buffer=buffer, p0=p0, cfg=cfg, sgld=resolveSgldClamp(cfg, dataset), dataShape=None if dataset.shape is None else tuple(dataset.shape))


#SGD with momentum: v <- momentum * v + g, then theta <- theta - lr * v. Parameters without a gradient see g = 0.
def sgdMomentumStep(params, moments, lr, momentum):
    if len(params) != len(moments):
        raise ConfigError("got %d parameters but %d momentum buffers" % (len(params), len(moments)))
    for index, tensor in enumerate(params):
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.values)
        moments[index] = momentum * moments[index] + grad
        tensor.values = tensor.values - lr * moments[index]
    return moments


def _gaps(history):
    return np.array([abs(row.ePosMean - row.eNegMean) for row in history], dtype=np.float64)


#Mean of |E+ - E-| over the last `window` rows, or fewer at the start of a run.
def windowedGap(history, window):
    if not history:
        return 0.0
    return float(np.mean(_gaps(history[-window:])))


#Scans a history and reports the first row that is non-finite or whose trailing window mean of |E+ - E-| exceeds the threshold.
def divergenceMonitor(history, threshold, window):
    if window < 1:
        raise ConfigError("the divergence window must be at least 1")
    if not history:
        return DivergenceStatus(False)
    gaps = _gaps(history)
    sums = np.concatenate([[0.0], np.cumsum(np.where(np.isfinite(gaps), gaps, 0.0))])
    for index, row in enumerate(history):
        iteration = row.iteration if row.iteration is not None else index
        if not row.finite:
            return DivergenceStatus(True, iteration, float("nan"))
        start = max(0, index - window + 1)
        windowMean = (sums[index + 1] - sums[start]) / (index + 1 - start)
        if windowMean > threshold:
            return DivergenceStatus(True, iteration, float(windowMean))
    return DivergenceStatus(False, None, float((sums[-1] - sums[max(0, len(history) - window)]) / min(window, len(history))))


def _values(batch):
    return batch.values if hasattr(batch, "values") else np.asarray(batch)


#One step of the training algorithm on the given batches. UNCOND mode ignores batchClf.
def trainStep(state, batchClf, batchGen, cfg):
    iteration = state.iteration
    model = state.model
    count = len(_values(batchGen))

    #Negatives: chain starts from the buffer or p0, then K Langevin steps with no path back to the parameters.
    sgldRng = streamFor(cfg.seed, "sgld", iteration)
    x0, fresh = drawInit(state.buffer, state.p0, count, sgldRng, withMask=True, initRng=streamFor(cfg.seed, "init", iteration))
    try:
        negatives = sgldChain(model, x0, state.sgld, sgldRng)
    except DivergenceError as error:
        error.iteration = iteration
        raise

    if cfg.injectSigma > 0:
        noiseRng = streamFor(cfg.seed, "inject", iteration)
        batchGen = injectNoise(batchGen, cfg.injectSigma, noiseRng)
        if batchClf is not None:
            batchClf = injectNoise(batchClf, cfg.injectSigma, noiseRng)

    model.zeroGrad()
    if model.mode == Mode.UNCOND:
        breakdown = generativeLoss(model, batchGen, negatives, cfg.regCoeff, allowAugmented=cfg.augmentGenBatch)
    else:
        if batchClf is None:
            raise ConfigError("%s training needs a labelled classification batch" % model.mode.value)
        breakdown = jointLoss(model, batchClf, None, batchGen, negatives, cfg.regCoeff, allowAugmented=cfg.augmentGenBatch)
    breakdown.iteration = iteration

    if not breakdown.finite:
        resetGraph()
        raise DivergenceError("non-finite loss at iteration %d" % iteration, iteration=iteration, value=breakdown.total)

    backward(breakdown.objective)
    sgdMomentumStep(model.parameters(), state.moments, cfg.learningRate, cfg.momentum)
    push(state.buffer, negatives, streamFor(cfg.seed, "buffer", iteration))
    resetGraph()
    breakdown.objective = None

    state.lastInit, state.lastNegatives, state.lastFreshMask = x0, negatives, fresh
    state.history.append(breakdown)
    state.iteration = iteration + 1

    gap = windowedGap(state.history, cfg.divergenceWindow)
    if gap > cfg.divergenceThreshold:
        raise DivergenceError("energy gap window mean %.4g exceeds %.4g at iteration %d" % (gap, cfg.divergenceThreshold, iteration), iteration=iteration, value=gap)
    return breakdown


################## CHECKPOINTS ##################

def _historyArray(history):
    rows = []
    for row in history:
        rows.append([np.nan if getattr(row, name) is None else float(getattr(row, name)) for name in HISTORY_FIELDS])
    return np.array(rows, dtype="<f8").reshape(len(rows), len(HISTORY_FIELDS))


def _historyRows(array):
    history = []
    for values in np.asarray(array, dtype=np.float64):
        row = dict(zip(HISTORY_FIELDS, values.tolist()))
        iteration = int(row.pop("iteration"))
        for name in ("clfLoss", "acc"):
            if np.isnan(row[name]):
                row[name] = None
        history.append(LossBreakdown(iteration=iteration, **row))
    return history


#Stores model, optimizer moments, buffer rows, p0, history and the config in one .npz file.
def saveCheckpoint(state, path):
    arrays = modelArrays(state.model)
    for (name, _), moment in zip(state.model.namedParameters(), state.moments):
        arrays["moment/" + name] = moment.astype("<f8")
    arrays["buffer"] = state.buffer.snapshot().astype("<f8")
    arrays["init"] = np.frombuffer(initToBytes(state.p0), dtype=np.uint8)
    arrays["history"] = _historyArray(state.history)
    arrays["header"] = encodeHeader({
        "kind" : "checkpoint",
        "model" : state.model.toDict(),
        "iteration" : state.iteration,
        "seed" : state.cfg.seed,
        "config" : configToText(state.cfg),
        "bufferCapacity" : state.buffer.capacity,
        "reinitProb" : state.buffer.reinitProb,
        "sgldClamp" : None if state.sgld.clampRange is None else list(state.sgld.clampRange),
        "dataShape" : None if state.dataShape is None else list(state.dataShape)
    })
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    return path


def _readArrays(path):
    try:
        with np.load(path) as stored:
            return {key : stored[key] for key in stored.files}
    except (OSError, ValueError) as error:
        raise DataError("unable to read checkpoint %s: %s" % (path, error))


#Loads a checkpoint. Model-only files (saveModel output) come back with buffer, p0 and config set to None.
def loadCheckpoint(path):
    arrays = _readArrays(path)
    if "header" not in arrays:
        raise DataError("checkpoint %s has no header" % path)
    header = decodeHeader(arrays["header"])
    model = modelFromArrays(header["model"], arrays)
    if header.get("kind") != "checkpoint":
        return header, model, None

    cfg = buildTrainConfig(parseConfigText(header["config"]))
    clampRange = header.get("sgldClamp")
    sgld = dataclasses.replace(cfg.sgld, clampRange=None if clampRange is None else tuple(clampRange))
    try:
        moments = [np.asarray(arrays["moment/" + name], dtype=np.float64).copy() for name, _ in model.namedParameters()]
        buffer = restoreBuffer(arrays["buffer"], header["bufferCapacity"], header["reinitProb"])
        p0 = initFromBytes(bytes(arrays["init"]))
        history = _historyRows(arrays["history"])
    except KeyError as missing:
        raise DataError("checkpoint %s is missing %s" % (path, missing))
    state = TrainState(model=model, buffer=buffer, p0=p0, cfg=cfg, sgld=sgld, moments=moments, iteration=int(header["iteration"]), history=history, dataShape=None if header.get("dataShape") is None else tuple(header["dataShape"]))
    return header, model, state


#Continues a stored run. A cfg given here replaces the stored one (for example to raise epochs), SGLD settings included.
def resumeTraining(checkpointPath, dataset, cfg=None, outDir=None, progress=False):
    _, _, state = loadCheckpoint(checkpointPath)
    if state is None:
        raise DataError("%s holds a model only and cannot be resumed" % checkpointPath)
    if cfg is not None:
        state.cfg = cfg
        state.sgld = resolveSgldClamp(cfg, dataset)
    LOGGER.info("Resuming %s at iteration %d", checkpointPath, state.iteration)
    return trainLoop(state.cfg, dataset, outDir=outDir, state=state, progress=progress)


################## TRAINING LOOP ##################

def _openCsv(path, columns, append):
    exists = append and os.path.exists(path)
    handle = open(path, "a" if exists else "w", newline="")
    writer = csv.writer(handle)
    if not exists:
        writer.writerow(columns)
    return handle, writer


def _epochSummary(epoch, seconds, rows):
    genLoss = float(np.mean([row.genLoss for row in rows])) if rows else float("nan")
    accs = [row.acc for row in rows if row.acc is not None]
    return [str(epoch), repr(seconds), repr(genLoss), repr(float(np.mean(accs))) if accs else ""]


def _writeSampleGrid(state, dataset, outDir, epoch):
    samples = state.lastNegatives[:state.cfg.gridSamples]
    suffix = "ppm" if dataset.shape is not None else "txt"
    path = os.path.join(outDir, "samples_epoch_%03d.%s" % (epoch, suffix))
    renderGrid(samples, gridLayout(len(samples)), path, dataset.shape)


#Runs cfg.epochs * cfg.itersPerEpoch steps from wherever the state stands.
#With outDir set, writes metrics.csv, epochs.csv, per-epoch checkpoints, checkpoint_last_good.npz and sample grids; on divergence also divergence.json.
def trainLoop(cfg, dataset, outDir=None, state=None, progress=False):
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    if state is None:
        state = initState(cfg, dataset)
    state.cfg = cfg
    total = cfg.epochs * cfg.itersPerEpoch

    loader = BatchLoader(dataset, cfg)
    metricsHandle = epochsHandle = None
    if outDir is not None:
        os.makedirs(outDir, exist_ok=True)
        resuming = state.iteration > 0
        if not resuming:
            #A fresh run into a reused directory must not report an older run's state.
            for stale in ("checkpoint_last_good.npz", "divergence.json"):
                if os.path.exists(os.path.join(outDir, stale)):
                    os.remove(os.path.join(outDir, stale))
        metricsHandle, metricsWriter = _openCsv(os.path.join(outDir, "metrics.csv"), METRIC_COLUMNS, resuming)
        epochsHandle, epochsWriter = _openCsv(os.path.join(outDir, "epochs.csv"), EPOCH_COLUMNS, resuming)

    bar = tqdm(total=total, initial=state.iteration, disable=not progress, desc="train", unit="it")
    epochStart = time.perf_counter()
    epochRows = []
    try:
        for iteration, batchClf, batchGen in loader.iterate(state.iteration, total, cfg.prefetch):
            row = trainStep(state, batchClf, batchGen, cfg)
            epochRows.append(row)
            if metricsHandle is not None:
                metricsWriter.writerow(row.toRow())
            bar.update(1)

            if state.iteration % cfg.itersPerEpoch:
                continue
            epoch = state.iteration // cfg.itersPerEpoch
            seconds = time.perf_counter() - epochStart
            summary = _epochSummary(epoch, seconds, epochRows)
            LOGGER.info("Epoch %d done in %.2fs: gen_loss=%s acc=%s", epoch, seconds, summary[2], summary[3] or "-")
            if outDir is not None:
                epochsWriter.writerow(summary)
                metricsHandle.flush()
                epochsHandle.flush()
                if epoch % cfg.checkpointEvery == 0 or epoch == cfg.epochs:
                    path = saveCheckpoint(state, os.path.join(outDir, "checkpoint_epoch_%03d.npz" % epoch))
                    shutil.copyfile(path, os.path.join(outDir, "checkpoint_last_good.npz"))
                if epoch % cfg.sampleEvery == 0 and state.lastNegatives is not None:
                    _writeSampleGrid(state, dataset, outDir, epoch)
            epochRows = []
            epochStart = time.perf_counter()
    except DivergenceError as error:
        LOGGER.warning("Training diverged: %s", error)
        if outDir is not None:
            report = error.toDict()
            lastGood = os.path.join(outDir, "checkpoint_last_good.npz")
            report["lastGoodCheckpoint"] = lastGood if os.path.exists(lastGood) else None
            with open(os.path.join(outDir, "divergence.json"), "w") as handle:
                json.dump(report, handle, indent=2)
        raise
    finally:
        bar.close()
        for handle in (metricsHandle, epochsHandle):
            if handle is not None:
                handle.close()
    return state
