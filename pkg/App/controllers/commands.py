#DeskEBM
#Energy-based model training toolkit

#COMMAND CONTROLLERS - The work behind each manage.py command. Every command returns an exit code, records itself in the run registry and writes a manifest into its output directory.

import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from App.errors import ToolkitError, ConfigError, DataError, DivergenceError, EXIT_OK, EXIT_INTERNAL
from App.models.trainConfig import TrainConfig
from App.controllers.config import loadTrainConfig, buildTrainConfig, configToText
from App.controllers.datasets import loadDataset
from App.controllers.initDist import INIT_MODES, DEFAULT_EPS_REG, initFromName, saveInit, loadInit, sampleInit
from App.controllers.sgld import sgldChain, dumpSamples, dumpBuffer
from App.controllers.trainer import initState, trainLoop, saveCheckpoint, loadCheckpoint, windowedGap
from App.controllers.evalDiag import evaluate, writeReportCsv, energyHistogram, writeHistogramCsv, plotHistogram, manifoldDistances, writeManifoldCsv, plotManifold, renderGrid, gridLayout
from App.controllers.seeding import streamFor
from App.controllers.run import recordRun, finishRun, recordStabilityCell, writeManifest

LOGGER = logging.getLogger(__name__)

SAMPLE_MODES = ("fresh-chain", "buffer")
STABILITY_COLUMNS = ("k", "init", "seed", "diverged", "iterations", "final_gap", "seconds")
SUMMARY_COLUMNS = ("k", "init", "runs", "healthy", "divergence_rate", "median_final_gap")


#Runs a command body, turning toolkit errors into exit codes and recording the outcome.
#The body fills context with the config text, input paths and any extra manifest fields it learns about.
def _execute(command, outDir, seed, arguments, body):
    run = recordRun(command, seed, None, [], outDir)
    context = {"config" : None, "inputs" : [], "extra" : {}, "run" : run, "seed" : seed}
    message = None
    try:
        body(context)
        exitCode = EXIT_OK
    except ToolkitError as error:
        exitCode, message = error.exitCode, str(error)
        context["extra"]["error"] = error.toDict()
        LOGGER.error("%s failed: %s", command, error)
        print("Error: " + message)
    except Exception as error:
        exitCode, message = EXIT_INTERNAL, "%s: %s" % (type(error).__name__, error)
        context["extra"]["error"] = {"error" : type(error).__name__, "message" : str(error), "exitCode" : EXIT_INTERNAL}
        LOGGER.exception("%s failed unexpectedly", command)
        print("Internal error: " + message)

    try:
        writeManifest(outDir, command, context["seed"], arguments, context["config"], context["inputs"], exitCode, context["extra"])
    except OSError as error:
        LOGGER.error("Unable to write manifest to %s: %s", outDir, error)
        exitCode = exitCode or EXIT_INTERNAL
    finishRun(run, exitCode, message, context["config"], context["inputs"], context["seed"])
    return exitCode


def _fileInputs(*paths):
    return [path for path in paths if path and os.path.isfile(path)]


def _trainConfig(configPath, overrides):
    if configPath:
        return loadTrainConfig(configPath, overrides)
    return buildTrainConfig({}, overrides)


#Parses "H,W,C" (or "H,W") into a raster shape.
def parseShape(text):
    if not text:
        return None
    try:
        parts = [int(part) for part in str(text).split(",")]
    except ValueError:
        raise ConfigError("shape must be H,W[,C]; got %r" % text)
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or min(parts) < 1:
        raise ConfigError("shape must be H,W[,C]; got %r" % text)
    return tuple(parts)


def _renderIfPossible(samples, path, shape):
    samples = np.asarray(samples)
    if shape is None and samples.shape[1] != 2:
        LOGGER.info("Skipping grid for %d-dimensional samples without a raster shape", samples.shape[1])
        return None
    suffix = ".txt" if shape is None else ".ppm"
    return renderGrid(samples, gridLayout(len(samples)), path + suffix, shape)


################## FIT-INIT ##################

def cmdFitInit(dataSpec, outDir, init="informative", epsReg=DEFAULT_EPS_REG, seed=0, clamp=True):
    arguments = {"data" : dataSpec, "init" : init, "epsReg" : epsReg, "clamp" : clamp}

    def body(context):
        context["inputs"] = _fileInputs(dataSpec) or [dataSpec]
        dataset = loadDataset(dataSpec, seed)
        dist = initFromName(init, dataset, epsReg, clamp)
        saveInit(dist, os.path.join(outDir, "init.ebmi"))
        context["extra"]["init"] = dist.toDict()
        print("Fitted %s init on %d samples (D=%d)." % (dist.kind, len(dataset), dist.dim))

    os.makedirs(outDir, exist_ok=True)
    return _execute("fit-init", outDir, seed, arguments, body)


################## TRAIN ##################

def cmdTrain(configPath, dataSpec, outDir, seed=None, k=None, init=None, mode=None, injectSigma=None, regCoeff=None, progress=False, prefetch=None):
    overrides = {"seed" : seed, "sgld_steps" : k, "init" : init, "mode" : mode, "inject_sigma" : injectSigma, "reg_coeff" : regCoeff, "prefetch" : prefetch}
    arguments = dict(overrides, config=configPath, data=dataSpec)

    def body(context):
        cfg = _trainConfig(configPath, overrides)
        context["seed"] = cfg.seed
        context["config"] = configToText(cfg)
        context["inputs"] = _fileInputs(configPath, dataSpec) or [dataSpec]
        dataset = loadDataset(dataSpec, cfg.seed)

        state = initState(cfg, dataset)
        saveInit(state.p0, os.path.join(outDir, "init.ebmi"))
        with open(os.path.join(outDir, "config.txt"), "w") as handle:
            handle.write(context["config"])

        started = time.perf_counter()
        state = trainLoop(cfg, dataset, outDir=outDir, state=state, progress=progress)
        saveCheckpoint(state, os.path.join(outDir, "checkpoint_final.npz"))
        dumpBuffer(state.buffer, os.path.join(outDir, "buffer.bin"))
        context["extra"]["iterations"] = state.iteration
        print("Training complete: %d iterations in %.1fs, outputs in %s" % (state.iteration, time.perf_counter() - started, outDir))

    os.makedirs(outDir, exist_ok=True)
    return _execute("train", outDir, seed if seed is not None else 0, arguments, body)


################## SAMPLE ##################

def cmdSample(checkpointPath, count, outDir, mode="fresh-chain", seed=0, steps=None):
    arguments = {"checkpoint" : checkpointPath, "count" : count, "mode" : mode, "steps" : steps}

    def body(context):
        if mode not in SAMPLE_MODES:
            raise ConfigError("sample mode must be one of %s, got %r" % (", ".join(SAMPLE_MODES), mode))
        if count < 0:
            raise ConfigError("count must be non-negative")
        context["inputs"] = _fileInputs(checkpointPath)
        header, model, state = loadCheckpoint(checkpointPath)
        if state is None:
            raise DataError("%s holds no %s; it was saved without training state" % (checkpointPath, "buffer" if mode == "buffer" else "init distribution"))
        rng = streamFor(seed, "sample")

        if mode == "buffer":
            rows = state.buffer.snapshot()
            picks = np.sort(rng.choice(len(rows), size=min(count, len(rows)), replace=False)) if len(rows) else np.zeros(0, dtype=int)
            samples = rows[picks]
        else:
            sgld = state.sgld if steps is None else dataclasses.replace(state.sgld, steps=steps)
            x0 = sampleInit(state.p0, count, rng)
            samples = sgldChain(model, x0, sgld, rng) if count else x0

        dumpSamples(samples, os.path.join(outDir, "samples.bin"))
        _renderIfPossible(samples, os.path.join(outDir, "samples"), state.dataShape)
        context["extra"]["count"] = int(len(samples))
        print("Wrote %d %s samples to %s" % (len(samples), mode, outDir))

    os.makedirs(outDir, exist_ok=True)
    return _execute("sample", outDir, seed, arguments, body)


################## EVAL ##################

def cmdEval(checkpointPath, dataSpec, outDir, seed=0, count=None, bins=30):
    arguments = {"checkpoint" : checkpointPath, "data" : dataSpec, "count" : count, "bins" : bins}

    def body(context):
        context["inputs"] = _fileInputs(checkpointPath, dataSpec) or [checkpointPath, dataSpec]
        _, model, state = loadCheckpoint(checkpointPath)
        #Held-out draws: synthetic data regenerates under a different seed.
        dataset = loadDataset(dataSpec, seed + 1)
        limit = min(len(dataset), count or 2000)
        reference, labels = dataset.samples[:limit], None if dataset.labels is None else dataset.labels[:limit]

        if state is not None:
            p0, sgld = state.p0, state.sgld
        else:
            p0, sgld = initFromName("informative", dataset), TrainConfig().sgld
        report, groups = evaluate(model, reference, p0, sgld, streamFor(seed, "eval"), labels=labels)
        writeReportCsv(report, os.path.join(outDir, "report.csv"))
        with open(os.path.join(outDir, "report.json"), "w") as handle:
            json.dump(report.toDict(), handle, indent=2)

        histogramGroups = dict(groups)
        if labels is not None:
            histogramGroups["x_pos"] = (reference, labels)
        table = energyHistogram(model, histogramGroups, bins)
        writeHistogramCsv(table, os.path.join(outDir, "histogram.csv"))
        plotHistogram(table, os.path.join(outDir, "histogram.png"))

        manifold = manifoldDistances(model, {name : groups[name] for name in ("x_pos", "x_neg", "x_init")})
        writeManifoldCsv(manifold, os.path.join(outDir, "manifold.csv"))
        plotManifold(manifold, os.path.join(outDir, "manifold.png"))
        context["extra"]["report"] = report.toDict()
        print("MMD %.5f (baseline %s), accuracy %s" % (report.mmd, "-" if report.mmdBaseline is None else "%.5f" % report.mmdBaseline, "-" if report.accuracy is None else "%.4f" % report.accuracy))

    os.makedirs(outDir, exist_ok=True)
    return _execute("eval", outDir, seed, arguments, body)


################## INSPECT-INIT ##################

#Renders the mean of each init component followed by a few samples.
def cmdInspectInit(initPath, outDir, count=16, shape=None, seed=0):
    arguments = {"init" : initPath, "count" : count, "shape" : shape}

    def body(context):
        context["inputs"] = _fileInputs(initPath)
        dist = loadInit(initPath)
        rasterShape = parseShape(shape)
        if dist.kind == "gaussian":
            means = [dist.mean]
        elif dist.kind == "mixture":
            means = [component.mean for _, component in dist.components]
        else:
            means = [np.full(dist.dim, (dist.lo + dist.hi) / 2.0)]
        samples = sampleInit(dist, count, streamFor(seed, "init"))
        tiles = np.vstack([np.vstack(means), samples])
        _renderIfPossible(tiles, os.path.join(outDir, "init_grid"), rasterShape)
        context["extra"]["init"] = dist.toDict()
        print("%s init, D=%d, %d component mean(s) and %d samples rendered." % (dist.kind, dist.dim, len(means), count))

    os.makedirs(outDir, exist_ok=True)
    return _execute("inspect-init", outDir, seed, arguments, body)


################## BENCH-STABILITY ##################

#Trains one (K, init, seed) cell for a capped number of iterations. Divergence is an outcome here, not an error.
def _stabilityCell(baseConfig, dataset, k, init, seed, iterations):
    cfg = dataclasses.replace(baseConfig, sgld=dataclasses.replace(baseConfig.sgld, steps=k), init=init, seed=seed, epochs=1, itersPerEpoch=iterations, prefetch=0)
    started = time.perf_counter()
    state = initState(cfg, dataset)
    diverged = False
    try:
        trainLoop(cfg, dataset, state=state)
    except DivergenceError as error:
        diverged = True
        LOGGER.info("Cell K=%d init=%s seed=%d diverged at iteration %s", k, init, seed, error.iteration)
    gap = windowedGap(state.history, cfg.divergenceWindow)
    return {"k" : k, "init" : init, "seed" : seed, "diverged" : diverged, "iterations" : state.iteration, "finalGap" : gap if np.isfinite(gap) else None, "seconds" : time.perf_counter() - started}


def _summaryRows(cells):
    groups = {}
    for cell in cells:
        groups.setdefault((cell["k"], cell["init"]), []).append(cell)
    rows = []
    for (k, init), members in groups.items():
        healthy = sum(1 for cell in members if not cell["diverged"])
        gaps = [cell["finalGap"] for cell in members if cell["finalGap"] is not None]
        rows.append([k, init, len(members), healthy, repr(1.0 - healthy / len(members)), repr(float(np.median(gaps))) if gaps else ""])
    return rows


def cmdBenchStability(configPath, dataSpec, outDir, kList, initModes, seeds, iterations=None, threads=1):
    arguments = {"config" : configPath, "data" : dataSpec, "k" : list(kList), "init" : list(initModes), "seeds" : list(seeds), "iterations" : iterations, "threads" : threads}

    def body(context):
        if not kList or not initModes or not seeds:
            raise ConfigError("bench-stability needs non-empty K, init and seed lists")
        for init in initModes:
            if init not in INIT_MODES:
                raise ConfigError("unknown init %r; expected one of %s" % (init, ", ".join(INIT_MODES)))
        baseConfig = _trainConfig(configPath, {})
        context["config"] = configToText(baseConfig)
        context["inputs"] = _fileInputs(configPath, dataSpec) or [dataSpec]
        dataset = loadDataset(dataSpec, baseConfig.seed)
        cap = iterations or baseConfig.epochs * baseConfig.itersPerEpoch

        jobs = [(k, init, seed) for k in kList for init in initModes for seed in seeds]
        with ThreadPoolExecutor(max_workers=max(1, int(threads or 1))) as pool:
            futures = [pool.submit(_stabilityCell, baseConfig, dataset, k, init, seed, cap) for k, init, seed in jobs]
            cells = [future.result() for future in futures]

        with open(os.path.join(outDir, "stability.csv"), "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(STABILITY_COLUMNS)
            for cell in cells:
                writer.writerow([cell["k"], cell["init"], cell["seed"], int(cell["diverged"]), cell["iterations"], "" if cell["finalGap"] is None else repr(cell["finalGap"]), repr(cell["seconds"])])
        with open(os.path.join(outDir, "stability_summary.csv"), "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(SUMMARY_COLUMNS)
            writer.writerows(_summaryRows(cells))

        for cell in cells:
            recordStabilityCell(context["run"], cell)
        context["extra"]["cells"] = len(cells)
        print("Stability sweep done: %d cells, %d diverged." % (len(cells), sum(cell["diverged"] for cell in cells)))

    os.makedirs(outDir, exist_ok=True)
    return _execute("bench-stability", outDir, seeds[0] if seeds else 0, arguments, body)
