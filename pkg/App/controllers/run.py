#DeskEBM
#Energy-based model training toolkit

#RUN CONTROLLERS - Record command invocations and sweep cells in the registry, and write the manifest of every run.

#Imports hashlib, json, logging and os.
import hashlib
import json
import logging
import os
from datetime import datetime

#Imports the registry models.
from App.models.sharedDB import db
from App.models.run import Run
from App.models.stabilityCell import StabilityCell
from App.errors import DataError

LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


#Git-style content hash: sha256 over "blob <len>\0" + bytes for each input, in order. Inputs are byte strings or file paths.
def contentHash(*inputs):
    digest = hashlib.sha256()
    for item in inputs:
        if isinstance(item, str):
            item = item.encode("utf-8") if not os.path.isfile(item) else _readBytes(item)
        digest.update(b"blob %d\0" % len(item))
        digest.update(item)
    return digest.hexdigest()


def _readBytes(path):
    try:
        with open(path, "rb") as handle:
            return handle.read()
    except OSError as error:
        raise DataError("unable to hash %s: %s" % (path, error))


#Creates a registry entry for a starting command. Returns None when the registry is unavailable; runs never fail over bookkeeping.
def recordRun(command, seed, configText, dataPaths, outDir):
    try:
        run = Run(command=command, seed=int(seed), configHash=contentHash(configText.encode("utf-8")) if configText else None, dataHash=contentHash(*dataPaths) if dataPaths else None, outDir=os.path.abspath(outDir))
        db.session.add(run)
        db.session.commit()
        return run
    except Exception as error:
        #If the run could not be recorded, rollback the session.
        db.session.rollback()
        LOGGER.warning("Unable to record %s run: %s", command, error)
        return None


#Stores the outcome of a run, along with the seed and the hashes of the config and inputs it ended up using.
def finishRun(run, exitCode, message=None, configText=None, dataPaths=(), seed=None):
    if run is None:
        return None
    try:
        run.exitCode = int(exitCode)
        run.status = "ok" if exitCode == 0 else "failed"
        run.message = message
        run.finishedAt = datetime.utcnow()
        if seed is not None:
            run.seed = int(seed)
        if configText:
            run.configHash = contentHash(configText.encode("utf-8"))
        if dataPaths:
            run.dataHash = contentHash(*dataPaths)
        db.session.add(run)
        db.session.commit()
        return run
    except Exception as error:
        db.session.rollback()
        LOGGER.warning("Unable to finish run %s: %s", run.runID, error)
        return None


#Adds one bench-stability cell to a sweep run.
def recordStabilityCell(run, cell):
    if run is None:
        return None
    try:
        entry = StabilityCell(runID=run.runID, steps=cell["k"], init=cell["init"], seed=cell["seed"], diverged=cell["diverged"], iterations=cell["iterations"], finalGap=cell["finalGap"], seconds=cell["seconds"])
        db.session.add(entry)
        db.session.commit()
        return entry
    except Exception as error:
        db.session.rollback()
        LOGGER.warning("Unable to record stability cell: %s", error)
        return None


#Retrieves every recorded run, newest first, as dictionaries.
def getAllRuns():
    try:
        runs = db.session.query(Run).order_by(Run.runID.desc()).all()
        return [run.toDict() for run in runs]
    except Exception:
        db.session.rollback()
        return []


def getRunCells(runID):
    try:
        cells = db.session.query(StabilityCell).filter_by(runID=runID).all()
        return [cell.toDict() for cell in cells]
    except Exception:
        db.session.rollback()
        return []


#Writes manifest.json into outDir: the command, its arguments, seed, config text and the content hashes of its inputs.
def writeManifest(outDir, command, seed, arguments, configText=None, dataPaths=(), exitCode=None, extra=None):
    os.makedirs(outDir, exist_ok=True)
    manifest = {
        "command" : command,
        "seed" : int(seed),
        "arguments" : arguments,
        "config" : configText,
        "configHash" : contentHash(configText.encode("utf-8")) if configText else None,
        "inputs" : {path : contentHash(path) for path in dataPaths},
        "exitCode" : exitCode
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outDir, MANIFEST_NAME)
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=str)
    return path
