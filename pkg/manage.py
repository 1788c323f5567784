#DeskEBM
#Energy-based model training toolkit

#Import Modules
import os

from flask_script import Manager, Command, Option
from flask_migrate import Migrate, MigrateCommand

#Import models and controllers
from App.models import *
from App.controllers.run import getAllRuns
from App.controllers.initDist import INIT_MODES, DEFAULT_EPS_REG
from App.controllers.commands import cmdFitInit, cmdTrain, cmdSample, cmdEval, cmdInspectInit, cmdBenchStability, SAMPLE_MODES

#Imports the main application object
from App.main import *

#Creates app and initializes database
app = create_app()
init_db(app)

#Initializes the manager for the application and the database migrator.
manager = Manager(app)
migrate = Migrate(app, db, render_as_batch=True)

#Sets the migration command for migrating the database.
manager.add_command('db', MigrateCommand)

MODES = ["uncond", "mjem", "lsejem"]

#Output directory for a command: the --out flag, or a folder under the configured OUT_DIR.
def outDirFor(out, command):
    return out if out else os.path.join(app.config.get('OUT_DIR', "runs"), command)

#Parses a comma separated list of integers, as used by the sweep flags.
def intList(text):
    return [int(part) for part in text.split(",") if part.strip()]

def wordList(text):
    return [part.strip() for part in text.split(",") if part.strip()]


#Initializes the database via the 'python3 manage.py initDB' command.
#Creates the database for the application and prints a message once the initialization is complete.
@manager.command
def initDB():
    db.create_all(app=app)
    print('Database Initialized!')

#Prints every recorded run, newest first.
@manager.command
def listRuns():
    runs = getAllRuns()
    if not runs:
        print("No runs recorded!")
    for run in runs:
        print("%(runID)5d  %(command)-16s seed=%(seed)-6d exit=%(exitCode)s  %(startedAt)s  %(outDir)s" % run)


#Fits p0 to a dataset and stores it as init.ebmi.
class FitInitCommand(Command):
    option_list = (
        Option('--data', dest='data', required=True),
        Option('--out', dest='out', default=None),
        Option('--init', dest='init', default="informative", choices=list(INIT_MODES)),
        Option('--eps-reg', dest='epsReg', type=float, default=DEFAULT_EPS_REG),
        Option('--seed', dest='seed', type=int, default=None),
        Option('--no-clamp', dest='clamp', action='store_false', default=True),
    )

    def run(self, data, out, init, epsReg, seed, clamp):
        seed = app.config.get('DEFAULT_SEED', 0) if seed is None else seed
        return cmdFitInit(data, outDirFor(out, "fit-init"), init=init, epsReg=epsReg, seed=seed, clamp=clamp)


#Fits p0, then runs the training loop.
class TrainCommand(Command):
    option_list = (
        Option('--config', dest='config', default=None),
        Option('--data', dest='data', required=True),
        Option('--out', dest='out', default=None),
        Option('--seed', dest='seed', type=int, default=None),
        Option('--k', dest='k', type=int, default=None),
        Option('--init', dest='init', default=None, choices=list(INIT_MODES)),
        Option('--mode', dest='mode', default=None, choices=MODES),
        Option('--inject-sigma', dest='injectSigma', type=float, default=None),
        Option('--reg-coeff', dest='regCoeff', type=float, default=None),
    )

    def run(self, config, data, out, seed, k, init, mode, injectSigma, regCoeff):
        prefetch = app.config.get('PREFETCH_BATCHES') or None
        return cmdTrain(config, data, outDirFor(out, "train"), seed=seed, k=k, init=init, mode=mode, injectSigma=injectSigma, regCoeff=regCoeff, progress=app.config.get('PROGRESS_BARS', False), prefetch=prefetch)


#Draws samples from a checkpoint, either fresh SGLD chains from p0 or replay buffer entries.
class SampleCommand(Command):
    option_list = (
        Option('--checkpoint', dest='checkpoint', required=True),
        Option('--count', dest='count', type=int, default=64),
        Option('--mode', dest='mode', default="fresh-chain", choices=list(SAMPLE_MODES)),
        Option('--out', dest='out', default=None),
        Option('--seed', dest='seed', type=int, default=None),
        Option('--k', dest='k', type=int, default=None),
    )

    def run(self, checkpoint, count, mode, out, seed, k):
        seed = app.config.get('DEFAULT_SEED', 0) if seed is None else seed
        return cmdSample(checkpoint, count, outDirFor(out, "sample"), mode=mode, seed=seed, steps=k)


class EvalCommand(Command):
    option_list = (
        Option('--checkpoint', dest='checkpoint', required=True),
        Option('--data', dest='data', required=True),
        Option('--out', dest='out', default=None),
        Option('--seed', dest='seed', type=int, default=None),
        Option('--count', dest='count', type=int, default=None),
        Option('--bins', dest='bins', type=int, default=30),
    )

    def run(self, checkpoint, data, out, seed, count, bins):
        seed = app.config.get('DEFAULT_SEED', 0) if seed is None else seed
        return cmdEval(checkpoint, data, outDirFor(out, "eval"), seed=seed, count=count, bins=bins)


class InspectInitCommand(Command):
    option_list = (
        Option('--init-file', dest='initFile', required=True),
        Option('--out', dest='out', default=None),
        Option('--count', dest='count', type=int, default=16),
        Option('--shape', dest='shape', default=None),
        Option('--seed', dest='seed', type=int, default=None),
    )

    def run(self, initFile, out, count, shape, seed):
        seed = app.config.get('DEFAULT_SEED', 0) if seed is None else seed
        return cmdInspectInit(initFile, outDirFor(out, "inspect-init"), count=count, shape=shape, seed=seed)


#Sweeps (K, init, seed) cells with capped training and writes the stability matrix.
class BenchStabilityCommand(Command):
    option_list = (
        Option('--config', dest='config', default=None),
        Option('--data', dest='data', required=True),
        Option('--out', dest='out', default=None),
        Option('--k', dest='k', type=intList, default=[1, 5, 10]),
        Option('--init', dest='init', type=wordList, default=["informative", "uniform"]),
        Option('--seeds', dest='seeds', type=intList, default=[0, 1, 2, 3, 4]),
        Option('--iters', dest='iters', type=int, default=None),
        Option('--threads', dest='threads', type=int, default=None),
    )

    def run(self, config, data, out, k, init, seeds, iters, threads):
        threads = threads or app.config.get('EBM_THREADS', 1)
        return cmdBenchStability(config, data, outDirFor(out, "bench-stability"), k, init, seeds, iterations=iters, threads=threads)


manager.add_command('fit-init', FitInitCommand())
manager.add_command('train', TrainCommand())
manager.add_command('sample', SampleCommand())
manager.add_command('eval', EvalCommand())
manager.add_command('inspect-init', InspectInitCommand())
manager.add_command('bench-stability', BenchStabilityCommand())

#If the application is run via 'manage.py', facilitate manager arguments.
if __name__ == "__main__":
    manager.run()
