#DeskEBM
#Energy-based model training toolkit

#STABILITY CELL MODEL - One (K, init, seed) cell of a bench-stability sweep.

from .sharedDB import db

#Defines the stability cell database table.
class StabilityCell(db.Model):
    cellID = db.Column(db.Integer, primary_key = True)
    runID = db.Column(db.Integer, db.ForeignKey('run.runID'), nullable = False)
    steps = db.Column(db.Integer, nullable = False)
    init = db.Column(db.String(16), nullable = False)
    seed = db.Column(db.BigInteger, nullable = False)
    diverged = db.Column(db.Boolean, nullable = False)
    iterations = db.Column(db.Integer, nullable = False)
    finalGap = db.Column(db.Float, nullable = True)
    seconds = db.Column(db.Float, nullable = True)

    def toDict(self):
        return {
            "cellID" : self.cellID,
            "runID" : self.runID,
            "k" : self.steps,
            "init" : self.init,
            "seed" : self.seed,
            "diverged" : self.diverged,
            "iterations" : self.iterations,
            "finalGap" : self.finalGap,
            "seconds" : self.seconds
        }
