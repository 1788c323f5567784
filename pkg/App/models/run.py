#DeskEBM
#Energy-based model training toolkit

#RUN MODEL - Defines the attributes recorded for each command invocation, and its relationship to the stability sweep cells.

#Imports datetime.
from datetime import datetime

#Imports the shared database to be used in defining the model without overwriting the database.
from .sharedDB import db

#Defines the run database table.
class Run(db.Model):
    runID = db.Column(db.Integer, primary_key = True)
    command = db.Column(db.String(32), nullable = False)
    seed = db.Column(db.BigInteger, nullable = False)
    configHash = db.Column(db.String(64), nullable = True)
    dataHash = db.Column(db.String(64), nullable = True)
    outDir = db.Column(db.String(512), nullable = False)
    status = db.Column(db.String(16), nullable = False, default = "running")
    exitCode = db.Column(db.Integer, nullable = True)
    message = db.Column(db.Text, nullable = True)
    startedAt = db.Column(db.DateTime, nullable = False, default = datetime.utcnow)
    finishedAt = db.Column(db.DateTime, nullable = True)

    #Declares a relationship with the StabilityCell table, such that the cells of a sweep are deleted with the sweep.
    cells = db.relationship('StabilityCell', backref=db.backref("run", uselist=False), cascade="all, delete")

    #Returns the details for a particular run record.
    def toDict(self):
        return {
            "runID" : self.runID,
            "command" : self.command,
            "seed" : self.seed,
            "configHash" : self.configHash,
            "dataHash" : self.dataHash,
            "outDir" : self.outDir,
            "status" : self.status,
            "exitCode" : self.exitCode,
            "message" : self.message,
            "startedAt" : self.startedAt.strftime("%Y-%m-%d %H:%M:%S") if self.startedAt else None,
            "finishedAt" : self.finishedAt.strftime("%Y-%m-%d %H:%M:%S") if self.finishedAt else None,
            "numCells" : len(self.cells)
        }
