#Imports the individual controllers for the application, lowest level first.
from .seeding import *
from .tensor import *
from .energyNet import *
from .initDist import *
from .sgld import *
from .objectives import *
from .config import *
from .datasets import *
from .evalDiag import *
from .trainer import *
from .run import *
from .commands import *
