#Imports the individual models for the application.
from .sharedDB import *
from .tensor import *
from .energyModel import *
from .initDist import *
from .dataset import *
from .replayBuffer import *
from .trainConfig import *
from .lossBreakdown import *
from .trainState import *
from .evalReport import *
from .run import *
from .stabilityCell import *
