#Imports the models and controllers from the different directories.
from .models import *
from .controllers import *
