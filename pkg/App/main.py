#DeskEBM
#Energy-based model training toolkit

#Import Modules
import logging
import os

from flask import Flask
from dotenv import load_dotenv

#Imports the models of the application.
from App.models import *

TRUE_WORDS = ["True", "true", "TRUE", "1", "yes"]

#Loads the configuration into the application from either a config file, or using environment variables.
def loadConfig(app, config):
    #Attempts to configure the application from a configuration file.
    try:
        app.config.from_object('App.config.development')
    except:
    #If no configuration file is present, use the environment variables of the host (and any .env file) to configure the application.
        print("Config file not present. Using environment variables.")
        load_dotenv()
        app.config['SQLALCHEMY_DATABASE_URI'] = os.environ.get('EBM_DATABASE_URI', default="sqlite:///deskEBM.db")
        app.config['SQLALCHEMY_TRACK_MODIFICATIONS'] = False
        app.config['OUT_DIR'] = os.environ.get('EBM_OUT_DIR', default="runs")
        app.config['EBM_THREADS'] = int(os.environ.get('EBM_THREADS', default=os.cpu_count() or 1))
        app.config['DEFAULT_SEED'] = int(os.environ.get('EBM_SEED', default=0))
        app.config['PROGRESS_BARS'] = os.environ.get('EBM_PROGRESS', default="True") in TRUE_WORDS
        app.config['LOG_LEVEL'] = os.environ.get('EBM_LOG_LEVEL', default="INFO")

    #Overrides passed in (for example by the test fixtures) win last.
    for key,value in config.items():
        app.config[key] = config[key]

#Initializes the DB and makes the initial commit.
def init_db(app):
    db.init_app(app)
    db.create_all(app=app)
    db.session.commit()

#Creates the application, loads the configuration, sets up logging, binds the run registry database, and returns the application.
def create_app(config={}):
    app = Flask(__name__)
    loadConfig(app, config)
    logging.basicConfig(level=app.config.get('LOG_LEVEL', "INFO"), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    db.init_app(app)
    app.app_context().push()
    return app
