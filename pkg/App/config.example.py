#Sample Config
#Rename to config.py

class development:
    SQLALCHEMY_DATABASE_URI = 'sqlite:///deskEBM.db'
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    ENV = 'development'
    OUT_DIR = "runs"
    EBM_THREADS = 4
    DEFAULT_SEED = 0
    PROGRESS_BARS = True
    PREFETCH_BATCHES = 0
    LOG_LEVEL = "INFO"

class production:
    SQLALCHEMY_DATABASE_URI = ''
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    ENV = 'production'
    OUT_DIR = "/var/lib/deskebm/runs"
    EBM_THREADS = 16
    DEFAULT_SEED = 0
    PROGRESS_BARS = False
    PREFETCH_BATCHES = 2
    LOG_LEVEL = "WARNING"
