import os
from dotenv import load_dotenv

load_dotenv()

# Model defaults
DEFAULT_K = int(os.getenv("DEFAULT_K", "6"))
DEFAULT_STEPS = int(os.getenv("DEFAULT_STEPS", "100000"))
DEFAULT_SAMPLE_EVERY = int(os.getenv("DEFAULT_SAMPLE_EVERY", "500"))
DEFAULT_REPLICATES = int(os.getenv("DEFAULT_REPLICATES", "10"))
DEFAULT_ALPHAS = [float(a) for a in os.getenv("DEFAULT_ALPHAS", "0,0.25,0.5,0.75,1.0").split(",")]
DEFAULT_MASTER_SEED = int(os.getenv("DEFAULT_MASTER_SEED", "20240101"))

# Small-world rewiring probability
DEFAULT_P_REWIRE = float(os.getenv("DEFAULT_P_REWIRE", "0.1"))

# Gap statistic
GAP_K_MAX = int(os.getenv("GAP_K_MAX", "5"))
GAP_REFS = int(os.getenv("GAP_REFS", "10"))

# Sweep execution
MAX_WORKERS = int(os.getenv("MAX_WORKERS", "1"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", os.path.join("data", "results"))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
