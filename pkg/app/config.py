import os
import logging

from dotenv import load_dotenv

# Pick up a local .env if one exists; real environment variables win
load_dotenv(override=False)

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./usv_trackctl.db")
SIM_OUTPUT_DIR = os.getenv("SIM_OUTPUT_DIR", "./runs")

SCHEMA_VERSION = "usv-trackctl/v1"
VERSION = "0.1.0"


def sim_max_workers() -> int:
    """Process-pool size for compare and sweep batches; 1 runs them inline."""
    return int(os.getenv("SIM_MAX_WORKERS", "1"))


def sim_instability_threshold() -> float:
    return float(os.getenv("SIM_INSTABILITY_THRESHOLD", "1e6"))


def configure_logging(level: str = None) -> None:
    """
    Configure root logging the same way for the API and the CLI.
    """
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
