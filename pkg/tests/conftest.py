"""
Configuration file for pytest.
"""
import os
import sys
import tempfile
import pytest

# Add the application root directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

# Keep the run registry and artifacts out of the working tree
_scratch = tempfile.mkdtemp(prefix="usv-trackctl-tests-")
os.environ.setdefault("DATABASE_URL", f"sqlite:///{os.path.join(_scratch, 'runs.db')}")
os.environ.setdefault("SIM_OUTPUT_DIR", os.path.join(_scratch, "runs"))


@pytest.fixture
def vessel():
    """CyberShip II vessel model."""
    from app.models import VesselParams
    from app.services.vessel_model import VesselModel
    return VesselModel(VesselParams.cybership2())
