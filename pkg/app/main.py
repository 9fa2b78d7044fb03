from fastapi import FastAPI, Depends, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from sqlalchemy import text
from typing import List, Optional
import logging

from app.config import DATABASE_URL, SIM_OUTPUT_DIR, VERSION, configure_logging
from app.database import get_db, engine
from app.errors import DriveBoundError, InstabilityError, ParameterError, ReportingError
from app.models import CompareRequest, RunResponse, SaturationReport, ScenarioConfig, VerifySaturationRequest
from app.schemas import Base
from app.services.reporting_service import ReportingService
from app.services.run_service import RunService
from app.services.simulation_service import SimulationService
from app.services.verification_service import verify_saturation

configure_logging()
logger = logging.getLogger(__name__)

# Create database tables
Base.metadata.create_all(bind=engine)

app = FastAPI(
    title="USV Tracking Control Simulator",
    description="Backstepping trajectory tracking of a surface vessel under actuator saturation",
    version=VERSION,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Initialize services
simulation_service = SimulationService()
reporting_service = ReportingService()
run_service = RunService()


def _execute(cfg: ScenarioConfig, records, db) -> RunResponse:
    try:
        metrics = reporting_service.publish(records, cfg)
    except ReportingError as e:
        raise HTTPException(status_code=500, detail=str(e))
    return run_service.record_run(db, cfg, metrics, reporting_service.run_dir(cfg))


def _simulate(cfg: ScenarioConfig, db) -> List:
    try:
        return simulation_service.run_scenario(cfg)
    except ParameterError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except (InstabilityError, DriveBoundError) as e:
        logger.error(f"Run {cfg.name} aborted: {e}")
        run_service.record_run(db, cfg, None, None, status="aborted")
        raise HTTPException(status_code=500, detail=f"Run aborted: {e}")


@app.get("/")
async def root():
    return {"message": "USV Tracking Control Simulator"}


@app.get("/health")
async def health_check(db=Depends(get_db)):
    logger.info(f"DATABASE_URL: {DATABASE_URL.split('://')[0]}://...")
    logger.info(f"SIM_OUTPUT_DIR: {SIM_OUTPUT_DIR}")

    try:
        db.execute(text("SELECT 1"))
        database = "reachable"
    except Exception as e:
        logger.error(f"Database check failed: {e}")
        database = "unreachable"

    return {
        "status": "healthy",
        "version": VERSION,
        "database": database,
    }


@app.post("/simulate", response_model=RunResponse)
def simulate(cfg: ScenarioConfig, db=Depends(get_db)):
    """
    Run one scenario, write its artifacts and register the run.
    """
    records = _simulate(cfg, db)
    return _execute(cfg, records, db)


@app.post("/compare", response_model=List[RunResponse])
def compare(request: CompareRequest, db=Depends(get_db)):
    """
    Run the same scenario under each requested method.
    """
    runs = []
    for method in request.methods:
        cfg = SimulationService.with_method(request.scenario, method)
        runs.append(_execute(cfg, _simulate(cfg, db), db))
    return runs


@app.post("/verify-saturation", response_model=SaturationReport)
def verify(request: VerifySaturationRequest):
    """
    Drive a saturation model with random bounded signals and report the extremes.
    """
    return verify_saturation(
        request.model,
        signals=request.signals,
        duration=request.duration,
        dt=request.dt,
        seed=request.seed,
    )


@app.get("/runs/", response_model=List[RunResponse])
async def read_runs(method: Optional[str] = None, skip: int = 0, limit: int = 100, db=Depends(get_db)):
    """
    Retrieve registered runs, optionally filtered by method.
    """
    return run_service.get_runs(db, method=method, skip=skip, limit=limit)


@app.get("/runs/{run_id}", response_model=RunResponse)
async def read_run(run_id: int, db=Depends(get_db)):
    run = run_service.get_run(db, run_id=run_id)
    if run is None:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@app.delete("/runs/{run_id}")
async def delete_run(run_id: int, db=Depends(get_db)):
    """
    Remove a run from the registry. Artifacts on disk are left in place.
    """
    success = run_service.delete_run(db, run_id=run_id)
    if not success:
        raise HTTPException(status_code=404, detail="Run not found")
    return {"message": "Run deleted successfully"}
