import logging
from typing import List, Optional

from sqlalchemy.orm import Session

from app.models import RunMetrics, RunResponse, ScenarioConfig
from app.schemas import Run as RunModel

logger = logging.getLogger(__name__)


class RunService:
    """
    Registry of simulation runs stored in the database.
    """
    def record_run(
        self,
        db: Session,
        cfg: ScenarioConfig,
        metrics: Optional[RunMetrics],
        output_dir: Optional[str],
        status: str = "completed",
    ) -> RunResponse:
        """
        Store a run with its summary metrics.
        """
        db_run = RunModel(
            name=cfg.name,
            method=cfg.method.value,
            trajectory=cfg.trajectory.preset.value,
            status=status,
            output_dir=output_dir,
        )
        if metrics is not None:
            db_run.rmse_position = metrics.rmse_position
            db_run.rmse_heading = metrics.rmse_heading
            db_run.constraint_violation_count = metrics.constraint_violation_count
            db_run.settle_time_s = metrics.settle_time_s
            db_run.final_disturbance_error = metrics.final_disturbance_error

        try:
            db.add(db_run)
            db.commit()
            db.refresh(db_run)
        except Exception as e:
            db.rollback()
            logger.error(f"Error storing run {cfg.name}: {str(e)}")
            raise
        logger.info(f"Stored run {db_run.id} ({cfg.name}, {status})")
        return RunResponse.from_orm(db_run)

    def get_runs(self, db: Session, method: Optional[str] = None, skip: int = 0, limit: int = 100) -> List[RunResponse]:
        query = db.query(RunModel)
        if method:
            query = query.filter(RunModel.method == method)
        runs = query.order_by(RunModel.id).offset(skip).limit(limit).all()
        return [RunResponse.from_orm(run) for run in runs]

    def get_run(self, db: Session, run_id: int) -> Optional[RunResponse]:
        run = db.query(RunModel).filter(RunModel.id == run_id).first()
        if run:
            return RunResponse.from_orm(run)
        return None

    def delete_run(self, db: Session, run_id: int) -> bool:
        run = db.query(RunModel).filter(RunModel.id == run_id).first()
        if not run:
            return False
        db.delete(run)
        db.commit()
        return True
