from sqlalchemy import Column, Integer, String, Float, DateTime
from sqlalchemy.sql import func

from app.database import Base


class Run(Base):
    """
    SQLAlchemy model for a finished (or aborted) simulation run.
    """
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String(255), index=True)
    method = Column(String(32), index=True)
    trajectory = Column(String(32))
    status = Column(String(32), default="completed")
    rmse_position = Column(Float, nullable=True)
    rmse_heading = Column(Float, nullable=True)
    constraint_violation_count = Column(Integer, nullable=True)
    settle_time_s = Column(Float, nullable=True)
    final_disturbance_error = Column(Float, nullable=True)
    output_dir = Column(String(512), nullable=True)
    created_at = Column(DateTime, default=func.now())
    updated_at = Column(DateTime, default=func.now(), onupdate=func.now())
