from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, func
from sqlalchemy.orm import relationship

from pncsim.db import Base


class SweepRun(Base):
    __tablename__ = "sweep_runs"
    id = Column(Integer, primary_key=True, index=True)
    label = Column(String(100), nullable=False, default="")
    config_json = Column(Text, nullable=False)
    n = Column(Integer, nullable=False)
    k = Column(Integer, nullable=False)
    h_sha256 = Column(String(64), nullable=False, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    points = relationship("BerPointRecord", back_populates="run", cascade="all, delete-orphan",
                          order_by="BerPointRecord.ebn0_db")


class BerPointRecord(Base):
    __tablename__ = "ber_points"
    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("sweep_runs.id", ondelete="CASCADE"), nullable=False, index=True)
    ebn0_db = Column(Float, nullable=False)
    frames_run = Column(Integer, nullable=False)
    xor_bit_errors = Column(Integer, nullable=False)
    xor_ber = Column(Float, nullable=False)
    frame_errors = Column(Integer, nullable=False)
    fer = Column(Float, nullable=False)
    mean_outer_iters = Column(Float, nullable=False)
    mean_inner_iters = Column(Float, nullable=False)
    delay_resolution_attempts = Column(Integer, nullable=False, default=0)
    delay_resolution_successes = Column(Integer, nullable=False, default=0)

    run = relationship("SweepRun", back_populates="points")
