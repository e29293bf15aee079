from typing import List, Optional

from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session

from pncsim import models, schemas
from pncsim.operations.harness import SweepResult


def store_sweep(db: Session, cfg: schemas.SimConfig, result: SweepResult, label: str = "") -> models.SweepRun:
    """Persist a finished sweep and its per-point rows."""
    manifest = result.manifest
    run = models.SweepRun(
        label=label,
        config_json=cfg.model_dump_json(),
        n=manifest.n,
        k=manifest.k,
        h_sha256=manifest.h_sha256,
    )
    run.points = [models.BerPointRecord(**point.model_dump()) for point in result.points]
    db.add(run)
    try:
        db.commit()
        db.refresh(run)
    except IntegrityError:
        db.rollback()
        raise
    return run


def get_all_sweeps(db: Session, skip: int = 0, limit: int = 100) -> List[models.SweepRun]:
    """Browse stored sweeps, newest id last."""
    return db.query(models.SweepRun).order_by(models.SweepRun.id).offset(skip).limit(limit).all()


def get_sweep_by_id(db: Session, sweep_id: int) -> Optional[models.SweepRun]:
    return db.query(models.SweepRun).filter(models.SweepRun.id == sweep_id).first()


def update_sweep_label(db: Session, sweep_id: int, label: str) -> Optional[models.SweepRun]:
    """Relabel a stored sweep; None when it does not exist."""
    run = get_sweep_by_id(db, sweep_id)
    if not run:
        return None
    run.label = label
    try:
        db.commit()
        db.refresh(run)
    except IntegrityError:
        db.rollback()
        raise
    return run


def delete_sweep(db: Session, sweep_id: int) -> bool:
    """Delete a sweep and its points. Returns False if not found."""
    run = get_sweep_by_id(db, sweep_id)
    if not run:
        return False
    db.delete(run)
    db.commit()
    return True
