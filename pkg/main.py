# main.py

from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.exceptions import RequestValidationError
from pncsim.db import init_db, SessionLocal
from pncsim.operations import framesync
from pncsim.operations import sweeps as sweep_ops
from pncsim.operations.harness import sweep
from pncsim import schemas
import numpy as np
import uvicorn
import logging

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    init_db()
    yield


app = FastAPI(title="pncsim", lifespan=lifespan)


def _bits(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def _sweep_read(run) -> schemas.SweepRead:
    return schemas.SweepRead.model_validate(run)


# Custom Exception Handlers
@app.exception_handler(HTTPException)
async def http_exception_handler(request: Request, exc: HTTPException):
    logger.error(f"HTTPException on {request.url.path}: {exc.detail}")
    return JSONResponse(
        status_code=exc.status_code,
        content={"error": exc.detail},
    )


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    error_messages = "; ".join([f"{err['loc'][-1]}: {err['msg']}" for err in exc.errors()])
    logger.error(f"ValidationError on {request.url.path}: {error_messages}")
    return JSONResponse(
        status_code=400,
        content={"error": error_messages},
    )


@app.get("/health")
def health():
    return {"status": "ok"}


@app.get("/snr-loss", response_model=schemas.SnrLossResponse, responses={400: {"model": schemas.ErrorResponse}})
def snr_loss(n: int, iota: int):
    """SNR given up by erasing 2*iota edge samples of a length-n frame."""
    try:
        return schemas.SnrLossResponse(n=n, iota=iota, snr_loss_db=framesync.snr_loss_db(n, iota))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


@app.post("/crc16", response_model=schemas.CrcResponse, responses={400: {"model": schemas.ErrorResponse}})
def crc16_append(req: schemas.CrcRequest):
    """Append CRC-16/CCITT-FALSE to a bit string."""
    frame = framesync.crc16_append(_bits(req.bits))
    return schemas.CrcResponse(crc=frame.crc, frame="".join(str(b) for b in frame.bits.tolist()))


@app.post("/crc16/check", response_model=schemas.CrcCheckResponse)
def crc16_check(req: schemas.CrcRequest):
    return schemas.CrcCheckResponse(valid=framesync.crc16_check(_bits(req.bits)))


# ========== Sweep Endpoints (BREAD) ==========

@app.post("/sweeps", response_model=schemas.SweepRead, responses={400: {"model": schemas.ErrorResponse}})
def create_sweep(req: schemas.SweepRequest):
    """Run a small sweep synchronously and store its points."""
    cfg = schemas.SimConfig(**req.model_dump(exclude={"label"}))
    db = SessionLocal()
    try:
        result = sweep(cfg)
        run = sweep_ops.store_sweep(db, cfg, result, label=req.label)
        return _sweep_read(run)
    except ValueError as e:
        logger.error(f"Sweep Error: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    finally:
        db.close()


@app.get("/sweeps", response_model=list[schemas.SweepRead])
def browse_sweeps(skip: int = 0, limit: int = 100):
    db = SessionLocal()
    try:
        return [_sweep_read(run) for run in sweep_ops.get_all_sweeps(db, skip=skip, limit=limit)]
    finally:
        db.close()


@app.get("/sweeps/{sweep_id}", response_model=schemas.SweepRead)
def read_sweep(sweep_id: int):
    db = SessionLocal()
    try:
        run = sweep_ops.get_sweep_by_id(db, sweep_id)
        if not run:
            raise HTTPException(status_code=404, detail="Sweep not found")
        return _sweep_read(run)
    finally:
        db.close()


@app.put("/sweeps/{sweep_id}", response_model=schemas.SweepRead)
def update_sweep(sweep_id: int, update: schemas.SweepLabelUpdate):
    """Edit the label of a stored sweep."""
    db = SessionLocal()
    try:
        run = sweep_ops.update_sweep_label(db, sweep_id, update.label)
        if not run:
            raise HTTPException(status_code=404, detail="Sweep not found")
        return _sweep_read(run)
    finally:
        db.close()


@app.delete("/sweeps/{sweep_id}")
def delete_sweep(sweep_id: int):
    db = SessionLocal()
    try:
        if not sweep_ops.delete_sweep(db, sweep_id):
            raise HTTPException(status_code=404, detail="Sweep not found")
        return {"message": "Sweep deleted successfully"}
    finally:
        db.close()


if __name__ == "__main__":
    init_db()
    uvicorn.run(app, host="127.0.0.1", port=8000)
