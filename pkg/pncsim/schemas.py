from datetime import datetime
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pncsim.operations.gfcode import LogSumMode
from pncsim.operations.macchannel import PulseKind

EG_LENGTHS = {15: 2, 63: 3, 255: 4}
MAX_API_FRAMES = 200


class DecoderKind(str, Enum):
    GSPA = "gspa"
    JCNC = "jcnc"


class ChannelPath(str, Enum):
    WHITENED = "whitened"
    MATCHED = "matched"


class IotaMode(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"


class SimConfig(BaseModel):
    """Everything needed to reproduce a Monte-Carlo sweep."""

    code: str = Field("mn-regular", description="mn-regular, cyclic-eg or alist:<path>")
    n: int = Field(1008, ge=4)
    code_seed: int = 1
    generator_poly_path: Optional[str] = None
    pulse: PulseKind = PulseKind.SRRC
    rolloff: Optional[float] = Field(None, ge=0.0, le=1.0)
    span: int = Field(8, ge=1)
    decoder: DecoderKind = DecoderKind.GSPA
    ebn0_db: List[float] = Field(default_factory=lambda: [2.0])
    frames: int = Field(100, ge=1)
    first_frame: int = Field(0, ge=0)
    max_frame_errors: int = Field(100, ge=1)
    epsilon: float = Field(0.5, ge=0.0, lt=1.0)
    iota_max: int = Field(0, ge=0)
    iota_mode: IotaMode = IotaMode.FIXED
    iota: int = 0
    delta_theta: float = 0.0
    n_outer: int = Field(4, ge=1)
    n_inner: int = Field(5, ge=1)
    seed: int = Field(0, ge=0)
    channel: ChannelPath = ChannelPath.WHITENED
    crc: bool = False
    max_memory: Optional[int] = Field(1, ge=0)
    loading: float = Field(1e-3, ge=0.0)
    continuous: bool = False
    workers: int = Field(1, ge=1)
    detector_mode: LogSumMode = LogSumMode.EXACT
    jcnc_iters: Optional[int] = Field(None, ge=1)

    @field_validator("code")
    def validate_code(cls, v):
        if v in ("mn-regular", "cyclic-eg") or (v.startswith("alist:") and len(v) > len("alist:")):
            return v
        raise ValueError(f"unknown code selection: {v!r}")

    @field_validator("ebn0_db")
    def validate_ebn0(cls, v):
        if not v:
            raise ValueError("at least one Eb/N0 point is required")
        return v

    @model_validator(mode="after")
    def check_combinations(self):
        if self.pulse is PulseKind.RECTANGULAR and self.rolloff is not None:
            raise ValueError("rectangular pulse takes no rolloff")
        if self.code == "cyclic-eg" and self.n not in EG_LENGTHS:
            raise ValueError(f"cyclic-eg codes exist for n in {sorted(EG_LENGTHS)}, got {self.n}")
        if abs(self.iota) > self.iota_max:
            raise ValueError(f"|iota| = {abs(self.iota)} exceeds iota_max = {self.iota_max}")
        if self.iota_mode is IotaMode.RANDOM and self.iota != 0:
            raise ValueError("a fixed iota value cannot be combined with random iota")
        if not self.code.startswith("alist:") and 2 * self.iota_max >= self.n:
            raise ValueError(f"2*iota_max must be below n = {self.n}")
        shifted = self.iota != 0 or (self.iota_mode is IotaMode.RANDOM and self.iota_max > 0)
        if shifted and not self.is_cyclic_code:
            raise ValueError("a nonzero frame offset needs a cyclic code (cyclic-eg or a generator polynomial)")
        return self

    @property
    def is_cyclic_code(self) -> bool:
        return self.code == "cyclic-eg" or self.generator_poly_path is not None

    @property
    def effective_rolloff(self) -> Optional[float]:
        if self.pulse is PulseKind.SRRC:
            return 1.0 if self.rolloff is None else self.rolloff
        return None

    @property
    def effective_jcnc_iters(self) -> int:
        return self.jcnc_iters or self.n_outer * self.n_inner


class FrameOutcome(BaseModel):
    snr_index: int
    frame_index: int
    iota: int
    bit_errors: int
    frame_error: bool
    converged: bool
    outer_iters: int
    inner_iters: int
    delay_attempted: bool = False
    delay_resolved: bool = False
    recovered_a: Optional[bool] = None
    recovered_b: Optional[bool] = None


class BerPoint(BaseModel):
    ebn0_db: float
    frames_run: int
    xor_bit_errors: int
    xor_ber: float
    frame_errors: int
    fer: float
    mean_outer_iters: float
    mean_inner_iters: float
    delay_resolution_attempts: int
    delay_resolution_successes: int

    @model_validator(mode="after")
    def check_conservation(self):
        if self.frame_errors > self.frames_run:
            raise ValueError("frame_errors exceeds frames_run")
        return self


class RunManifest(BaseModel):
    config: SimConfig
    seed: int
    n: int
    k: int
    m: int
    h_sha256: str
    csv_path: str
    created_at: datetime


# ---------------------------------------------
# HTTP request / response models
# ---------------------------------------------

class SweepRequest(SimConfig):
    label: str = Field("", max_length=100)
    frames: int = Field(20, ge=1, le=MAX_API_FRAMES)
    n: int = Field(63, ge=4)
    code: str = "cyclic-eg"

    @field_validator("code")
    def reject_code_files(cls, v):
        if v.startswith("alist:"):
            raise ValueError("alist files can only be loaded from the command line")
        return v

    @field_validator("generator_poly_path")
    def reject_generator_files(cls, v):
        if v is not None:
            raise ValueError("generator polynomial files can only be loaded from the command line")
        return v


class SweepLabelUpdate(BaseModel):
    label: str = Field(..., max_length=100)


class BerPointRead(BaseModel):
    ebn0_db: float
    frames_run: int
    xor_bit_errors: int
    xor_ber: float
    frame_errors: int
    fer: float
    mean_outer_iters: float
    mean_inner_iters: float
    delay_resolution_attempts: int
    delay_resolution_successes: int

    model_config = ConfigDict(from_attributes=True)


class SweepRead(BaseModel):
    id: int
    label: str
    n: int
    k: int
    h_sha256: str
    created_at: Optional[datetime] = None
    points: List[BerPointRead] = Field(default_factory=list)

    model_config = ConfigDict(from_attributes=True)


class CrcRequest(BaseModel):
    bits: str = Field(..., min_length=1, pattern=r"^[01]+$")


class CrcResponse(BaseModel):
    crc: int
    frame: str


class CrcCheckResponse(BaseModel):
    valid: bool


class SnrLossResponse(BaseModel):
    n: int
    iota: int
    snr_loss_db: float


class ErrorResponse(BaseModel):
    error: str = Field(..., description="Error message")
