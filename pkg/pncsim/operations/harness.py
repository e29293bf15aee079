# pncsim/operations/harness.py

"""
Module: harness.py

Monte-Carlo driver: per-frame trials, BER/FER aggregation per Eb/N0 point,
CSV and manifest output.

Every frame draws from its own counter-based generator keyed by
(seed, snr index, frame index), so results do not depend on worker count
or on how a run is split.
"""

import csv
import io
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from pncsim.errors import ConstructionError, DelayResolutionError, PncSimError, RecoveryError, TrialError
from pncsim.operations.detector import BMac
from pncsim.operations.framesync import (
    CRC_BITS,
    Role,
    broadcast_recover,
    crc16_append,
    resolve_delay_crc,
    zero_pad_interference,
)
from pncsim.operations.jointdec import JointDecoder, jcnc_decode
from pncsim.operations.ldpc import (
    LdpcCode,
    build_cyclic_eg_code,
    build_regular_code,
    cyclic_shift,
    encode,
    load_alist,
    load_generator_poly,
    make_code,
)
from pncsim.operations.macchannel import (
    ChannelRealization,
    PulseKind,
    PulseShape,
    build_channel,
    simulate_matched_filter_domain,
    simulate_whitened,
    whiten,
)
from pncsim.schemas import (
    EG_LENGTHS,
    BerPoint,
    ChannelPath,
    DecoderKind,
    FrameOutcome,
    IotaMode,
    RunManifest,
    SimConfig,
)

logger = logging.getLogger(__name__)

CSV_HEADER = ("ebn0_db", "frames", "xor_bit_errors", "xor_ber", "frame_errors", "fer",
              "mean_outer_iters", "mean_inner_iters", "delay_res_attempts", "delay_res_success")


def ebn0_to_sigma2(ebn0_db: float, rate: float) -> float:
    """
    Noise variance per real dimension for unit-energy BPSK per user:
    sigma^2 = 1 / (2 R 10^(EbN0/10)).

    >>> ebn0_to_sigma2(0.0, 0.5)
    1.0
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"code rate must lie in (0, 1], got {rate}")
    return 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def frame_rng(seed: int, snr_index: int, frame_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, snr_index, frame_index])))


# ---------------------------------------------
# Building blocks from a config
# ---------------------------------------------

def _read_code_file(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConstructionError(f"cannot read {what} file: {exc.__class__.__name__}") from exc


def build_code_from_config(cfg: SimConfig) -> LdpcCode:
    poly = None
    if cfg.generator_poly_path:
        poly = load_generator_poly(_read_code_file(cfg.generator_poly_path, "generator polynomial"))

    if cfg.code == "cyclic-eg":
        h, generator = build_cyclic_eg_code(EG_LENGTHS[cfg.n])
        code = LdpcCode(h=h, generator=generator)
    elif cfg.code == "mn-regular":
        code = make_code(build_regular_code(cfg.n, seed=cfg.code_seed), poly)
    else:
        code = make_code(load_alist(_read_code_file(cfg.code.split(":", 1)[1], "alist")), poly)

    if cfg.crc and code.k <= CRC_BITS:
        raise ConstructionError(f"CRC framing needs k > {CRC_BITS}, code has k = {code.k}")
    if 2 * cfg.iota_max >= code.n:
        raise ConstructionError(f"2*iota_max = {2 * cfg.iota_max} must be below n = {code.n}")
    logger.info("code %s: n=%d k=%d m=%d%s", cfg.code, code.n, code.k, code.h.m,
                " (cyclic)" if code.is_cyclic else "")
    return code


def build_channel_from_config(cfg: SimConfig, sigma2: float = 1.0) -> ChannelRealization:
    if cfg.pulse is PulseKind.RECTANGULAR:
        pulse = PulseShape.rectangular()
    else:
        pulse = PulseShape.srrc(cfg.effective_rolloff, cfg.span)
    exact = cfg.pulse is PulseKind.RECTANGULAR and cfg.channel is ChannelPath.WHITENED
    # only the matched-filter path runs the whitening recursion that needs loading
    loading = cfg.loading if cfg.channel is ChannelPath.MATCHED else 0.0
    return build_channel(pulse, pulse, cfg.epsilon, delta_theta=cfg.delta_theta, sigma2=sigma2,
                         max_memory=cfg.max_memory, loading=loading,
                         exact_rectangular=exact, continuous=cfg.continuous)


@dataclass(frozen=True)
class SimContext:
    """Per-sweep state shared by all frames; immutable so workers can hold a copy."""

    cfg: SimConfig
    code: LdpcCode
    channel: ChannelRealization

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "SimContext":
        return cls(cfg=cfg, code=build_code_from_config(cfg), channel=build_channel_from_config(cfg))

    def sigma2(self, snr_index: int) -> float:
        return ebn0_to_sigma2(self.cfg.ebn0_db[snr_index], self.code.rate)


# ---------------------------------------------
# One frame
# ---------------------------------------------

def _draw_message(code: LdpcCode, crc: bool, rng: np.random.Generator) -> np.ndarray:
    if not crc:
        return rng.integers(0, 2, size=code.k, dtype=np.uint8)
    return crc16_append(rng.integers(0, 2, size=code.k - CRC_BITS, dtype=np.uint8)).bits


def _draw_iota(cfg: SimConfig, rng: np.random.Generator) -> int:
    if cfg.iota_mode is IotaMode.RANDOM:
        return int(rng.integers(-cfg.iota_max, cfg.iota_max + 1))
    return cfg.iota


def _receive(ctx: SimContext, c_a, c_b, channel: ChannelRealization, rng) -> np.ndarray:
    if ctx.cfg.channel is ChannelPath.MATCHED:
        y = simulate_matched_filter_domain(c_a, c_b, channel, rng)
        return whiten(y, channel.channel_taps)[:c_a.size]
    return simulate_whitened(c_a, c_b, channel, rng)


def run_trial(cfg: SimConfig, snr_index: int, frame_index: int,
              context: Optional[SimContext] = None) -> FrameOutcome:
    """
    Simulate, decode and score one frame.

    Errors are counted against c_a XOR c_b^(iota), the codeword the relay
    can actually decode under a frame offset. With CRC framing, converged
    frames also attempt delay resolution and the broadcast-phase recovery
    at both sources.

    Raises:
    - TrialError: any module failure, with the frame coordinates attached.
    """
    ctx = context or SimContext.from_config(cfg)
    code = ctx.code
    try:
        rng = frame_rng(cfg.seed, snr_index, frame_index)
        msg_a = _draw_message(code, cfg.crc, rng)
        msg_b = _draw_message(code, cfg.crc, rng)
        c_a = encode(code.generator, msg_a)
        c_b = encode(code.generator, msg_b)
        iota = _draw_iota(cfg, rng)
        channel = ctx.channel.with_noise(ctx.sigma2(snr_index)).with_offset(iota)

        r = _receive(ctx, c_a, c_b, channel, rng)
        if cfg.iota_max > 0:
            r = zero_pad_interference(r, cfg.iota_max, channel.memory)

        b_mac = BMac(channel, cfg.detector_mode)
        if cfg.decoder is DecoderKind.GSPA:
            result = JointDecoder(code.h, cfg.n_outer, cfg.n_inner, cfg.detector_mode).decode(r, b_mac)
        else:
            result = jcnc_decode(code.h, b_mac.run(r).posterior, cfg.effective_jcnc_iters)
    except PncSimError as exc:
        raise TrialError(str(exc), snr_index, frame_index) from exc

    reference = np.bitwise_xor(c_a, cyclic_shift(c_b, iota))
    bit_errors = int(np.count_nonzero(result.xor_codeword != reference))
    outcome = dict(snr_index=snr_index, frame_index=frame_index, iota=iota, bit_errors=bit_errors,
                   frame_error=bit_errors > 0, converged=result.converged,
                   outer_iters=result.outer_iters_used, inner_iters=result.inner_iters_used)

    if cfg.crc and result.converged:
        outcome.update(_resolve_and_recover(cfg, code, result, c_a, c_b, msg_a, msg_b, iota))
    return FrameOutcome(**outcome)


def _resolve_and_recover(cfg, code, result, c_a, c_b, msg_a, msg_b, iota) -> dict:
    found = None
    if result.pair_b is not None:
        try:
            found = resolve_delay_crc(result.pair_b, code.generator, cfg.iota_max)
        except DelayResolutionError as exc:
            logger.debug("delay resolution failed: %s", exc)

    recovered = {}
    for role, own, other_msg in ((Role.A, c_a, msg_b), (Role.B, c_b, msg_a)):
        try:
            rec = broadcast_recover(result.xor_codeword, own, role, code.generator, cfg.iota_max)
        except RecoveryError:
            recovered[role] = False
            continue
        recovered[role] = bool(np.array_equal(rec.message, other_msg[:-CRC_BITS]))
        if found is None and role is Role.A and recovered[role]:
            # no pair estimates (JCNC): the offset comes from source A's scan
            found = rec.iota

    return dict(delay_attempted=True, delay_resolved=found == iota,
                recovered_a=recovered[Role.A], recovered_b=recovered[Role.B])


# ---------------------------------------------
# Aggregation and sweeps
# ---------------------------------------------

def aggregate(ebn0_db: float, n: int, outcomes: Sequence[FrameOutcome]) -> BerPoint:
    frames = len(outcomes)
    bit_errors = sum(o.bit_errors for o in outcomes)
    frame_errors = sum(o.frame_error for o in outcomes)
    return BerPoint(
        ebn0_db=ebn0_db,
        frames_run=frames,
        xor_bit_errors=bit_errors,
        xor_ber=bit_errors / (frames * n) if frames else 0.0,
        frame_errors=frame_errors,
        fer=frame_errors / frames if frames else 0.0,
        mean_outer_iters=float(np.mean([o.outer_iters for o in outcomes])) if frames else 0.0,
        mean_inner_iters=float(np.mean([o.inner_iters for o in outcomes])) if frames else 0.0,
        delay_resolution_attempts=sum(o.delay_attempted for o in outcomes),
        delay_resolution_successes=sum(o.delay_resolved for o in outcomes),
    )


_WORKER_CONTEXT: Optional[SimContext] = None


def _init_worker(context: SimContext) -> None:
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = context


def _worker_trial(args) -> FrameOutcome:
    snr_index, frame_index = args
    return run_trial(_WORKER_CONTEXT.cfg, snr_index, frame_index, _WORKER_CONTEXT)


def _stop_index(outcomes: Iterable[FrameOutcome], budget: int) -> Optional[int]:
    errors = 0
    for pos, outcome in enumerate(outcomes):
        errors += outcome.frame_error
        if errors >= budget:
            return pos + 1
    return None


def run_point(ctx: SimContext, snr_index: int, pool: Optional[ProcessPoolExecutor] = None) -> BerPoint:
    """
    Run frames first_frame, first_frame + 1, ... of one Eb/N0 point until
    `frames` have run or the frame-error budget is reached. The stopping
    frame depends only on the frame outcomes, never on scheduling.
    """
    cfg = ctx.cfg
    outcomes: List[FrameOutcome] = []
    batch = max(1, 4 * cfg.workers) if pool else 1
    while len(outcomes) < cfg.frames:
        done = cfg.first_frame + len(outcomes)
        indices = range(done, min(cfg.first_frame + cfg.frames, done + batch))
        if pool:
            outcomes.extend(pool.map(_worker_trial, [(snr_index, i) for i in indices]))
        else:
            outcomes.extend(run_trial(cfg, snr_index, i, ctx) for i in indices)
        stop = _stop_index(outcomes, cfg.max_frame_errors)
        if stop is not None:
            outcomes = outcomes[:stop]
            break

    point = aggregate(cfg.ebn0_db[snr_index], ctx.code.n, outcomes)
    logger.info("Eb/N0 %.2f dB: %d frames, BER %.3e, FER %.3e", point.ebn0_db, point.frames_run,
                point.xor_ber, point.fer)
    return point


def pool_points(points: Sequence[BerPoint], n: int) -> BerPoint:
    """
    Merge points of one Eb/N0 value run over disjoint frame ranges, e.g.
    two jobs with first_frame 0 and first_frame 500 of the same seed.
    """
    if not points:
        raise ValueError("nothing to pool")
    if len({p.ebn0_db for p in points}) != 1:
        raise ValueError("pooled points must share one Eb/N0 value")
    frames = sum(p.frames_run for p in points)
    bits = sum(p.xor_bit_errors for p in points)
    frame_errors = sum(p.frame_errors for p in points)
    weighted = lambda attr: sum(getattr(p, attr) * p.frames_run for p in points) / frames if frames else 0.0
    return BerPoint(
        ebn0_db=points[0].ebn0_db,
        frames_run=frames,
        xor_bit_errors=bits,
        xor_ber=bits / (frames * n) if frames else 0.0,
        frame_errors=frame_errors,
        fer=frame_errors / frames if frames else 0.0,
        mean_outer_iters=weighted("mean_outer_iters"),
        mean_inner_iters=weighted("mean_inner_iters"),
        delay_resolution_attempts=sum(p.delay_resolution_attempts for p in points),
        delay_resolution_successes=sum(p.delay_resolution_successes for p in points),
    )


def format_csv(points: Sequence[BerPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        writer.writerow([repr(p.ebn0_db), p.frames_run, p.xor_bit_errors, repr(p.xor_ber),
                         p.frame_errors, repr(p.fer), repr(p.mean_outer_iters),
                         repr(p.mean_inner_iters), p.delay_resolution_attempts,
                         p.delay_resolution_successes])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path(csv_path: Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".manifest.json")


@dataclass(frozen=True)
class SweepResult:
    points: List[BerPoint]
    manifest: RunManifest
    csv_path: Optional[Path] = None


def sweep(cfg: SimConfig, out: Optional[Path] = None, context: Optional[SimContext] = None) -> SweepResult:
    """
    Run every Eb/N0 point of cfg. With `out`, write the CSV and the adjacent
    manifest (written only after every point has finished).
    """
    ctx = context or SimContext.from_config(cfg)
    logger.info("sweep: %d points, up to %d frames each, %d worker(s)", len(cfg.ebn0_db),
                cfg.frames, cfg.workers)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker,
                                 initargs=(ctx,)) as pool:
            points = [run_point(ctx, i, pool) for i in range(len(cfg.ebn0_db))]
    else:
        points = [run_point(ctx, i) for i in range(len(cfg.ebn0_db))]

    manifest = RunManifest(config=cfg, seed=cfg.seed, n=ctx.code.n, k=ctx.code.k, m=ctx.code.h.m,
                           h_sha256=ctx.code.h.fingerprint(), csv_path=str(out) if out else "",
                           created_at=datetime.now(timezone.utc))
    if out is not None:
        out = Path(out)
        atomic_write(out, format_csv(points))
        atomic_write(manifest_path(out), manifest.model_dump_json(indent=2))
        logger.info("wrote %s and %s", out, manifest_path(out))
    return SweepResult(points=points, manifest=manifest, csv_path=out)


def parse_ebn0(text: str) -> List[float]:
    """
    "start:stop:step" (stop inclusive) or a comma-separated list.

    >>> parse_ebn0("1:2:0.5")
    [1.0, 1.5, 2.0]
    """
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ValueError(f"bad Eb/N0 range {text!r}; expected start:stop:step with step > 0")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError("empty Eb/N0 list")
    return values
