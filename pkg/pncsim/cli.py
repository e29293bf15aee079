# pncsim/cli.py

"""
Command-line entry point: validate a SimConfig from flags, run the sweep,
write the CSV and its manifest.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import ValidationError

from pncsim.errors import PncSimError
from pncsim.operations.harness import parse_ebn0, sweep
from pncsim.schemas import IotaMode, SimConfig

logger = logging.getLogger(__name__)


def _parse_iota(value: str):
    if value == "random":
        return IotaMode.RANDOM, 0
    if value.startswith("fixed:"):
        try:
            return IotaMode.FIXED, int(value.split(":", 1)[1])
        except ValueError:
            pass
    raise click.BadParameter(f"expected fixed:<int> or random, got {value!r}", param_hint="--iota")


def _validation_message(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
                     for err in exc.errors())


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--code", default="mn-regular", show_default=True,
              help="mn-regular, cyclic-eg or alist:<path>")
@click.option("--n", "n", type=int, default=1008, show_default=True, help="Block length.")
@click.option("--code-seed", type=int, default=1, show_default=True)
@click.option("--generator-poly", "generator_poly_path", type=click.Path(exists=True, dir_okay=False),
              help="Generator polynomial file making an alist code cyclic.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--pulse", type=click.Choice(["rect", "srrc"]), default="srrc", show_default=True)
@click.option("--rolloff", type=float, default=None, help="SRRC roll-off (default 1.0).")
@click.option("--span", type=int, default=8, show_default=True, help="SRRC truncation in symbols.")
@click.option("--eps", "epsilon", type=float, default=0.5, show_default=True)
@click.option("--iota-max", type=int, default=0, show_default=True)
@click.option("--iota", "iota_spec", default="fixed:0", show_default=True, help="fixed:<v> or random")
@click.option("--delta-theta", type=float, default=0.0, show_default=True, help="Radians.")
@click.option("--decoder", type=click.Choice(["gspa", "jcnc"]), default="gspa", show_default=True)
@click.option("--outer", "n_outer", type=int, default=4, show_default=True)
@click.option("--inner", "n_inner", type=int, default=5, show_default=True)
@click.option("--jcnc-iters", type=int, default=None, help="Binary SPA iterations (default outer*inner).")
@click.option("--ebn0", "ebn0_spec", default="2", show_default=True, help="start:stop:step or a,b,c")
@click.option("--frames", type=int, default=100, show_default=True)
@click.option("--first-frame", type=int, default=0, show_default=True,
              help="Index of the first frame; disjoint ranges of one seed can be pooled.")
@click.option("--max-frame-errors", type=int, default=100, show_default=True)
@click.option("--channel", type=click.Choice(["whitened", "matched"]), default="whitened", show_default=True)
@click.option("--crc", type=click.Choice(["on", "off"]), default="off", show_default=True)
@click.option("--detector", "detector_mode", type=click.Choice(["exact", "max-log"]), default="exact",
              show_default=True)
@click.option("--max-memory", type=int, default=1, show_default=True)
@click.option("--loading", type=float, default=1e-3, show_default=True)
@click.option("--continuous/--no-continuous", default=False, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="CSV path.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default="INFO", show_default=True)
def main(out: Path, log_level: str, iota_spec: str, ebn0_spec: str, pulse: str, crc: str, **options):
    """Monte-Carlo BER sweep of a decode-at-relay PNC link."""
    logging.basicConfig(level=getattr(logging, log_level.upper()))
    iota_mode, iota = _parse_iota(iota_spec)
    try:
        ebn0 = parse_ebn0(ebn0_spec)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--ebn0") from exc
    try:
        cfg = SimConfig(pulse="rectangular" if pulse == "rect" else "srrc", crc=crc == "on",
                        iota_mode=iota_mode, iota=iota, ebn0_db=ebn0, **options)
    except ValidationError as exc:
        raise click.UsageError(_validation_message(exc)) from exc

    try:
        result = sweep(cfg, out)
    except (PncSimError, OSError) as exc:
        logger.error("sweep failed: %s", exc)
        raise click.ClickException(str(exc)) from exc
    for point in result.points:
        click.echo(f"{point.ebn0_db:6.2f} dB  frames={point.frames_run:6d}  "
                   f"BER={point.xor_ber:.3e}  FER={point.fer:.3e}")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command and return its exit code instead of exiting."""
    try:
        rv = main.main(args=list(argv) if argv is not None else None, prog_name="pncsim",
                       standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    # --help and other early exits come back as the exit code
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(cli_main())
