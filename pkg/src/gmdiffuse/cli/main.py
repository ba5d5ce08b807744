"""
gmdiffuse command-line entry point.

Usage:
    gmdiffuse <command> [--config FILE] [--out DIR] [--seed N] [flags...]

Commands:
    gen-mixture   Sample a mixture to samples.csv
    train         Learn score models; the run directory becomes a model stack
    sample        Generate samples from a model stack (or exact mixture scores)
    eval          Score errors, sample quality and bound terms to metrics.json
    spectrum      Hermite spectrum of the posterior mean (n <= 2)

Config files are TOML (.toml) or JSON (.json); flags override file values.
Every run directory gets config.json (the resolved config) and manifest.json
(input and output hashes). Failures print an error JSON on stdout, write it to
<out>/error.json when the run directory is known, and exit with status 1.

Environment:
    GMDIFFUSE_LOG: error | info | debug
"""

import argparse
import json
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from gmdiffuse.cli.commands import HANDLERS
from gmdiffuse.core.config import configure_logging, get_settings_info
from gmdiffuse.core.errors import ConfigError, GmdiffuseError
from gmdiffuse.core.storage import dumps_json, write_json, write_manifest
from gmdiffuse.schemas.run_config import Command, RunConfig


logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# flag, config key, type, help
FLAGS = [
    ("--out", "out", str, "Run directory"),
    ("--seed", "seed", int, "Global seed"),
    ("--eps", "eps", float, "Target accuracy in (0, 0.5]"),
    ("--delta", "delta", float, "Failure probability"),
    ("--degree", "degree", int, "Cap on the Hermite degree"),
    ("--samples-per-level", "samples_per_level", int, "Regression samples per level"),
    ("--count", "count", int, "Number of samples to draw or generate"),
    ("--threads", "threads", int, "Worker cap"),
    ("--mixture", "mixture", str, "MixtureSpec JSON file"),
    ("--samples", "samples", str, "Training samples CSV"),
    ("--models", "models", str, "Model stack directory"),
    ("--generated", "generated", str, "Generated samples CSV"),
    ("--reference", "reference", str, "Reference samples CSV"),
    ("--sigma-sq", "sigma_sq", float, "Noise level for spectrum"),
    ("--d-max", "d_max", int, "Maximum spectrum degree"),
    ("--center", "center", _float_list, "Spectrum center, e.g. 0.25 or 1,0"),
    ("--mc-count", "mc_count", int, "Monte-Carlo draws per score-error level"),
    ("--log-level", "log_level", str, "error | info | debug"),
]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser; flags that are not given stay absent from the namespace."""
    parser = argparse.ArgumentParser(
        prog="gmdiffuse",
        description="Learn and sample Gaussian mixtures with a diffusion model",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  gmdiffuse gen-mixture --mixture triangle.json --count 10000 --seed 1 --out runs/data\n"
            "  gmdiffuse train --config train.toml --eps 0.3 --out runs/model\n"
            "  gmdiffuse sample --models runs/model --count 10000 --seed 2 --out runs/gen\n"
        ),
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Subcommand")
    parser.add_argument("--config", type=Path, default=None, help="TOML or JSON config file")
    for flag, dest, kind, text in FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=argparse.SUPPRESS, help=text)
    return parser


def load_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a TOML or JSON config file.

    Raises:
        ConfigError: If the file is missing, has another suffix, or does not parse
    """
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}", key="config")
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as f:
                values = tomllib.load(f)
        elif suffix == ".json":
            values = json.loads(path.read_text())
        else:
            raise ConfigError(f"Config file must be .toml or .json, got {path.name}", key="config")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}", key="config")

    if not isinstance(values, dict):
        raise ConfigError(f"Config file {path} must hold a table/object", key="config")
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge file values with flags and validate.

    Raises:
        ConfigError: Naming the offending key path (e.g. "locality.R0")
    """
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(load_config_file(args.config))

    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    values.update(flags)
    values["command"] = args.command

    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"]) or "config"
        if first["type"] == "extra_forbidden":
            message = f"Unknown config key '{key}'"
        else:
            message = f"Invalid value for '{key}': {first['msg']}"
        raise ConfigError(message, key=key, errors=e.error_count())


def parse_config(
    argv: Optional[Sequence[str]] = None,
    echo: bool = True,
    args: Optional[argparse.Namespace] = None,
) -> RunConfig:
    """
    Parse flags (and the --config file) into a RunConfig.

    With echo=True the resolved config is written to <out>/config.json.
    An already-parsed namespace can be passed as `args`; argv is then ignored.
    """
    if args is None:
        args = build_parser().parse_args(argv)
    cfg = resolve_config(args)
    if echo:
        write_json(cfg.out / "config.json", cfg.model_dump(mode="json"))
    return cfg


def dispatch(cfg: RunConfig, config_path: Optional[Path] = None) -> int:
    """Run the subcommand, write the manifest, print the status; returns the exit status."""
    result = HANDLERS[cfg.command](cfg)
    write_manifest(
        cfg.out,
        cfg.command,
        {
            "config": config_path,
            "mixture": cfg.mixture,
            "samples": cfg.samples,
            "models": cfg.models,
            "generated": cfg.generated,
            "reference": cfg.reference,
        },
        get_settings_info(),
    )
    print(dumps_json(result))
    return 0


def _fail(payload: Dict[str, Any], out_dir: Optional[Path]) -> int:
    print(dumps_json(payload))
    if out_dir is not None:
        try:
            write_json(Path(out_dir) / "error.json", payload)
        except OSError as e:
            logger.error(f"[FAIL] Could not write error.json: {e}")
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    out_dir = getattr(args, "out", None)

    try:
        configure_logging(getattr(args, "log_level", None))
        cfg = parse_config(args=args)
        out_dir = cfg.out
        logger.info(f"[INFO] Running {cfg.command} into {cfg.out}")
        status = dispatch(cfg, args.config)
        logger.info(f"[OK] {cfg.command} completed")
        return status
    except GmdiffuseError as e:
        logger.error(f"[FAIL] {e.message}")
        return _fail(e.to_dict(), out_dir)
    except Exception as e:
        logger.exception(f"[FAIL] Unexpected error: {e}")
        return _fail({"status": "failed", "error": "internal_error", "message": str(e)}, out_dir)


if __name__ == "__main__":
    sys.exit(main())
