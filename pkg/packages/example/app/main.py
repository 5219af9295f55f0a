import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from causal_geometry import load_config, run

# Optional: Configure logging to see per-point logs from the library
# logging.basicConfig(level=logging.DEBUG)

logger = logging.getLogger("example")

# Get the base directory
BASE_DIR = Path(__file__).resolve().parent
CONFIG_DIR = BASE_DIR.parent / "configs"


def config_paths(config_dir: Path = CONFIG_DIR) -> list[Path]:
    """Example configurations in name order."""
    return sorted(Path(config_dir).glob("*.toml"))


def run_all(
    config_dir: Path = CONFIG_DIR,
    out_dir: Optional[Path] = None,
    format: str = "json",
) -> dict[str, int]:
    """Run every configuration in ``config_dir`` and return its exit status.

    Reports go to ``out_dir`` as ``<config>.<format>`` when it is given.
    """
    statuses: dict[str, int] = {}
    for path in config_paths(config_dir):
        report = run(load_config(path))
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            report.write(out_dir / f"{path.stem}.{format}", format)
        statuses[path.stem] = report.status
        logger.info(f"{path.name}: status {report.status}")
    return statuses


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the example configurations")
    parser.add_argument("--configs", type=Path, default=CONFIG_DIR)
    parser.add_argument("--out", type=Path, help="Directory for the reports")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    args = parser.parse_args(argv)

    statuses = run_all(args.configs, args.out, args.format)
    for name, status in statuses.items():
        print(f"{name:<32} {'pass' if status == 0 else f'status {status}'}")
    return max(statuses.values(), default=0)


if __name__ == "__main__":
    sys.exit(main())
