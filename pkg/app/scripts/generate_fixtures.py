"""
Write the deterministic synthetic fixture tree.

    python -m app.scripts.generate_fixtures --out fixtures/ --seed 1

The same seed always produces byte-identical files.
"""
import argparse
import logging
import sys

from app.services.fixtures import DEFAULT_FIXTURE_SEED, generate_fixtures

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate faqkit test fixtures.")
    parser.add_argument("--out", required=True, help="Output directory (created if missing).")
    parser.add_argument("--seed", type=int, default=DEFAULT_FIXTURE_SEED, help="Fixture seed.")
    args = parser.parse_args(argv)

    try:
        fs = generate_fixtures(args.out, seed=args.seed)
    except OSError as e:
        logger.error(f"Could not write fixtures: {e}")
        return 2
    for name, path in sorted(fs.files.items()):
        print(f"{name:16s} {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
