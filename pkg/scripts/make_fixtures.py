#!/usr/bin/env python3
"""Regenerate the bundled CSV fixtures under tests/data/.

Both fixtures are deterministic, so rerunning this script reproduces the
committed files byte for byte.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from stackcast.synthetic import make_hashrate_table, make_price_frame, write_frame_csv

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "data")


def main():
    os.makedirs(DATA_DIR, exist_ok=True)
    write_frame_csv(make_hashrate_table(rows=100, seed=7), os.path.join(DATA_DIR, "sample_hashrate.csv"))
    write_frame_csv(make_price_frame(n_days=1000, seed=0), os.path.join(DATA_DIR, "synthetic_prices.csv"))
    print(f"fixtures written to {os.path.abspath(DATA_DIR)}")


if __name__ == "__main__":
    main()
