"""Write the Statlog (Landsat Satellite) data as a CSV plus a 4-band sensor config.

The UCI servers are not always reachable, so the rows are taken from the
copy bundled in the ``keel-ds`` wheel on PyPI (6435 rows, 36 attributes,
classes {1,2,3,4,5,7}).  Attribute order is pixel-major: attribute
``4*p + b`` is spectral band ``b`` of pixel ``p`` in the 3x3 neighbourhood.

Usage:  python scripts/fetch_landsat.py [--out data/]
"""

import argparse
import csv
import glob
import json
import os
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "keel_ds/data/balanced/raw/satimage.dat"


def fetch_rows(wheel=None):
    with tempfile.TemporaryDirectory() as tmp:
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                 "-d", tmp, "keel-ds==0.2.5"],
                check=True,
            )
            wheel = glob.glob(os.path.join(tmp, "keel_ds-*.whl"))[0]
        raw = zipfile.ZipFile(wheel).read(MEMBER).decode()
    rows = []
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([v.strip() for v in line.split(",")])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--wheel", help="use an already-downloaded keel-ds wheel")
    args = ap.parse_args()

    rows = fetch_rows(args.wheel)
    assert all(len(r) == 37 for r in rows), "unexpected row width"
    header = [f"p{p}_b{b + 1}" for p in range(9) for b in range(4)] + ["label"]
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "landsat.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    sensors = {
        "sensors": [
            {"name": f"band{b + 1}", "cost": 1.0, "columns": [4 * p + b for p in range(9)]}
            for b in range(4)
        ]
    }
    with open(os.path.join(args.out, "landsat_sensors.json"), "w") as fh:
        json.dump(sensors, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(rows)} rows to {args.out}/landsat.csv")


if __name__ == "__main__":
    main()
