#!/usr/bin/env python3
"""Fetch the evaluation datasets into ``data/``.

MNIST (5,000-sample subset, 500 per digit) and SatImage (6,435 rows) are taken
from the data files bundled in the ``mlxtend`` and ``keel-ds`` wheels, which
are reachable through any PyPI mirror.  Outputs:

    data/mnist5k.csv      785 columns, label last
    data/satimage.csv     37 columns, label last (all 6,435 rows)

Files already present are left alone.  If you have the official files
(``train-images-idx3-ubyte`` etc.), load them directly with ``load_idx``.
"""

import argparse
import gzip
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

SOURCES = {
    "mnist5k.csv": ("mlxtend", "mlxtend/data/data/mnist_5k.csv.gz"),
    "satimage.csv": ("keel-ds", "keel_ds/data/balanced/raw/satimage.dat"),
}


def _download_wheel(package: str, dest: Path) -> Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "-d", str(dest), package],
        check=True, capture_output=True,
    )
    wheels = sorted(dest.glob("*.whl"))
    if not wheels:
        raise RuntimeError(f"pip did not produce a wheel for {package}")
    return wheels[-1]


def fetch(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (package, member) in SOURCES.items():
        target = out_dir / name
        if target.exists():
            print(f"{target} exists, skipping")
            continue
        with tempfile.TemporaryDirectory() as tmp:
            wheel = _download_wheel(package, Path(tmp))
            raw = zipfile.ZipFile(wheel).read(member)
        if member.endswith(".gz"):
            raw = gzip.decompress(raw)
        text = raw.decode()
        if name == "satimage.csv":
            text = "\n".join(
                ",".join(c.strip() for c in ln.split(","))
                for ln in text.splitlines()
                if ln.strip() and not ln.startswith("@")
            ) + "\n"
        target.write_text(text)
        print(f"wrote {target}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    fetch(ap.parse_args().out)


if __name__ == "__main__":
    main()
