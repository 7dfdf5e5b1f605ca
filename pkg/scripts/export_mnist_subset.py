"""Export the 5,000-image MNIST sample shipped with mlxtend as IDX files.

    python scripts/export_mnist_subset.py data/mnist
"""

import argparse
from pathlib import Path

import numpy as np
from mlxtend.data import mnist_data

from lfmd.imageio import write_idx


def main(out: str) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    X, y = mnist_data()
    write_idx(X.reshape(-1, 28, 28).astype(np.uint8), out_dir / "images-idx3-ubyte")
    write_idx(y.astype(np.uint8), out_dir / "labels-idx1-ubyte")
    print(f"wrote {len(y)} images to {out_dir}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", nargs="?", default="data/mnist", help="output directory")
    main(ap.parse_args().out)
