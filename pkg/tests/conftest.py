import numpy as np
import pytest
from scipy import ndimage

from lfmd.imageio import write_idx


def smooth_image(rng, n=64, sigma=3.0, m=None):
    """Gaussian-filtered noise rescaled to [0, 1]."""
    p = ndimage.gaussian_filter(rng.standard_normal((n, m or n)), sigma, mode="wrap")
    return (p - p.min()) / (p.max() - p.min())


def blob_shape(n=64, radius=10.0, seed=0):
    """Smooth, asymmetric non-negative shape with compact support in the middle."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:n, 0:n] - (n - 1) / 2.0
    img = np.zeros((n, n))
    for _ in range(4):
        cx, cy = rng.uniform(-radius / 2, radius / 2, 2)
        s = rng.uniform(2.0, 4.0)
        img += np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    img[np.hypot(x, y) > radius] = 0.0
    return img / img.max()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def export_mnist_subset(out_dir):
    """Write the 5,000-digit MNIST sample bundled with mlxtend as IDX files."""
    mlxtend_data = pytest.importorskip("mlxtend.data")
    X, y = mlxtend_data.mnist_data()
    images = X.reshape(-1, 28, 28).astype(np.uint8)
    images_path = out_dir / "images-idx3-ubyte"
    labels_path = out_dir / "labels-idx1-ubyte"
    write_idx(images, images_path)
    write_idx(y.astype(np.uint8), labels_path)
    return images_path, labels_path


@pytest.fixture(scope="session")
def mnist_subset(tmp_path_factory):
    return export_mnist_subset(tmp_path_factory.mktemp("mnist"))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
