import numpy as np
import pytest
from PIL import Image


def random_image(rng: np.random.Generator, height: int = 8, width: int = 8) -> np.ndarray:
    return rng.random((height, width, 3)).astype(np.float32)


def save_image(tensor: np.ndarray, path) -> None:
    pixels = np.clip(np.rint(tensor * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels, mode="RGB").save(path)


def make_image_dir(tmp_path, ids, seed=0, height=8, width=8, suffix=".png"):
    """Write one small random image per id; returns the directory."""
    rng = np.random.default_rng(seed)
    image_dir = tmp_path / "images"
    image_dir.mkdir(exist_ok=True)
    for image_id in ids:
        save_image(random_image(rng, height, width), image_dir / f"{image_id}{suffix}")
    return image_dir


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
