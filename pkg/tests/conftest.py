import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260821)


@pytest.fixture
def rand_img(rng):
    def make(h=32, w=32, low=0.0, high=1.0, seed=None):
        gen = rng if seed is None else np.random.default_rng(seed)
        return gen.uniform(low, high, size=(h, w, 3))

    return make


def build_photo_fixture(size=224):
    """Procedural stand-in for a photograph: sky gradient, sun, ridge
    line, textured foreground.  Smooth regions plus hard edges give the
    spectrum both strong low-frequency mass and real high-frequency
    content, which is what the frequency-split checks need."""
    n = size
    y = np.linspace(0.0, 1.0, n)[:, None]
    x = np.linspace(0.0, 1.0, n)[None, :]
    img = np.zeros((n, n, 3))

    # Sky: vertical gradient, bluer at the top.
    img[:, :, 0] = 0.55 + 0.25 * y
    img[:, :, 1] = 0.65 + 0.15 * y
    img[:, :, 2] = 0.90 - 0.20 * y

    # Sun disk with a soft rim.
    d = np.sqrt((y - 0.22) ** 2 + (x - 0.70) ** 2)
    sun = np.clip(1.0 - d / 0.09, 0.0, 1.0) ** 0.7
    for c, amt in enumerate((1.0, 0.95, 0.75)):
        img[:, :, c] = img[:, :, c] * (1 - sun) + amt * sun

    # Ridge: jagged skyline from summed sinusoids, dark slopes below.
    ridge = 0.55 + 0.06 * np.sin(9.0 * x[0]) + 0.03 * np.sin(23.0 * x[0] + 1.3)
    below = y > ridge[None, :]
    slope = 0.18 + 0.10 * np.abs(np.sin(31.0 * x + 17.0 * y))
    for c, amt in enumerate((0.9, 1.0, 0.7)):
        img[:, :, c] = np.where(below, slope * amt, img[:, :, c])

    # Foreground grass band with fine texture.
    gen = np.random.default_rng(224224)
    grass = gen.uniform(0.0, 1.0, size=(n, n))
    band = y > 0.82
    img[:, :, 0] = np.where(band, 0.10 + 0.15 * grass, img[:, :, 0])
    img[:, :, 1] = np.where(band, 0.35 + 0.25 * grass, img[:, :, 1])
    img[:, :, 2] = np.where(band, 0.08 + 0.10 * grass, img[:, :, 2])

    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def photo224():
    return build_photo_fixture(224)
