import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from flareforge.compositor import (
    apply_gamma,
    composite,
    flare_mask,
    inverse_gamma,
    mask_tolerance,
    source_blob,
)
from flareforge.errors import InvalidArgument
from flareforge.scatter import ApertureSpec, aperture_mask, diffraction_psf, render_scatter_layer

unit = st.floats(0, 1)
images = hnp.arrays(np.float64, (6, 5, 3), elements=unit)
layers = hnp.arrays(np.float64, (6, 5, 3), elements=st.floats(0, 2))


def test_gamma_examples():
    assert inverse_gamma(0.0) == 0.0 and inverse_gamma(1.0) == 1.0
    assert inverse_gamma(0.5, 2.2) == pytest.approx(0.5 ** 2.2, abs=1e-15)
    assert float(inverse_gamma(0.5, 2.2)) == pytest.approx(0.21763764, abs=1e-8)
    assert float(apply_gamma(0.04, 2.2)) == pytest.approx(0.04 ** (1 / 2.2), abs=1e-15)
    assert float(apply_gamma(0.04, 2.2)) == pytest.approx(0.231512, abs=1e-6)


def test_gamma_roundtrip_256_levels():
    x = np.arange(256) / 255.0
    assert np.abs(apply_gamma(inverse_gamma(x, 2.2), 2.2) - x).max() < 1e-6


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_gamma_must_be_positive(gamma):
    with pytest.raises(InvalidArgument):
        inverse_gamma(0.5, gamma)
    with pytest.raises(InvalidArgument):
        apply_gamma(0.5, gamma)


@given(unit, unit, st.floats(0.5, 4.0))
def test_gamma_monotone(a, b, gamma):
    lo, hi = sorted((a, b))
    assert apply_gamma(lo, gamma) <= apply_gamma(hi, gamma)
    assert inverse_gamma(lo, gamma) <= inverse_gamma(hi, gamma)


def test_zero_flare_identity():
    scene = np.random.default_rng(0).random((24, 32, 3))
    pair = composite(scene, [], 2.2)
    assert np.abs(pair.degraded - scene).max() < 1e-6
    assert pair.clean is scene
    assert not pair.mask.any()


def test_scalar_composite_formula():
    scene = np.full((4, 4, 3), 0.25)
    pair = composite(scene, [np.full((4, 4, 3), 0.1)], 2.2)
    expected = (0.25 ** 2.2 + 0.1) ** (1 / 2.2)
    assert np.abs(pair.degraded - expected).max() < 1e-9


def test_saturation_clips_at_one():
    scene = np.full((4, 4, 3), 0.8)
    pair = composite(scene, [np.full((4, 4, 3), 0.7), np.full((4, 4, 3), 0.6)], 2.2)
    assert np.all(pair.degraded == 1.0)


def test_shape_mismatch():
    with pytest.raises(InvalidArgument):
        composite(np.zeros((4, 4, 3)), [np.zeros((4, 5, 3))])


@given(images, layers, layers)
def test_adding_a_layer_never_darkens(scene, a, b):
    one = composite(scene, [a]).degraded
    two = composite(scene, [a, b]).degraded
    assert np.all(two >= one)


@given(images, hnp.arrays(np.float64, (6, 5, 3), elements=st.floats(0, 0.05)))
def test_mask_covers_every_visible_change(scene, layer):
    pair = composite(scene, [layer], 2.2)
    tol = mask_tolerance(1e-3, 2.2)
    changed = np.abs(pair.degraded - scene).max(axis=2) > tol
    assert not np.any(changed & (pair.mask == 0))


def test_flare_mask_examples():
    assert not flare_mask([], shape=(5, 6, 3)).any()
    assert flare_mask([np.full((5, 6, 3), 0.5)]).all()
    with pytest.raises(InvalidArgument):
        flare_mask([np.ones((2, 2, 3))], threshold=0.0)


def test_mask_area_monotone_in_threshold():
    psf = diffraction_psf(aperture_mask(ApertureSpec("hexagon", 128)))
    layer = render_scatter_layer(psf, (40, 30), 5.0, (1, 1, 1), (80, 60), size=64)
    areas = [flare_mask([layer], t).sum() for t in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)]
    assert areas == sorted(areas)
    assert areas[0] < areas[-1]


def test_source_blob():
    blob = source_blob((20.0, 10.0), 2.0, 3.0, (40, 30))
    assert blob.shape == (30, 40, 3)
    assert blob[10, 20, 0] == pytest.approx(3.0)
    assert blob.sum() == pytest.approx(3 * 3.0 * 2 * np.pi * 4, rel=1e-3)
    with pytest.raises(InvalidArgument):
        source_blob((0, 0), 0.0, 1.0, (10, 10))
