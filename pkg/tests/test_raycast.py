"""Compositing and single-ray marching against closed forms and the
brute-force reference."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import random_transfer, random_volume
from reference_renderer import ReferenceVolume, march_reference

from imhotep.raycast import composite_front_to_back, raymarch_pixel
from imhotep.shading import LightingParams
from imhotep.transfer import TransferFunction, opacity_correct
from imhotep.volume import Volume


def test_composite_single_opaque_sample():
    color, alpha = composite_front_to_back([((1.0, 0.0, 0.0), 1.0)])
    assert np.allclose(color, (1, 0, 0)) and alpha == 1.0


def test_composite_two_samples_closed_form():
    color, alpha = composite_front_to_back(
        [((1.0, 0.0, 0.0), 0.5), ((0.0, 1.0, 0.0), 0.5)])
    assert np.allclose(color, (0.5, 0.25, 0.0))
    assert alpha == pytest.approx(0.75)


def test_composite_empty_identity():
    color, alpha = composite_front_to_back([])
    assert np.allclose(color, 0) and alpha == 0.0


samples_strategy = st.lists(
    st.tuples(
        st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
        st.floats(0, 1),
    ),
    max_size=60,
)


@given(samples_strategy)
@settings(max_examples=100, deadline=None)
def test_early_exit_within_bound(samples):
    full_c, full_a = composite_front_to_back(samples)
    cut_c, cut_a = composite_front_to_back(samples, early_exit_alpha=0.99)
    assert abs(full_a - cut_a) < 0.01
    assert np.all(np.abs(full_c - cut_c) < 0.01)


HOMOGENEOUS = Volume(
    voxels=np.full((11, 11, 16), 200, dtype=np.int16),
    spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), orientation=np.eye(3),
)
FLAT_TF = TransferFunction.from_points(
    [(-1000.0, (0, 0, 0, 0)), (199.0, (1, 0.5, 0.2, 0.15)), (201.0, (1, 0.5, 0.2, 0.15))],
    reference_step=1.0)
AMBIENT = LightingParams(ka=1.0, kd=0.0, ks=0.0)


def test_ray_missing_box_is_empty():
    rgb, a = raymarch_pixel(HOMOGENEOUS, FLAT_TF, AMBIENT,
                            (np.array([0.0, 0.0, 50.0]), np.array([1.0, 0.0, 0.0])),
                            step=0.5)
    assert a == 0.0 and np.allclose(rgb, 0)


def test_homogeneous_alpha_matches_closed_form():
    # Path length through the sampling domain along +x is (nx-1) = 15 mm.
    a_tf = 0.15
    for step in (0.1, 0.05):
        rgb, alpha = raymarch_pixel(
            HOMOGENEOUS, FLAT_TF, AMBIENT,
            (np.array([-4.0, 5.0, 5.0]), np.array([1.0, 0.0, 0.0])), step=step)
        expected = 1.0 - (1.0 - a_tf) ** 15.0
        assert alpha == pytest.approx(expected, abs=1e-3)


def test_depth_limit_truncates_path():
    # Limit the ray to half the box: 4 mm to entry + 7.5 mm inside.
    rgb, alpha = raymarch_pixel(
        HOMOGENEOUS, FLAT_TF, AMBIENT,
        (np.array([-4.0, 5.0, 5.0]), np.array([1.0, 0.0, 0.0])),
        step=0.05, depth_limit=11.5)
    expected = 1.0 - (1.0 - 0.15) ** 7.5
    assert alpha == pytest.approx(expected, abs=1e-3)


def test_opacity_correction_disabled_is_step_dependent():
    _, a_coarse = raymarch_pixel(
        HOMOGENEOUS, FLAT_TF, AMBIENT,
        (np.array([-4.0, 5.0, 5.0]), np.array([1.0, 0.0, 0.0])),
        step=1.0, opacity_correction=False)
    _, a_fine = raymarch_pixel(
        HOMOGENEOUS, FLAT_TF, AMBIENT,
        (np.array([-4.0, 5.0, 5.0]), np.array([1.0, 0.0, 0.0])),
        step=0.5, opacity_correction=False)
    assert abs(a_fine - a_coarse) > 0.05


def test_single_rays_match_reference_implementation():
    rng = np.random.RandomState(11)
    lp = LightingParams()
    for seed in range(6):
        volume = random_volume(seed, dims=(8, 8, 8))
        tf = random_transfer(seed + 50)
        rv = ReferenceVolume(volume)
        tf_values = [float(v) for v in tf.values]
        tf_rgba = [[float(c) for c in row] for row in tf.rgba]
        lighting = (lp.ka, lp.kd, lp.ks, lp.shininess, lp.gradient_epsilon)
        for _ in range(25):
            origin = rng.uniform(-6, 13, size=3)
            target = rng.uniform(1, 6, size=3)
            direction = target - origin
            direction /= np.linalg.norm(direction)
            step = float(rng.uniform(0.2, 0.9))
            rgb, alpha = raymarch_pixel(volume, tf, lp, (origin, direction), step)
            ref = march_reference(rv, tf_values, tf_rgba, list(origin),
                                  list(direction), step, tf.reference_step, lighting)
            assert np.allclose(rgb, ref[:3], atol=1e-9)
            assert alpha == pytest.approx(ref[3], abs=1e-9)
