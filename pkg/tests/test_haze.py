import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satdehaze.errors import NegativeDepthError, NonPositiveBetaError, ShapeMismatchError
from satdehaze.haze import (
    SEVERITY_BANDS,
    HazeParams,
    Severity,
    compose_haze,
    invert_haze,
    sample_haze_params,
    transmission,
)
from satdehaze.imaging import ImageTensor

import oracles
from conftest import random_unit_image


class TestTransmission:
    def test_zero_depth_gives_unity(self):
        t = transmission(2.0, np.zeros((4, 4)))
        assert np.all(t == 1.0)

    def test_direct_substitution(self):
        t = transmission(1.0, np.full((2, 2), math.log(2.0)))
        assert np.allclose(t, 0.5, atol=1e-12)

    def test_matches_scalar_loop(self, rng):
        for _ in range(5):
            beta = float(rng.uniform(0.1, 5.0))
            depth = rng.random((6, 5)) * 3.0
            assert np.abs(transmission(beta, depth) - oracles.naive_transmission(beta, depth)).max() < 1e-7

    def test_bad_inputs(self):
        with pytest.raises(NonPositiveBetaError):
            transmission(0.0, np.zeros((2, 2)))
        with pytest.raises(NonPositiveBetaError):
            transmission(-1.0, np.zeros((2, 2)))
        with pytest.raises(NegativeDepthError):
            transmission(1.0, np.array([[0.0, -0.1]]))

    def test_strictly_decreasing_in_beta_and_depth(self):
        depth = np.full((3, 3), 0.8)
        assert np.all(transmission(2.0, depth) < transmission(1.0, depth))
        assert np.all(transmission(1.0, depth + 0.5) < transmission(1.0, depth))


def _params(a, beta, depth, severity="moderate"):
    return HazeParams(airlight=a, beta=beta, depth=np.asarray(depth, dtype=np.float64),
                      severity=severity)


class TestComposeHaze:
    def test_no_haze_limit(self, rng):
        clear = random_unit_image(rng, 5, 5)
        hazy = compose_haze(clear, _params(0.9, 1.0, np.zeros((5, 5))))
        assert np.array_equal(hazy.data, clear.data)

    def test_full_haze_limit(self, rng):
        clear = random_unit_image(rng, 4, 4)
        hazy = compose_haze(clear, _params(0.8, 10.0, np.full((4, 4), 10.0)))
        assert np.abs(hazy.data - 0.8).max() < 1e-4

    def test_direct_substitution(self):
        # J=0.5, A=1.0, t=0.5 -> I = 0.75
        clear = ImageTensor.unit(np.full((3, 3, 3), 0.5, dtype=np.float32))
        hazy = compose_haze(clear, _params(1.0, 1.0, np.full((3, 3), math.log(2.0))))
        assert np.allclose(hazy.data, 0.75, atol=1e-7)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            compose_haze(random_unit_image(rng, 4, 4), _params(0.9, 1.0, np.zeros((5, 5))))

    def test_per_channel_airlight(self, rng):
        clear = random_unit_image(rng, 4, 4)
        p = _params((0.7, 0.8, 0.9), 10.0, np.full((4, 4), 10.0))
        hazy = compose_haze(clear, p)
        assert np.abs(hazy.data - np.array([0.7, 0.8, 0.9])).max() < 1e-3

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_convex_combination(self, seed):
        r = np.random.default_rng(seed)
        clear = ImageTensor.unit(r.random((6, 6, 3), dtype=np.float32))
        a = float(r.uniform(0.0, 1.0))
        p = _params(a, float(r.uniform(0.1, 4.0)), r.random((6, 6)) * 2.0)
        hazy = compose_haze(clear, p)
        lo = np.minimum(clear.data, np.float32(a))
        hi = np.maximum(clear.data, np.float32(a))
        assert np.all(hazy.data >= lo - 1e-7) and np.all(hazy.data <= hi + 1e-7)

    def test_monotone_in_airlight(self, rng):
        clear = random_unit_image(rng, 5, 5)
        depth = np.full((5, 5), 1.0)  # t = e^-1 < 1 everywhere
        low = compose_haze(clear, _params(0.3, 1.0, depth))
        high = compose_haze(clear, _params(0.9, 1.0, depth))
        assert np.all(high.data > low.data)


class TestInvertHaze:
    def test_round_trip(self, rng):
        worst = 0.0
        for _ in range(10):
            clear = random_unit_image(rng, 8, 8)
            p = sample_haze_params("moderate", 8, 8, int(rng.integers(1 << 30)))
            hazy = compose_haze(clear, p)
            recovered = invert_haze(hazy, p)
            mask = p.transmission() >= 0.05
            worst = max(worst, float(np.abs(recovered.data - clear.data)[mask].max()))
        assert worst < 1e-5

    def test_identity_transmission(self, rng):
        hazy = random_unit_image(rng, 4, 4)
        out = invert_haze(hazy, _params(0.9, 1.0, np.zeros((4, 4))))
        assert np.array_equal(out.data, hazy.data)

    def test_airlight_fixed_point(self):
        hazy = ImageTensor.unit(np.full((4, 4, 3), 0.85, dtype=np.float32))
        out = invert_haze(hazy, _params(0.85, 1.5, np.random.default_rng(0).random((4, 4))))
        assert np.abs(out.data - 0.85).max() < 1e-6

    def test_t_min_validation(self, rng):
        hazy = random_unit_image(rng, 4, 4)
        with pytest.raises(ValueError):
            invert_haze(hazy, _params(0.9, 1.0, np.zeros((4, 4))), t_min=0.0)


class TestSampleHazeParams:
    def test_determinism(self):
        a = sample_haze_params("thin", 16, 16, 42)
        b = sample_haze_params("thin", 16, 16, 42)
        assert a.airlight == b.airlight and a.beta == b.beta
        assert np.array_equal(a.depth, b.depth)

    @pytest.mark.parametrize("severity", list(Severity))
    def test_band_membership(self, severity):
        lo, hi = SEVERITY_BANDS[severity]
        for seed in range(25):
            p = sample_haze_params(severity, 24, 24, seed)
            assert lo <= p.mean_transmission() <= hi

    def test_severity_ordering(self):
        thin = sample_haze_params("thin", 16, 16, 9)
        thick = sample_haze_params("thick", 16, 16, 9)
        assert thin.mean_transmission() > thick.mean_transmission()

    def test_airlight_band(self):
        for seed in range(10):
            p = sample_haze_params("moderate", 8, 8, seed)
            a = p.airlight_vector
            assert np.all(a >= 0.7) and np.all(a <= 1.0)

    def test_depth_normalized(self):
        p = sample_haze_params("thick", 32, 32, 3)
        assert p.depth.min() == 0.0 and p.depth.max() == 1.0


class TestHazeParams:
    def test_validation(self):
        with pytest.raises(NonPositiveBetaError):
            _params(0.9, -2.0, np.zeros((2, 2)))
        with pytest.raises(NegativeDepthError):
            _params(0.9, 1.0, [[-1.0, 0.0]])
        with pytest.raises(ValueError):
            _params(1.5, 1.0, np.zeros((2, 2)))

    def test_severity_coercion(self):
        p = _params(0.9, 1.0, np.zeros((2, 2)), severity="thick")
        assert p.severity is Severity.THICK
