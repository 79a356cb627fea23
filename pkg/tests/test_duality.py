import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpstab.duality import ONE, DualVector, conjugate_exponent, duality_map, g_inverse, g_p
from lpstab.experiments import load_nu0
from lpstab.model import lp_norm

NU0_L1 = 7.16539416043266


class TestGp:
    @pytest.mark.parametrize(
        "x, p, expected", [(3.0, 2.0, 3.0), (4.0, 1.5, 2.0), (-2.0, 3.0, -4.0), (0.0, 1.2, 0.0)]
    )
    def test_values(self, x, p, expected):
        assert g_p(x, p) == expected

    def test_rejects_p_le_one(self):
        with pytest.raises(ValueError):
            g_p(1.0, 1.0)

    def test_odd(self, rng):
        x = rng.uniform(-5, 5, 100)
        np.testing.assert_array_equal(g_p(-x, 1.7), -g_p(x, 1.7))

    @settings(max_examples=300, deadline=None)
    @given(
        x=st.floats(-1e3, 1e3),
        y=st.floats(-1e3, 1e3),
        p=st.floats(1.05, 6.0),
    )
    def test_strictly_increasing(self, x, y, p):
        if x < y:
            assert g_p(x, p) <= g_p(y, p)
            if y - x > 1e-6 * max(1.0, abs(x), abs(y)):
                assert g_p(x, p) < g_p(y, p)


class TestGInverse:
    def test_values(self):
        assert g_inverse(4.0, 3.0) == pytest.approx(2.0, rel=1e-15)
        assert g_inverse(-4.0, 3.0) == pytest.approx(-2.0, rel=1e-15)
        assert g_inverse(0.0, 1.4) == 0.0

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-100, 100, 1000)
        p = rng.uniform(1.05, 6.0, 1000)
        back = np.array([g_inverse(g_p(a, b), b) for a, b in zip(x, p)])
        assert np.max(np.abs(back - x) / np.abs(x)) <= 1e-10

    def test_equals_conjugate_kernel(self, rng):
        x = rng.standard_normal(20)
        np.testing.assert_allclose(g_inverse(x, 3.0), g_p(x, 1.5), rtol=1e-14)


class TestDualVector:
    def test_q_one_flag(self):
        assert DualVector([1.0, 2.0], 1.0).q == ONE
        assert DualVector.for_primal([1.0], np.inf).q == ONE
        assert DualVector.for_primal([1.0], 3.0).q == pytest.approx(1.5)

    @pytest.mark.parametrize("q", [0.5, np.inf, "two"])
    def test_rejects_bad_q(self, q):
        with pytest.raises(ValueError):
            DualVector([1.0], q)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            DualVector([np.inf], 2.0)

    def test_conjugate_exponent(self):
        assert conjugate_exponent(2.0) == 2.0
        assert conjugate_exponent(np.inf) == 1.0
        assert conjugate_exponent(1.01) == pytest.approx(101.0)


class TestDualityMap:
    def test_fig1_p2_identity(self):
        nu0 = load_nu0()
        np.testing.assert_allclose(duality_map(DualVector(nu0, 2.0)), nu0, rtol=0, atol=1e-12)

    def test_fig1_q_one(self):
        nu0 = load_nu0()
        out = duality_map(DualVector(nu0, ONE))
        np.testing.assert_allclose(out, np.sign(nu0) * NU0_L1, rtol=0, atol=1e-9)

    def test_fig1_p_101(self):
        nu0 = load_nu0()
        out = duality_map(DualVector.for_primal(nu0, 1.01))
        assert np.argmax(np.abs(out)) == 2
        assert out[2] == pytest.approx(2.43077118700778, rel=1e-3)
        others = np.delete(np.abs(out), 2)
        assert np.all(others < 1e-18)

    @pytest.mark.parametrize("q", [1.25, 2.0, 4.0, ONE])
    def test_single_entry(self, q):
        assert duality_map(DualVector([-2.5], q))[0] == pytest.approx(-2.5, rel=1e-14)

    @pytest.mark.parametrize("q", [1.25, 2.0, 4.0, ONE])
    def test_zero_maps_to_zero(self, q):
        np.testing.assert_array_equal(duality_map(DualVector(np.zeros(4), q)), 0.0)

    @pytest.mark.parametrize("q", [1.25, 2.0, 4.0])
    def test_defining_identities(self, q):
        rng = np.random.default_rng(int(q * 100))
        p = conjugate_exponent(q)
        for _ in range(1000):
            nu = rng.standard_normal(rng.integers(1, 12)) * rng.uniform(0.01, 100)
            J = duality_map(DualVector(nu, q))
            nq = lp_norm(nu, q)
            assert lp_norm(J, p) == pytest.approx(nq, rel=1e-10)
            assert nu @ J == pytest.approx(nq * lp_norm(J, p), rel=1e-10)

    @pytest.mark.parametrize("q", [1.25, 2.0, 4.0])
    def test_homogeneous(self, q, rng):
        nu = rng.standard_normal(6)
        np.testing.assert_allclose(
            duality_map(DualVector(2 * nu, q)), 2 * duality_map(DualVector(nu, q)),
            rtol=1e-12, atol=0,
        )

    def test_requires_dual_vector(self):
        with pytest.raises(TypeError):
            duality_map(np.ones(3))
