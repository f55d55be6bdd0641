import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sqtransfer.model import (
    ChannelKind,
    DissipationChannel,
    SqueezedBathParams,
    SystemParams,
    build_H2,
    build_H3,
    build_HE,
    fig2_params,
    fig4_params,
    squeezed_channels,
    standard_channels,
)
from sqtransfer.operators import HilbertSpec, basis_index


@pytest.fixture
def spec():
    return HilbertSpec(cavity_dim=3, mech_dim=4)


class TestParams:
    def test_coupling_products(self):
        p = SystemParams(g_ac=100, g_cm=0.01, q=0.01)
        assert p.J == pytest.approx(1.0)
        assert p.K == 0.0
        assert p.with_(include_K=True).K == pytest.approx(1e-4)

    @pytest.mark.parametrize("field", ["g_ac", "q", "kappa_a", "gamma10"])
    def test_rejects_negative(self, field):
        with pytest.raises(ValueError):
            SystemParams(**{field: -1.0})

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            SystemParams(q=float("nan"))

    def test_figure_sets(self):
        assert fig2_params().kappa_b == pytest.approx(fig2_params().kappa_a / 100)
        p4 = fig4_params()
        assert (p4.q, p4.kappa_a, p4.kappa_b) == (0.0, 0.2, 0.2)


class TestSqueezedBath:
    def test_values_at_r_03(self):
        bath = SqueezedBathParams(r=0.3, theta=math.pi)
        # sinh(0.3) = 0.3045203, cosh(0.3) = 1.0453385
        assert bath.N == pytest.approx(0.0927326, abs=1e-7)
        assert bath.M == pytest.approx(0.3183268, abs=1e-7)

    @given(st.floats(0.0, 2.0))
    def test_squeezing_identity(self, r):
        bath = SqueezedBathParams(r=r, theta=math.pi)
        assert abs(1 + 2 * (bath.N - bath.M) - math.exp(-2 * r)) < 1e-12

    @given(st.floats(0.0, 2.0), st.floats(0.0, 2 * math.pi))
    def test_pure_state_bound(self, r, theta):
        # |M|^2 = N(N+1) for a pure squeezed vacuum
        bath = SqueezedBathParams(r=r, theta=theta)
        assert abs(abs(bath.M) ** 2 - bath.N * (bath.N + 1)) <= 1e-9 * max(1.0, bath.N**2)

    def test_rejects_negative_r(self):
        with pytest.raises(ValueError):
            SqueezedBathParams(r=-0.1)


class TestHamiltonians:
    def test_tripartite_matrix_element(self, spec):
        p = SystemParams(g_ac=100, g_cm=0.01, q=0.0)
        H = build_H2(p, spec).toarray()
        row = basis_index(spec, 2, 0, 1)
        col = basis_index(spec, 1, 1, 0)
        assert H[row, col] == pytest.approx(1j * p.J)
        assert H[col, row] == pytest.approx(-1j * p.J)

    def test_pump_matrix_element(self, spec):
        p = SystemParams(q=0.01, g_cm=0.0)
        H = build_H2(p, spec).toarray()
        assert H[basis_index(spec, 0, 0, 2), basis_index(spec, 0, 0, 0)] == pytest.approx(1j * 0.01 * math.sqrt(2))

    def test_K_term(self, spec):
        p = SystemParams(q=0.01, g_cm=0.01, include_K=True)
        H = build_H2(p, spec).toarray()
        elem = H[basis_index(spec, 0, 1, 1), basis_index(spec, 0, 1, 0)]
        assert elem == pytest.approx(-2j * p.K)
        H_noK = build_H2(p.with_(include_K=False), spec).toarray()
        assert H_noK[basis_index(spec, 0, 1, 1), basis_index(spec, 0, 1, 0)] == 0

    def test_H3_drops_pump(self, spec):
        p = SystemParams(q=0.05, include_K=True)
        np.testing.assert_allclose(
            build_H3(p, spec).toarray(), build_H2(p.with_(q=0.0, include_K=False), spec).toarray()
        )

    def test_drive_sign(self, spec):
        p = SystemParams(E1=25, E2=7)
        H = build_HE(p, spec).toarray()
        g, e1, e2 = (basis_index(spec, k, 0, 0) for k in range(3))
        assert H[g, e2] == pytest.approx(25j)
        assert H[g, e1] == pytest.approx(7j)
        assert H[e1, e2] == 0

    @pytest.mark.parametrize("builder", [build_H2, build_H3, build_HE])
    def test_hermitian(self, builder, spec):
        H = builder(SystemParams(include_K=True), spec).toarray()
        np.testing.assert_allclose(H, H.conj().T)


class TestChannels:
    def test_standard(self, spec):
        p = SystemParams(gamma21=0.5)
        ch = standard_channels(p, spec)
        assert [c.label for c in ch] == ["sigma21", "sigma10", "a", "b"]
        assert [c.rate for c in ch] == [0.5, 20.0, 0.2, 0.002]
        assert all(c.kind is ChannelKind.STANDARD for c in ch)

    def test_squeezed_replaces_mechanics(self, spec):
        bath = SqueezedBathParams(r=0.3)
        ch = squeezed_channels(fig4_params(), bath, spec)
        assert ch[-1].kind is ChannelKind.SQUEEZED_VACUUM
        assert ch[-1].bath is bath
        assert all(c.kind is ChannelKind.STANDARD for c in ch[:-1])

    def test_validation(self, spec):
        op = standard_channels(SystemParams(), spec)[2].operator
        with pytest.raises(ValueError):
            DissipationChannel(op, -1.0)
        with pytest.raises(ValueError):
            DissipationChannel(op, 1.0, ChannelKind.SQUEEZED_VACUUM)
