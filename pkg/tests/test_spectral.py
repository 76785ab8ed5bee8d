import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgdecay.errors import InvalidArgument, SpectralAssumptionViolated
from kgdecay.spectral import (
    PotentialSpec,
    apply_B_power,
    assemble_hamiltonian,
    build_grid,
    check_decay,
    load_potential_table,
    lowest_eigenvalue,
    lp_norm,
    project,
    spectrum,
    tune_strength,
)

from oracles import dense_function, free_box_eigenvalues, square_well_binding


class TestGrid:
    def test_spacing(self):
        g = build_grid(10.0, 999)
        assert g.dr == pytest.approx(0.01, rel=1e-14)
        assert g.r[0] == pytest.approx(0.01, rel=1e-12)
        assert g.r[-1] == pytest.approx(9.99, rel=1e-12)
        assert build_grid(40.0, 4000).dr == 40.0 / 4001

    @pytest.mark.parametrize("r_max,n", [(1.0, 15), (0.0, 100), (-1.0, 100)])
    def test_rejects(self, r_max, n):
        with pytest.raises(InvalidArgument):
            build_grid(r_max, n)


class TestHamiltonian:
    def test_stencil(self):
        g = build_grid(10.0, 999)
        H = assemble_hamiltonian(g, PotentialSpec("zero", 1.0))
        assert np.allclose(H.diagonal, 20001.0, rtol=1e-12)
        assert np.allclose(H.off_diagonal, -10000.0, rtol=1e-12)
        A = H.toarray()
        assert np.array_equal(A, A.T)

    def test_free_spectrum_matches_box(self):
        g = build_grid(20.0, 400)
        H = assemble_hamiltonian(g, PotentialSpec("zero", 1.0)).toarray()
        E = np.linalg.eigvalsh(H)
        k = np.arange(1, g.n + 1)
        discrete, continuum = free_box_eigenvalues(1.0, g.r_max, g.n, g.dr, k)
        assert np.allclose(E, discrete, rtol=1e-10)
        low = k <= 20
        err = np.abs(E[low] - continuum[low])
        assert np.all(err <= 0.1 * g.dr**2 * (k[low] * np.pi / g.r_max) ** 4 + 1e-10)

    def test_free_convergence_order(self):
        errs = []
        for n in (199, 399):
            g = build_grid(20.0, n)
            E = np.linalg.eigvalsh(assemble_hamiltonian(g, PotentialSpec("zero", 1.0)).toarray())[:5]
            _, exact = free_box_eigenvalues(1.0, 20.0, n, g.dr, np.arange(1, 6))
            errs.append(np.abs(E - exact) / exact)
        order = np.log2(errs[0] / errs[1])
        assert np.all(order >= 1.8)

    def test_slow_tail_rejected(self):
        g = build_grid(50.0, 200)
        table = np.column_stack([g.r, -1.0 / (1.0 + g.r**2)])
        assert not check_decay(g, table[:, 1])


class TestEigendecompose:
    def test_free_operator_has_no_bound_state(self):
        with pytest.raises(SpectralAssumptionViolated) as exc:
            spectrum(build_grid(20.0, 200), PotentialSpec("zero", 1.0))
        assert exc.value.n_discrete == 0

    def test_square_well_matches_oracle(self, square_well):
        b = square_well_binding(4.0, 1.0)
        assert square_well.omega**2 == pytest.approx(1.0 - b, rel=1e-3)
        assert len(square_well.discrete) == 1

    def test_deep_well_two_bound_states(self):
        # second l = 0 state binds once sqrt(V0) a > 3 pi / 2
        V0 = (1.6 * np.pi) ** 2
        with pytest.raises(SpectralAssumptionViolated) as exc:
            spectrum(build_grid(30.0, 1500), PotentialSpec("square_well", 1.0, depth=V0, radius=1.0))
        assert exc.value.n_discrete == 2
        assert all(e < 1.0 for e in exc.value.eigenvalues)

    def test_orthonormal_and_sign(self, spec_n1):
        V, dr = spec_n1.vectors, spec_n1.grid.dr
        G = V.T @ V * dr
        assert np.max(np.abs(G - np.eye(len(G)))) < 1e-10
        assert spec_n1.phi[0] > 0

    def test_csv(self, square_well):
        lines = square_well.to_csv().splitlines()
        assert lines[0] == "k,E_k,is_discrete"
        assert lines[1].startswith("1,") and lines[1].endswith(",1")
        assert len(lines) == square_well.grid.n + 1

    def test_tune_strength(self):
        g = build_grid(60.0, 300)
        pot = tune_strength(g, PotentialSpec("gaussian", 1.0, amplitude=-3.0, width=2.0), 0.4)
        assert np.sqrt(lowest_eigenvalue(g, pot)) == pytest.approx(0.4, abs=1e-12)

    def test_table_roundtrip(self, tmp_path):
        g = build_grid(30.0, 600)
        pot = PotentialSpec("gaussian", 1.0, amplitude=-3.0, width=2.0)
        r = np.linspace(0.0, 30.0, 30001)
        path = tmp_path / "gauss.txt"
        np.savetxt(path, np.column_stack([r, pot(r)]))
        spec = spectrum(g, load_potential_table(path, 1.0))
        assert spec.omega == pytest.approx(spectrum(g, pot).omega, rel=1e-6)


class TestFunctionalCalculus:
    def test_identity_and_eigenvector(self, spec_n1, rng):
        v = rng.standard_normal(spec_n1.grid.n)
        assert np.allclose(apply_B_power(spec_n1, 0.0, v), v, atol=1e-11)
        out = apply_B_power(spec_n1, 2.0, spec_n1.phi)
        assert np.allclose(out, spec_n1.omega**2 * spec_n1.phi, atol=1e-11)

    def test_inverse_pair(self, spec_n1, rng):
        v = project(spec_n1, rng.standard_normal(spec_n1.grid.n), "continuous")
        back = apply_B_power(spec_n1, 1.0, apply_B_power(spec_n1, -1.0, v, "continuous"), "continuous")
        assert np.max(np.abs(back - v)) < 1e-12 * np.max(np.abs(v)) * 100

    def test_matches_matrix_action(self, spec_n1, rng):
        v = rng.standard_normal(spec_n1.grid.n)
        H = assemble_hamiltonian(spec_n1.grid, spec_n1.potential)
        out = apply_B_power(spec_n1, 2.0, v)
        assert np.linalg.norm(out - H.matvec(v)) < 1e-9 * np.linalg.norm(H.matvec(v))

    def test_against_dense_oracle(self, spec_n1, rng):
        v = rng.standard_normal(spec_n1.grid.n)
        ref = dense_function(spec_n1, lambda E: E ** -0.25, v)
        out = apply_B_power(spec_n1, -0.5, v)
        assert np.allclose(out, ref, rtol=1e-9, atol=1e-9)

    def test_nonfinite_rejected(self, spec_n1):
        v = np.zeros(spec_n1.grid.n)
        v[3] = np.nan
        with pytest.raises(InvalidArgument):
            apply_B_power(spec_n1, 1.0, v)

    def test_projections(self, spec_n1, rng):
        v = rng.standard_normal(spec_n1.grid.n)
        Pd, Pc = project(spec_n1, v, "discrete"), project(spec_n1, v, "continuous")
        assert np.allclose(Pd + Pc, v, atol=1e-12)
        assert np.allclose(project(spec_n1, Pc, "continuous"), Pc, atol=1e-12)
        assert np.max(np.abs(project(spec_n1, Pc, "discrete"))) < 1e-12
        assert np.allclose(project(spec_n1, spec_n1.phi, "discrete"), spec_n1.phi, atol=1e-12)
        assert np.max(np.abs(project(spec_n1, spec_n1.phi, "continuous"))) < 1e-12


class TestNorms:
    def test_l2_is_euclidean(self, rng):
        g = build_grid(10.0, 500)
        w = rng.standard_normal(g.n)
        assert lp_norm(w, 2, g) == pytest.approx(np.sqrt(4 * np.pi * np.sum(w * w) * g.dr), rel=1e-13)

    @pytest.mark.parametrize("p", [1, 2, 4, 8])
    def test_gaussian_against_fine_quadrature(self, p):
        coarse = build_grid(12.0, 4000)
        fine = build_grid(12.0, 40000)
        vals = [lp_norm(g.r * np.exp(-g.r**2), p, g) for g in (coarse, fine)]
        assert vals[0] == pytest.approx(vals[1], rel=1e-6)

    def test_gaussian_l2_closed_form(self):
        g = build_grid(12.0, 4000)
        # 4 pi int exp(-2 r^2) r^2 dr = (pi / 2)^(3/2)
        assert lp_norm(g.r * np.exp(-g.r**2), 2, g) == pytest.approx((np.pi / 2) ** 0.75, rel=1e-9)

    def test_sup_norm(self):
        g = build_grid(10.0, 999)
        assert lp_norm(g.r * np.exp(-g.r**2), np.inf, g) == pytest.approx(np.exp(-g.r[0] ** 2))

    def test_unsupported(self):
        with pytest.raises(InvalidArgument):
            lp_norm(np.ones(20), 3, build_grid(1.0, 20))

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(1e-6, 1e3), sign=st.sampled_from([-1.0, 1.0]), p=st.sampled_from([1, 2, 4, 8, np.inf]))
    def test_homogeneity(self, c, sign, p):
        c = sign * c
        g = build_grid(10.0, 100)
        v = g.r * np.exp(-g.r)
        assert lp_norm(c * v, p, g) == pytest.approx(abs(c) * lp_norm(v, p, g), rel=1e-12)


def test_square_well_second_order():
    from oracles import square_well_binding

    exact = 1.0 - square_well_binding(4.0, 1.0)
    errs = []
    for n in (600, 1200):
        s = spectrum(build_grid(30.0, n), PotentialSpec("square_well", 1.0, depth=4.0, radius=1.0))
        errs.append(abs(s.omega**2 - exact))
    assert np.log2(errs[0] / errs[1]) > 1.8
