import numpy as np
import pytest

from shadowbag.core.errors import DimensionError, UnsupportedError
from shadowbag.services.corrmat_service import (
    assemble,
    assemble_derivative,
    build_product_cache,
    energy,
    energy_grad,
    export_csv,
    keys_to_codes,
    split_halves,
    string_keys,
)
from shadowbag.services.model_service import load_hamiltonian
from shadowbag.services.pauli_service import (
    HamiltonianSpec,
    PauliString,
    basis_index_of,
    enumerate_basis,
    string_mul,
    to_dense,
)
from shadowbag.services.shadow_service import ProductState, born_sample
from shadowbag.utils.json_storage import read_csv
from tests.dense import (
    dense_correlation_matrix,
    dense_hamiltonian,
    random_bag,
    shadow_density,
    snapshot_values,
    within_standard_errors,
)


def _index(label: str) -> int:
    return int(basis_index_of(PauliString.from_label(label).codes)[0])


class TestKeys:

    def test_xor_is_product(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 4, size=(20, 6)).astype(np.uint8)
        b = rng.integers(0, 4, size=(20, 6)).astype(np.uint8)
        product = keys_to_codes(string_keys(a) ^ string_keys(b), 6)
        for row_a, row_b, row in zip(a, b, product):
            _, expected = string_mul(PauliString.from_codes(row_a), PauliString.from_codes(row_b))
            np.testing.assert_array_equal(row, expected.codes)

    def test_split_halves(self):
        codes = PauliString.from_label("XIYZIX").codes
        left, right = split_halves(codes)
        assert enumerate_basis(6)[left[0]].label == "XIYIII"
        assert enumerate_basis(6)[right[0]].label == "IIIZIX"

    def test_split_rejects_weight_five(self):
        with pytest.raises(UnsupportedError):
            split_halves(PauliString.from_label("XXXXX").codes)


class TestProductCache:

    @pytest.fixture(scope="class")
    def cache_l3(self):
        return build_product_cache(enumerate_basis(3, 2))

    def test_examples(self, cache_l3):
        assert cache_l3.product(_index("ZII"), _index("ZII")) == (0, PauliString.identity(3))
        assert cache_l3.product(_index("XII"), _index("YII")) == (1, PauliString.from_label("ZII"))

    def test_matches_dense_products(self, cache_l3):
        dense = [to_dense(P) for P in cache_l3.basis]
        for b in range(cache_l3.dim):
            for a in range(cache_l3.dim):
                phase, S = cache_l3.product(b, a)
                np.testing.assert_allclose(dense[b] @ dense[a], 1j ** phase * to_dense(S), atol=1e-12)

    def test_halves_reassemble_products(self, cache_l3):
        basis = cache_l3.basis
        for u, codes in enumerate(cache_l3.strings):
            phase, S = string_mul(basis[cache_l3.left[u]], basis[cache_l3.right[u]])
            assert phase == 0
            np.testing.assert_array_equal(S.codes, codes)


class TestAssemble:

    def test_matches_dense_oracle(self, cache_l4):
        bag = random_bag(0, 5, 4)
        M = assemble(bag, cache_l4)
        expected = dense_correlation_matrix(shadow_density(bag), cache_l4.basis)
        np.testing.assert_allclose(M.entries, expected, atol=1e-10)

    def test_structure(self, cache_l4):
        M = assemble(random_bag(1, 20, 4), cache_l4).entries
        np.testing.assert_array_equal(np.diag(M), np.ones(M.shape[0]))
        np.testing.assert_allclose(M, M.conj().T, atol=1e-12)
        assert np.all((M.real == 0.0) | (M.imag == 0.0))

    def test_zero_state_correlator(self, cache_l4):
        bag = born_sample(ProductState.all_zero(4), 0, 20_000, 4)
        M = assemble(bag, cache_l4)
        entry = M.entries[_index("ZIII"), _index("IZII")]
        assert entry.imag == 0.0
        assert within_standard_errors(snapshot_values(bag, PauliString.from_label("ZZII")), 1.0)
        assert entry.real == pytest.approx(snapshot_values(bag, PauliString.from_label("ZZII")).mean(), abs=1e-12)

    def test_size_mismatch(self, cache_l4):
        with pytest.raises(DimensionError):
            assemble(random_bag(0, 4, 3), cache_l4)

    def test_export_round_trip(self, cache_l4, tmp_path):
        M = assemble(random_bag(2, 6, 4), cache_l4)
        export_csv(M, tmp_path / "corrmat.csv")
        rows = read_csv(tmp_path / "corrmat.csv")
        assert list(rows[0].keys()) == M.labels
        parsed = np.array([[complex(row[label]) for label in M.labels] for row in rows])
        np.testing.assert_array_equal(parsed, M.entries)


class TestDerivative:

    def test_matches_finite_difference(self, cache_l4):
        bag = random_bag(3, 6, 4)
        h = 1e-5
        for l, j in [(0, 0), (2, 1), (5, 3)]:
            plus, minus = bag.theta.copy(), bag.theta.copy()
            plus[l, j] += h
            minus[l, j] -= h
            fd = (assemble(bag.with_theta(plus), cache_l4).entries
                  - assemble(bag.with_theta(minus), cache_l4).entries) / (2 * h)
            np.testing.assert_allclose(assemble_derivative(bag, cache_l4, j, l).toarray(), fd, atol=1e-6)

    def test_support_pattern(self):
        cache = build_product_cache(enumerate_basis(8, 2))
        bag = random_bag(4, 3, 8)
        j = 5
        dM = assemble_derivative(bag, cache, j, 1)
        acts_on_j = cache.codes[:, None, j] != cache.codes[None, :, j]
        assert dM.count_nonzero() == int(acts_on_j.sum())
        assert np.all(dM.toarray()[~acts_on_j] == 0)


class TestEnergy:

    def test_empty_hamiltonian(self):
        bag = random_bag(0, 4, 3)
        assert energy(bag, HamiltonianSpec(terms=())) == 0.0
        np.testing.assert_array_equal(energy_grad(bag, HamiltonianSpec(terms=())), 0.0)

    def test_matches_dense_trace(self, main_l4):
        bag = random_bag(5, 7, 4)
        expected = np.trace(shadow_density(bag) @ dense_hamiltonian(main_l4)).real
        assert energy(bag, main_l4) == pytest.approx(expected, abs=1e-10)

    def test_field_on_zero_state(self):
        L, N = 4, 20_000
        H = load_hamiltonian([{"coefficient": -2.0, "word": "Z"}], L)
        bag = born_sample(ProductState.all_zero(L), 1, N, L)
        assert energy(bag, H) == pytest.approx(-2.0 * L, abs=5 * 2.0 * L * np.sqrt(3.0 / N))

    def test_grad_matches_finite_difference(self, main_l4):
        bag = random_bag(6, 16, 4)
        grad = energy_grad(bag, main_l4)
        h = 1e-5
        for l, j in [(0, 0), (7, 2), (15, 3)]:
            plus, minus = bag.theta.copy(), bag.theta.copy()
            plus[l, j] += h
            minus[l, j] -= h
            fd = (energy(bag.with_theta(plus), main_l4) - energy(bag.with_theta(minus), main_l4)) / (2 * h)
            assert grad[l, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_grad_is_linear_in_coefficients(self, main_l4):
        bag = random_bag(7, 8, 4)
        doubled = HamiltonianSpec(terms=tuple((2 * c, P) for c, P in main_l4.terms))
        np.testing.assert_array_equal(energy_grad(bag, doubled), 2 * energy_grad(bag, main_l4))

    def test_grad_zero_off_support(self):
        H = HamiltonianSpec(terms=((1.0, PauliString.from_label("ZZII")),))
        grad = energy_grad(random_bag(8, 6, 4), H)
        np.testing.assert_array_equal(grad[:, 2:], 0.0)
