import math

import pytest

from hyqas.hamiltonian import (
    HamiltonianFormatError,
    bundled_names,
    emin_proxy,
    energy_bounds,
    load_bundled,
    parse_hamiltonian,
    serialize_hamiltonian,
)
from hyqas.quantum import exact_ground_energy

MINIMAL = '{"name": "z", "n_qubits": 1, "terms": [{"coeff": -1.0, "pauli": "Z"}]}'


class TestParse:
    def test_minimal(self):
        h = parse_hamiltonian(MINIMAL)
        assert h.n_qubits == 1
        assert len(h.terms) == 1
        assert h.terms[0][0] == -1.0
        assert h.terms[0][1].letters == "Z"

    def test_unknown_letter_rejected(self):
        doc = '{"n_qubits": 4, "terms": [{"coeff": 1.0, "pauli": "XYZA"}]}'
        with pytest.raises(HamiltonianFormatError, match="[Uu]nknown"):
            parse_hamiltonian(doc)

    def test_length_mismatch_rejected(self):
        doc = '{"n_qubits": 3, "terms": [{"coeff": 1.0, "pauli": "XY"}]}'
        with pytest.raises(HamiltonianFormatError):
            parse_hamiltonian(doc)

    def test_non_finite_rejected(self):
        doc = '{"n_qubits": 1, "terms": [{"coeff": NaN, "pauli": "Z"}]}'
        with pytest.raises(HamiltonianFormatError):
            parse_hamiltonian(doc)

    def test_malformed_rejected(self):
        with pytest.raises(HamiltonianFormatError):
            parse_hamiltonian("{not json")
        with pytest.raises(HamiltonianFormatError):
            parse_hamiltonian("[1, 2]")
        with pytest.raises(HamiltonianFormatError):
            parse_hamiltonian('{"n_qubits": 2}')

    def test_lih_fixture(self):
        h = load_bundled("lih-4")
        assert h.n_qubits == 4
        assert len(h.terms) == 27  # frozen term count of the committed fixture

    def test_term_order_preserved(self):
        doc = ('{"n_qubits": 1, "terms": ['
               '{"coeff": 0.25, "pauli": "X"},'
               '{"coeff": -0.5, "pauli": "Z"},'
               '{"coeff": 0.125, "pauli": "X"}]}')
        h = parse_hamiltonian(doc)
        assert [c for c, _ in h.terms] == [0.25, -0.5, 0.125]


class TestRoundTrip:
    @pytest.mark.parametrize("name", bundled_names())
    def test_bit_exact(self, name):
        h = load_bundled(name)
        again = parse_hamiltonian(serialize_hamiltonian(h))
        assert again.n_qubits == h.n_qubits
        assert len(again.terms) == len(h.terms)
        for (c1, p1), (c2, p2) in zip(h.terms, again.terms):
            assert c1 == c2  # bit-exact, no tolerance
            assert p1.letters == p2.letters
        assert again.exact_ground_energy == h.exact_ground_energy
        assert again.e_min_proxy == h.e_min_proxy


class TestEminProxy:
    def test_single_unit_coefficient(self):
        assert emin_proxy(parse_hamiltonian(MINIMAL)) == -1.0

    def test_triangle_inequality(self):
        doc = ('{"n_qubits": 1, "terms": [{"coeff": 0.5, "pauli": "Z"},'
               ' {"coeff": 0.5, "pauli": "X"}]}')
        h = parse_hamiltonian(doc)
        assert emin_proxy(h) == -1.0
        assert emin_proxy(h) < -math.sqrt(2) / 2 + 1e-12

    def test_h2_fixture_recorded(self):
        h = load_bundled("h2-4")
        assert emin_proxy(h) == h.e_min_proxy
        assert emin_proxy(h) < h.exact_ground_energy

    def test_metadata_override(self):
        doc = '{"n_qubits": 1, "e_min_proxy": -3.5, "terms": [{"coeff": 1.0, "pauli": "Z"}]}'
        assert emin_proxy(parse_hamiltonian(doc)) == -3.5


class TestEnergyBounds:
    @pytest.mark.parametrize("name", bundled_names())
    def test_bundled_fixtures_strictly_bounded(self, name):
        h = load_bundled(name)
        bounds = energy_bounds(h)
        assert bounds.e_min < bounds.e_exact
        # recorded ground energy agrees with a fresh dense eigensolve
        assert abs(bounds.e_exact - exact_ground_energy(h)) <= 1e-9

    def test_invalid_bounds_rejected(self):
        from hyqas.hamiltonian import EnergyBounds

        with pytest.raises(ValueError):
            EnergyBounds(e_min=-1.0, e_exact=-2.0)
