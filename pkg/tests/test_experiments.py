import numpy as np
import pytest

from hyqas.circuit import Circuit
from hyqas.experiments import (
    SummaryStats,
    error_reduction_pct,
    ks_two_sample,
    parallel_map,
    read_csv_column,
    run_init_sensitivity,
    summarize,
    svg_box_plot,
    svg_histogram_pair,
    write_csv,
)
from hyqas.hamiltonian import load_bundled
from hyqas.optimizer import OptimizerConfig
from hyqas.quantum import GateKind, GateSpec


def brute_force_ks(a, b):
    """Independent oracle: enumerate CDF gaps at every sample point."""
    best = 0.0
    for x in list(a) + list(b):
        fa = sum(1 for v in a if v <= x) / len(a)
        fb = sum(1 for v in b if v <= x) / len(b)
        best = max(best, abs(fa - fb))
    return best


class TestKsTwoSample:
    def test_identical_samples(self):
        a = [0.3, 1.2, -0.5, 2.0]
        d, p = ks_two_sample(a, a)
        assert d == 0.0
        assert p == 1.0

    def test_disjoint_supports(self):
        d, _ = ks_two_sample([1.0, 2.0, 3.0], [10.0, 11.0])
        assert d == 1.0

    def test_small_example_vs_oracle(self):
        a, b = [1.0, 2.0, 3.0], [1.5, 2.5]
        d, _ = ks_two_sample(a, b)
        assert d == brute_force_ks(a, b)

    def test_random_pairs_match_oracle_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.standard_normal(rng.integers(2, 40))
            b = rng.standard_normal(rng.integers(2, 40)) + rng.uniform(-1, 1)
            d, _ = ks_two_sample(a, b)
            assert d == brute_force_ks(list(a), list(b))

    def test_matches_scipy_statistic(self):
        from scipy.stats import ks_2samp

        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal(30)
            b = rng.standard_normal(45) * 1.4 + 0.2
            d, p = ks_two_sample(a, b)
            ref = ks_2samp(a, b, method="asymp")
            assert d == pytest.approx(ref.statistic, abs=1e-12)
            assert 0.0 <= p <= 1.0

    def test_p_value_direction(self):
        rng = np.random.default_rng(3)
        same_a = rng.standard_normal(400)
        same_b = rng.standard_normal(400)
        far_b = rng.standard_normal(400) + 3.0
        _, p_same = ks_two_sample(same_a, same_b)
        _, p_far = ks_two_sample(same_a, far_b)
        assert p_far < 1e-6 < p_same

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_two_sample([], [1.0])


class TestSummaryStats:
    def test_order_invariants(self):
        stats = summarize([3.0, 1.0, 2.0])
        assert stats.min <= stats.mean <= stats.max
        assert stats.std >= 0
        assert stats.n == 3

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            SummaryStats(mean=5.0, std=1.0, min=0.0, max=1.0, n=3)
        with pytest.raises(ValueError):
            SummaryStats(mean=0.5, std=-1.0, min=0.0, max=1.0, n=3)


def _toy_circuit(n_rotations=3):
    circuit = Circuit(2, max(4, n_rotations + 1))
    kinds = [GateKind.RY, GateKind.RX, GateKind.RZ]
    for i in range(n_rotations):
        circuit.append(GateSpec(kinds[i % 3], i % 2, angle=0.0))
    circuit.append(GateSpec(GateKind.CNOT, 0, 1))
    return circuit


class TestInitSensitivity:
    def test_zero_sigma_zero_std(self):
        h = load_bundled("toy-2q")
        result = run_init_sensitivity(_toy_circuit(), h, runs=4, sigma=0.0,
                                      seed=5, opt_cfg=OptimizerConfig(max_evals=60))
        assert result.stats["near_zero"].std == 0.0
        assert result.stats["near_random"].std == 0.0  # shared base, no noise

    def test_order_statistics_hold(self):
        h = load_bundled("toy-2q")
        result = run_init_sensitivity(_toy_circuit(), h, runs=6, sigma=1e-3,
                                      seed=6, opt_cfg=OptimizerConfig(max_evals=40))
        for stats in result.stats.values():
            assert stats.min <= stats.mean <= stats.max
            assert stats.n == 6

    def test_degenerate_circuit_reported(self):
        h = load_bundled("toy-2q")
        circuit = Circuit(2, 2)
        circuit.append(GateSpec(GateKind.CNOT, 0, 1))
        result = run_init_sensitivity(circuit, h, runs=3, sigma=1e-3, seed=7,
                                      opt_cfg=OptimizerConfig(max_evals=20))
        assert result.degenerate
        assert result.stats["random"].std == 0.0

    def test_reproducible(self):
        h = load_bundled("toy-2q")
        kw = dict(runs=4, sigma=1e-3, seed=8, opt_cfg=OptimizerConfig(max_evals=40))
        r1 = run_init_sensitivity(_toy_circuit(), h, **kw)
        r2 = run_init_sensitivity(_toy_circuit(), h, **kw)
        assert r1.records == r2.records


class TestErrorReduction:
    def test_identical_is_zero(self):
        assert error_reduction_pct(1.5e-3, 1.5e-3) == 0.0

    def test_reported_percentages(self):
        assert error_reduction_pct(2.11e-6, 1.26e-8) == pytest.approx(99.4, abs=0.05)
        assert error_reduction_pct(1.63e-3, 8.18e-4) == pytest.approx(49.8, abs=0.1)

    def test_monotone_in_improvement(self):
        assert (error_reduction_pct(1e-3, 1e-5)
                > error_reduction_pct(1e-3, 5e-4) > 0.0)


class TestParallelMap:
    def test_results_independent_of_workers(self, monkeypatch):
        def work(i):
            rng = np.random.default_rng([11, i])
            return float(rng.standard_normal())

        monkeypatch.setenv("HYQAS_THREADS", "1")
        serial = parallel_map(work, range(32))
        monkeypatch.setenv("HYQAS_THREADS", "4")
        threaded = parallel_map(work, range(32))
        assert serial == threaded


class TestReportEmission:
    def test_csv_deterministic_and_17_digits(self, tmp_path):
        rows = [{"x": 1, "value": 0.1 + 0.2}, {"x": 2, "value": 1e-17}]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(p1, rows, ("x", "value"))
        write_csv(p2, rows, ("x", "value"))
        assert p1.read_bytes() == p2.read_bytes()
        text = p1.read_text()
        assert "0.30000000000000004" in text  # full 17-significant-digit form
        values = read_csv_column(p1, "value")
        assert values[0] == 0.1 + 0.2  # round-trips exactly
        assert values[1] == 1e-17

    def test_svg_histogram_deterministic(self, tmp_path):
        rng = np.random.default_rng(12)
        a = rng.standard_normal(200)
        b = rng.standard_normal(200) + 0.5
        p1, p2 = tmp_path / "h1.svg", tmp_path / "h2.svg"
        ks = ks_two_sample(a, b)
        svg_histogram_pair(a, b, "a", "b", p1, ks=ks, title="t")
        svg_histogram_pair(a, b, "a", "b", p2, ks=ks, title="t")
        assert p1.read_bytes() == p2.read_bytes()
        text = p1.read_text()
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert "KS D=" in text

    def test_svg_box_plot(self, tmp_path):
        groups = {"near_zero": [1.0, 1.1, 0.9], "random": [0.5, 2.0, 1.5]}
        path = tmp_path / "box.svg"
        svg_box_plot(groups, path, title="x")
        text = path.read_text()
        assert "near_zero" in text and "random" in text
        assert text.rstrip().endswith("</svg>")
