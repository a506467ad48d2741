import numpy as np
import pytest

from conftest import random_symmetric
from hamlearn.dataset import (
    NOMINAL_EXACT_SHOTS,
    TABLE1_COUNTS,
    CountRow,
    CountTable,
    DataPair,
    DataValidationError,
    counts_to_amplitudes,
    exact_output,
    exact_pairs,
    load_table,
    pairs_from_table,
    read_counts_csv,
    save_table,
    simulate_counts,
    standard_input_labels,
    standard_input_states,
    table1,
    table_from_json,
    table_to_json,
)
from hamlearn.hamiltonian import HYPERFINE_H
from hamlearn.linalg import ContractError


class TestInputStates:
    @pytest.mark.parametrize("n, m", [(2, 4), (4, 11), (8, 37)])
    def test_count(self, n, m):
        states = standard_input_states(n)
        assert states.shape == (m, n)
        assert len(standard_input_labels(n)) == m
        assert np.allclose(np.linalg.norm(states, axis=1), 1.0, atol=1e-15)

    def test_order_n2(self):
        s = 1 / np.sqrt(2)
        expected = [[s, s], [1, 0], [0, 1], [s, s]]
        assert np.allclose(standard_input_states(2), expected)

    def test_too_small(self):
        with pytest.raises(ContractError):
            standard_input_states(1)


class TestCountsToAmplitudes:
    def test_examples(self):
        assert np.allclose(counts_to_amplitudes([4, 0], 4), [1, 0])
        assert np.allclose(counts_to_amplitudes([1, 1, 1, 1], 4), [0.5] * 4)
        assert np.allclose(counts_to_amplitudes([3, 1], 4), [np.sqrt(3) / 2, 0.5])

    def test_reference_rows_are_unit_norm(self):
        for counts in TABLE1_COUNTS:
            a = counts_to_amplitudes(counts, 1024)
            assert abs(np.linalg.norm(a) - 1) <= 1e-12
            assert np.all(a.real >= 0) and not np.any(a.imag)

    def test_invalid(self):
        with pytest.raises(DataValidationError):
            counts_to_amplitudes([1, 2], 4)
        with pytest.raises(DataValidationError):
            counts_to_amplitudes([-1, 5], 4)
        with pytest.raises(DataValidationError):
            counts_to_amplitudes([0, 0], 0)


class TestExactOutput:
    def test_hyperfine_rabi(self):
        # the (2, 3) block rotates e2 into e3 with populations cos^2(2t), sin^2(2t)
        for t in (0.1, 0.3, 0.785):
            p = np.abs(exact_output(HYPERFINE_H, np.eye(4)[1], t)) ** 2
            assert np.allclose(p, [0, np.cos(2 * t) ** 2, np.sin(2 * t) ** 2, 0], atol=1e-13)
        p = np.abs(exact_output(HYPERFINE_H, np.eye(4)[1], 0.785)) ** 2
        assert np.max(np.abs(p - np.eye(4)[2])) <= 1e-3

    def test_uniform_stays_uniform(self):
        p = np.abs(exact_output(HYPERFINE_H, np.full(4, 0.5), 0.785)) ** 2
        assert np.allclose(p, 0.25, atol=1e-12)

    def test_norm_preserved(self, rng):
        H = random_symmetric(rng, 6)
        out = exact_output(H, standard_input_states(6)[3], 1.7)
        assert abs(np.linalg.norm(out) - 1) <= 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ContractError):
            exact_output(np.eye(3), np.ones(2) / np.sqrt(2), 1.0)


class TestDataPair:
    def test_normalization_required(self):
        with pytest.raises(ContractError):
            DataPair(np.array([1.0, 1.0]), np.array([1.0, 0.0]), 1.0)

    def test_negative_time(self):
        with pytest.raises(ContractError):
            DataPair(np.array([1.0, 0.0]), np.array([1.0, 0.0]), -1.0)


class TestSimulate:
    def test_zero_hamiltonian_basis(self):
        table = simulate_counts(np.zeros((3, 3)), np.eye(3), 1.0, shots=500, seed=1)
        for k, row in enumerate(table.rows):
            assert row.counts == [500 if i == k else 0 for i in range(3)]

    def test_seed_determinism(self, rng):
        H = random_symmetric(rng, 4)
        a = simulate_counts(H, standard_input_states(4), 0.785, shots=1000, seed=3)
        b = simulate_counts(H, standard_input_states(4), 0.785, shots=1000, seed=3)
        c = simulate_counts(H, standard_input_states(4), 0.785, shots=1000, seed=4)
        assert table_to_json(a) == table_to_json(b)
        assert table_to_json(a) != table_to_json(c)

    def test_three_sigma_at_many_shots(self, rng):
        shots = 10**6
        H = random_symmetric(rng, 4)
        inputs = standard_input_states(4)
        p = np.abs(np.array([exact_output(H, psi, 0.785) for psi in inputs])) ** 2
        inside = total = 0
        worst = 0.0
        for seed in range(100):
            table = simulate_counts(H, inputs, 0.785, shots=shots, seed=seed)
            freq = np.array([row.counts for row in table.rows]) / shots
            sigma = np.sqrt(p * (1 - p) / shots)
            inside += np.sum(np.abs(freq - p) <= 3 * sigma + 1e-12)
            total += p.size
            worst = max(worst, np.max(np.abs(freq - p)))
        assert inside / total >= 0.99
        assert worst <= 5e-3

    def test_exact_mode(self, rng):
        H = random_symmetric(rng, 5)
        inputs = standard_input_states(5)
        table = simulate_counts(H, inputs, 0.785)
        for psi, row in zip(inputs, table.rows):
            out = exact_output(H, psi, 0.785)
            assert np.allclose(np.abs(row.output) ** 2, np.abs(out) ** 2, atol=1e-12)
            assert sum(row.counts) == row.shots == NOMINAL_EXACT_SHOTS
            assert np.max(np.abs(np.array(row.counts) / row.shots - np.abs(out) ** 2)) <= 1e-6

    def test_noise_flattens(self, rng):
        table = simulate_counts(np.zeros((4, 4)), np.eye(4), 1.0, shots=10**5, seed=0, noise=1.0)
        freq = np.array([r.counts for r in table.rows]) / 10**5
        assert np.allclose(freq, 0.25, atol=0.01)

    def test_noise_consistent_with_reference_counts(self):
        # a device with modest depolarizing noise should produce counts of the
        # same order as the reference table's off-diagonal leakage
        table = simulate_counts(
            HYPERFINE_H, np.eye(4), 0.785, shots=1024, seed=0, noise=0.05
        )
        counts = np.array([r.counts for r in table.rows])
        reference = np.array(TABLE1_COUNTS[:4])
        assert np.all(np.argmax(counts, axis=1) == np.argmax(reference, axis=1))
        assert np.all(np.max(counts, axis=1) >= 900)

    def test_bad_args(self):
        with pytest.raises(ContractError):
            simulate_counts(np.eye(2), np.eye(2), 1.0, noise=0.1)
        with pytest.raises(ContractError):
            simulate_counts(np.eye(2), np.eye(2), 1.0, shots=0)
        with pytest.raises(ContractError):
            simulate_counts(np.eye(2), np.eye(3), 1.0, shots=10)


class TestPairsFromTable:
    def test_reference_table(self, table1_pairs):
        assert len(table1_pairs) == 5
        assert all(p.t == 0.785 for p in table1_pairs)
        assert np.allclose(table1_pairs[2].phi ** 2, np.array(TABLE1_COUNTS[2]) / 1024)
        assert np.allclose(table1_pairs[4].psi, 0.5)

    def test_single_and_empty(self):
        table = CountTable(2, [CountRow(np.array([1.0, 0.0]), [3, 1], 4, 0.5)])
        (pair,) = pairs_from_table(table)
        assert np.allclose(pair.phi, [np.sqrt(3) / 2, 0.5])
        assert pairs_from_table(CountTable(2)) == []

    def test_unevolved_basis_row(self):
        table = CountTable(4, [CountRow(np.eye(4)[0], [1024, 0, 0, 0], 1024, 0.0)])
        (pair,) = pairs_from_table(table)
        assert np.array_equal(pair.psi, np.eye(4)[0])
        assert np.array_equal(pair.phi, np.eye(4)[0])
        assert pair.t == 0.0

    def test_exact_rows_are_complex(self, rng):
        H = random_symmetric(rng, 3)
        inputs = standard_input_states(3)
        pairs = pairs_from_table(simulate_counts(H, inputs, 0.6))
        for got, want in zip(pairs, exact_pairs(H, inputs, 0.6)):
            assert np.allclose(got.phi, want.phi, atol=1e-14)

    def test_validation_names_row(self):
        rows = [
            CountRow(np.array([1.0, 0.0]), [3, 1], 4, 0.5),
            CountRow(np.array([1.0, 0.0]), [3, 2], 4, 0.5),
        ]
        with pytest.raises(DataValidationError, match="row 2"):
            pairs_from_table(CountTable(2, rows))


class TestFiles:
    def test_json_round_trip(self, tmp_path, rng):
        H = random_symmetric(rng, 3)
        for shots in (None, 100):
            table = simulate_counts(H, standard_input_states(3), 0.4, shots=shots, seed=2,
                                    labels=standard_input_labels(3))
            path = tmp_path / "t.json"
            save_table(path, table)
            back = load_table(path)
            assert table_to_json(back) == table_to_json(table)
            for a, b in zip(pairs_from_table(back), pairs_from_table(table)):
                assert np.array_equal(a.phi, b.phi)
                assert np.array_equal(a.psi, b.psi)

    def test_amplitude_label(self):
        obj = {"dim": 2, "rows": [{"prepared": {"kind": "amplitudes", "re": [3, 4]},
                                   "counts": [1, 1], "shots": 2, "t": 0.1}]}
        table = table_from_json(obj)
        assert np.allclose(table.rows[0].prepared, [0.6, 0.8])

    @pytest.mark.parametrize(
        "obj, fragment",
        [
            ({"rows": []}, "dim"),
            ({"dim": 2, "rows": [{"prepared": {"kind": "basis", "index": 3},
                                  "counts": [1, 0], "shots": 1, "t": 0}]}, "row 1"),
            ({"dim": 2, "rows": [{"prepared": {"kind": "uniform"},
                                  "counts": [1, 0], "shots": 2, "t": 0}]}, "shots"),
            ({"dim": 2, "rows": [{"prepared": {"kind": "uniform"},
                                  "counts": [1, 1], "shots": 2}]}, "row 1"),
        ],
    )
    def test_bad_tables(self, obj, fragment):
        with pytest.raises(DataValidationError, match=fragment):
            table_from_json(obj)

    def test_bad_json_text(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text("{\n\n oops")
        with pytest.raises(DataValidationError, match="line 3"):
            load_table(path)

    def test_csv(self, tmp_path):
        lines = ["Prepared,1,2,3,4"]
        names = ["State 1", "State 2", "State 3", "State 4", "Uniform Superposition"]
        for name, counts in zip(names, TABLE1_COUNTS):
            lines.append(",".join([name] + [str(c) for c in counts]))
        path = tmp_path / "counts.csv"
        path.write_text("\n".join(lines) + "\n")
        table = read_counts_csv(path, t=0.785)
        assert table_to_json(table) == table_to_json(table1())

    def test_csv_pair_label_and_errors(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("label,a,b,c\nPair 1-3,5,0,5\n")
        table = read_counts_csv(path, t=1.0)
        assert np.allclose(table.rows[0].prepared, [2**-0.5, 0, 2**-0.5])
        path.write_text("label,a,b\nmystery,1,1\n")
        with pytest.raises(DataValidationError, match="row 1"):
            read_counts_csv(path, t=1.0)
        path.write_text("label,a,b\n")
        with pytest.raises(DataValidationError):
            read_counts_csv(path, t=1.0)
        path.write_text("label,a,b\n1,1,1\n")
        with pytest.raises(DataValidationError, match="shots"):
            read_counts_csv(path, t=1.0, shots=5)
