import math

import numpy as np
import pytest

from dpsla.engine import Dgd, Dpsla, run
from dpsla.metrics import (consensus_error, csv_header, level_gaps, parse_csv,
                           residual, write_csv, write_sweep_csv)
from dpsla.numerics import Rng
from dpsla.problem import (ConstraintSet, ProblemInstance, QuadraticObjective,
                           gen_paper_instance, gen_triangle_demo)


@pytest.fixture(scope="module")
def triangle():
    inst = gen_triangle_demo()
    inst.ensure_optimum(1e-11)
    return inst


class TestResidual:
    def test_zero_at_optimum(self, triangle):
        x = triangle.optimum.x_star
        assert abs(residual(triangle, [x, x, x])) <= 1e-9

    def test_origin_value(self, triangle):
        # f_sum(0,0) = 0 + 0 + 2, so the residual is 2 - f*_sum
        got = residual(triangle, [np.zeros(2)] * 3)
        assert math.isclose(got, 2.0 - triangle.optimum.f_star, rel_tol=1e-12)

    def test_nonnegative_on_feasible_states(self, triangle):
        gen = np.random.default_rng(0)
        for _ in range(50):
            xs = []
            for _ in range(3):
                v = gen.normal(size=2) * 3
                xs.append(triangle.constraint.project(v))
            assert residual(triangle, xs) >= -1e-8

    def test_mean_form_is_sum_over_n(self, triangle):
        xs = [np.array([0.1, 0.2])] * 3
        assert math.isclose(residual(triangle, xs, form="mean"),
                            residual(triangle, xs) / 3, rel_tol=1e-15)

    def test_translation_consistency(self):
        # shifting one objective by a constant shifts f and f* equally
        base = gen_triangle_demo()
        base.ensure_optimum(1e-11)
        f3 = base.objectives[2]
        shifted = ProblemInstance(
            objectives=[base.objectives[0], base.objectives[1],
                        QuadraticObjective.quadratic(f3.Q, f3.q, f3.c + 7.5)],
            constraint=base.constraint,
            graph=base.graph,
        )
        shifted.ensure_optimum(1e-11)
        xs = [np.array([0.3, -0.1])] * 3
        assert math.isclose(residual(base, xs), residual(shifted, xs), abs_tol=1e-8)

    def test_requires_oracle(self):
        inst = gen_triangle_demo()
        with pytest.raises(ValueError):
            residual(inst, [np.zeros(2)] * 3)


class TestConsensusError:
    def test_identical_states(self):
        assert consensus_error([np.ones(3)] * 4 ) == 0.0

    def test_two_agents(self):
        assert consensus_error([np.array([0.0, 0.0]), np.array([2.0, 0.0])]) == 1.0

    def test_translation_invariance(self):
        gen = np.random.default_rng(1)
        xs = [gen.normal(size=3) for _ in range(5)]
        off = gen.normal(size=3)
        a = consensus_error(xs)
        b = consensus_error([x + off for x in xs])
        assert math.isclose(a, b, rel_tol=1e-12)

    def test_zero_iff_equal(self):
        xs = [np.zeros(2), np.array([1e-14, 0.0])]
        assert consensus_error(xs) > 0.0


class TestCsv:
    def test_row_count_and_header(self, tmp_path, triangle):
        tr = run(triangle, Dpsla(), 3, seed=0)
        p = tmp_path / "t.csv"
        write_csv(tr, p)
        lines = p.read_text().splitlines()
        assert len(lines) == 5  # header + k=0..3
        assert lines[0] == csv_header(3)
        assert lines[0].count(",") + 1 == 3 + 2 * 3 + 1
        assert p.read_text().endswith("\n")

    def test_round_trip_exact(self, tmp_path, triangle):
        tr = run(triangle, Dpsla(), 25, seed=0)
        p = tmp_path / "t.csv"
        write_csv(tr, p)
        cols = parse_csv(p)
        for idx, rec in enumerate(tr.records):
            assert cols["k"][idx] == rec.k
            assert cols["residual"][idx] == rec.residual
            for i in range(3):
                assert cols[f"alpha_{i}"][idx] == rec.alpha[i]
                assert cols[f"level_{i}"][idx] == rec.level[i]

    def test_byte_determinism(self, tmp_path, triangle):
        tr1 = run(triangle, Dpsla(), 20, seed=4)
        tr2 = run(triangle, Dpsla(), 20, seed=4)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(tr1, p1)
        write_csv(tr2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_none_fields_print_nan(self, tmp_path, triangle):
        tr = run(triangle, Dgd(), 2, seed=0)
        p = tmp_path / "d.csv"
        write_csv(tr, p)
        row0 = p.read_text().splitlines()[1].split(",")
        assert row0[3] == "nan"  # no alpha before the first dgd round
        assert row0[6] == "nan"  # dgd has no levels

    def test_record_every_thinning(self, tmp_path, triangle):
        tr = run(triangle, Dpsla(), 10, seed=0)
        p = tmp_path / "thin.csv"
        write_csv(tr, p, record_every=4)
        ks = [int(line.split(",")[0]) for line in p.read_text().splitlines()[1:]]
        assert ks == [0, 4, 8, 10]  # multiples plus the final row

    def test_sweep_csv(self, tmp_path):
        p = tmp_path / "s.csv"
        write_sweep_csv([(4, 0, 1.25), (8, 0, 0.5)], p)
        lines = p.read_text().splitlines()
        assert lines[0] == "n,seed,gap"
        assert lines[1] == "4,0,1.25"


class TestLevelGaps:
    def test_gap_signs(self, triangle):
        tr = run(triangle, Dpsla(), 50, seed=0)
        gaps = level_gaps(triangle, tr.records[50].level)
        assert all(g >= -1e-6 for g in gaps)  # levels stay below f_i(x*)
        gaps0 = level_gaps(triangle, tr.records[0].level)
        assert all(g0 >= g for g0, g in zip(gaps0, gaps))  # gaps shrink
