"""Maze parsing, dynamics, collision, observation offsets, schedules."""

import numpy as np
import pytest

from driftrl.maze import (
    Maze,
    OffsetSchedule,
    SimState,
    affine_observe,
    build_offset_schedule,
    observe,
    reset,
    step,
)
from driftrl.numkit import Rng

OPEN_2X2 = "####\n#..#\n#.G#\n####\n"
CORRIDOR = "#####\n#..G#\n#####\n"
SINGLE = "###\n#G#\n###\n"


class TestParsing:
    def test_basic(self):
        m = Maze(OPEN_2X2)
        assert m.n_rows == 4 and m.n_cols == 4
        assert len(m.free_cells()) == 4

    def test_boundary_must_be_wall(self):
        with pytest.raises(ValueError):
            Maze("..\n..\n")

    def test_goal_required(self):
        with pytest.raises(ValueError):
            Maze("####\n#..#\n####\n")

    def test_bundled_mazes_load(self):
        from driftrl.cli import BUILTIN_MAZES
        for path in BUILTIN_MAZES.values():
            m = Maze.from_file(path)
            assert len(m.free_cells()) > 0


class TestReset:
    def test_uniform_occupancy(self):
        m = Maze(OPEN_2X2)
        rng = Rng(0)
        counts = {cell: 0 for cell in m.free_cells()}
        n = 10_000
        for _ in range(n):
            s = reset(m, rng)
            counts[m.cell_of(s.pos)] += 1
        for c in counts.values():
            assert abs(c / n - 0.25) < 0.05 * 1.0  # within 5 points of uniform

    def test_single_free_cell(self):
        m = Maze(SINGLE)
        for i in range(20):
            s = reset(m, Rng(i))
            assert m.cell_of(s.pos) == m.free_cells()[0]

    def test_same_seed_same_start(self):
        m = Maze(OPEN_2X2)
        np.testing.assert_array_equal(reset(m, Rng(4)).pos, reset(m, Rng(4)).pos)
        assert np.all(reset(m, Rng(4)).vel == 0.0)


class TestStep:
    def test_rest_stays_put(self):
        m = Maze(OPEN_2X2)
        s = reset(m, Rng(1))
        s2, r, done = step(m, s, np.zeros(2))
        np.testing.assert_array_equal(s2.pos, s.pos)

    def test_velocity_physics(self):
        m = Maze("#####\n#...#\n#...#\n#..G#\n#####\n")
        s = SimState(np.array([2.5, 1.5]), np.array([0.2, 0.0]))
        s2, _, _ = step(m, s, np.array([1.0, 0.0]))
        # vel' = 0.9*0.2 + 0.15*1 = 0.33
        assert s2.vel[0] == pytest.approx(0.33, rel=1e-12)
        assert s2.pos[0] == pytest.approx(2.5 + 0.33, rel=1e-12)

    def test_velocity_clamp(self):
        m = Maze("#####\n#...#\n#...#\n#..G#\n#####\n")
        s = SimState(np.array([1.5, 1.5]), np.array([0.5, 0.0]))
        s2, _, _ = step(m, s, np.array([1.0, 0.0]))
        assert s2.vel[0] == pytest.approx(0.5)

    def test_action_clamped(self):
        m = Maze(OPEN_2X2)
        s = SimState(np.array([1.5, 1.5]), np.zeros(2))
        a, _, _ = step(m, s, np.array([10.0, 0.0]))
        b, _, _ = step(m, s, np.array([1.0, 0.0]))
        np.testing.assert_array_equal(a.pos, b.pos)

    def test_wall_zeroes_axis(self):
        # Corridor: free cells at x in [1,4), y in [1,2). Push into right wall.
        m = Maze(CORRIDOR)
        s = SimState(np.array([3.85 - 1e-9, 1.5]), np.zeros(2))
        for _ in range(3):
            s, _, _ = step(m, s, np.array([1.0, 0.0]))
        assert s.vel[0] == 0.0
        assert s.pos[0] <= 4.0 - m.agent_radius + 1e-9

    def test_never_inside_wall(self):
        m = Maze("#######\n#.....#\n#.###.#\n#....G#\n#######\n")
        rng = Rng(8)
        s = reset(m, rng)
        for i in range(100_000):
            s, _, done = step(m, s, rng.uniform_vec(2, -1.0, 1.0))
            assert not m.collides(s.pos)
            if done:
                s = reset(m, rng)

    def test_goal_reward(self):
        m = Maze(CORRIDOR)
        s = SimState(np.array([3.3, 1.5]), np.array([0.4, 0.0]))
        s2, r, done = step(m, s, np.array([1.0, 0.0]))
        assert done and r == 1.0

    def test_corrupted_state_rejected(self):
        m = Maze(OPEN_2X2)
        with pytest.raises(ValueError):
            step(m, SimState(np.array([0.5, 0.5]), np.zeros(2)), np.zeros(2))


def constant_schedule(b, alpha=1.0, episodes=3):
    base = np.tile(b, (episodes, 1))
    return OffsetSchedule(base, (0, 1), "per-episode", alpha, 50, 1)


class TestObserve:
    def test_zero_offset(self):
        s = SimState(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
        sched = constant_schedule(np.zeros(4))
        np.testing.assert_array_equal(observe(s, sched, 0, 5), s.as_vector())

    def test_zero_alpha(self):
        s = SimState(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
        sched = constant_schedule(np.array([3.0, -1.0, 0, 0]), alpha=0.0)
        np.testing.assert_array_equal(observe(s, sched, 1, 0), s.as_vector())

    def test_componentwise_addition(self):
        s = SimState(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
        sched = constant_schedule(np.array([3.0, -1.0, 0, 0]))
        np.testing.assert_allclose(observe(s, sched, 0, 0), [4.0, 1.0, 0.1, 0.2])

    def test_schedule_exhausted(self):
        sched = constant_schedule(np.zeros(4), episodes=2)
        s = SimState(np.array([1.0, 1.0]), np.zeros(2))
        with pytest.raises(IndexError):
            observe(s, sched, 5, 0)

    def test_intra_episode_segments(self):
        base = np.zeros((4, 4))
        base[:, 0] = [1.0, 2.0, 3.0, 4.0]
        sched = OffsetSchedule(base, (0, 1), "intra-episode", 1.0, 50, 4)
        s = SimState(np.array([0.0, 1.0]), np.zeros(2))
        assert observe(s, sched, 0, 0)[0] == 1.0
        assert observe(s, sched, 0, 49)[0] == 1.0
        assert observe(s, sched, 0, 50)[0] == 2.0
        assert observe(s, sched, 0, 199)[0] == 4.0


class TestAffineObserve:
    def test_identity(self):
        s = SimState(np.array([2.0, 3.0]), np.array([0.1, 0.0]))
        np.testing.assert_array_equal(
            affine_observe(s.as_vector(), 1.0, np.zeros(4), (0, 1)), s.as_vector())

    def test_reduces_to_additive(self):
        s = np.array([2.0, 3.0, 0.1, 0.0])
        b = np.array([1.0, -1.0, 0, 0])
        np.testing.assert_allclose(affine_observe(s, 1.0, b, (0, 1)), s + b)

    def test_scale_and_bias(self):
        s = np.array([2.0, 2.0, 0.5, -0.5])
        out = affine_observe(s, 0.5, np.array([1.0, 1.0, 0, 0]), (0, 1))
        np.testing.assert_allclose(out, [2.0, 2.0, 0.5, -0.5])

    def test_nonpositive_scale(self):
        with pytest.raises(ValueError):
            affine_observe(np.zeros(4), 0.0, np.zeros(4), (0, 1))


class TestBuildSchedule:
    def test_zero_alpha_zero_schedule(self):
        sched = build_offset_schedule([np.ones(10), np.ones(10)], 0.0, "per-episode",
                                      5, np.array([8.0, 6.0, 1, 1]))
        for j in range(5):
            assert np.all(sched.offset_at(j, 0) == 0.0)

    def test_constant_half_range(self):
        sched = build_offset_schedule([np.full(5, 0.5), np.full(5, 0.5)], 1.0,
                                      "per-episode", 5, np.array([8.0, 8.0, 1, 1]))
        np.testing.assert_allclose(sched.offset_at(2, 10)[:2], [4.0, 4.0])

    def test_series_dim_ordering(self):
        sched = build_offset_schedule([np.full(3, 1.0), np.full(3, -1.0)], 1.0,
                                      "per-episode", 3, np.array([2.0, 10.0, 1, 1]))
        b = sched.offset_at(0, 0)
        assert b[0] == 2.0 and b[1] == -10.0 and b[2] == 0.0 and b[3] == 0.0

    def test_too_short_series(self):
        with pytest.raises(ValueError):
            build_offset_schedule([np.ones(3), np.ones(3)], 1.0, "per-episode",
                                  5, np.ones(4))

    def test_masked_out_dims_zero(self):
        sched = build_offset_schedule([np.ones(4)], 1.0, "per-episode", 4,
                                      np.array([1.0, 1, 1, 1]), mask=(1,))
        b = sched.offset_at(0, 0)
        assert b[0] == 0.0 and b[2] == 0.0 and b[3] == 0.0

    def test_csv_export(self, tmp_path):
        sched = build_offset_schedule([np.arange(3.0), np.arange(3.0)], 1.0,
                                      "per-episode", 3, np.ones(4))
        path = tmp_path / "sched.csv"
        sched.to_csv(str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "episode,segment,dim,offset"
        assert len(lines) == 1 + 3 * 2


class TestInvariants:
    def test_delta_observation_invariance(self):
        m = Maze("#######\n#.....#\n#....G#\n#######\n")
        sched = constant_schedule(np.array([2.5, -1.0, 0, 0]), episodes=1)
        rng = Rng(21)
        s = reset(m, rng)
        o_prev, s_prev = observe(s, sched, 0, 0), s.as_vector()
        for t in range(1, 30):
            s, _, done = step(m, s, rng.uniform_vec(2, -1.0, 1.0))
            o = observe(s, sched, 0, t)
            np.testing.assert_allclose(o - o_prev, s.as_vector() - s_prev, atol=1e-12)
            o_prev, s_prev = o, s.as_vector()
            if done:
                break

    def test_dynamics_independent_of_schedule(self):
        m = Maze(OPEN_2X2)
        s = SimState(np.array([1.5, 1.5]), np.array([0.1, -0.1]))
        a = np.array([0.3, 0.7])
        s1, r1, d1 = step(m, s, a)
        s2, r2, d2 = step(m, SimState(s.pos.copy(), s.vel.copy()), a)
        np.testing.assert_array_equal(s1.pos, s2.pos)
        assert (r1, d1) == (r2, d2)

    def test_partial_identifiability(self):
        # For any single observation, every free position admits an offset
        # explaining it on the masked dims.
        m = Maze(OPEN_2X2)
        o = np.array([5.0, -3.0, 0.0, 0.0])
        for r, c in m.free_cells():
            s_alt = np.array([c + 0.5, r + 0.5, 0.0, 0.0])
            b_alt = o - s_alt
            recon = s_alt.copy()
            recon[[0, 1]] += b_alt[[0, 1]]
            np.testing.assert_allclose(recon[:2], o[:2], atol=1e-12)
