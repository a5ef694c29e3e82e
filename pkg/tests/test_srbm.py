import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collide.errors import NumericalError, ValidationError
from collide.particles import ParticleSystemSpec, gap_matrices, to_srbm
from collide.srbm import (
    SimulatedPath,
    SrbmSpec,
    detect_collisions,
    simulate_named,
    simulate_ranked,
    simulate_srbm,
    skorohod_map,
    skorohod_step,
    time_grid,
)
from conftest import brute_force_lcp, random_m_matrix, reflect_1d

R_EQ = np.array([[1.0, -0.5], [-0.5, 1.0]])
A_EQ = np.array([[2.0, -1.0], [-1.0, 2.0]])


# -- single steps ----------------------------------------------------------------

def test_step_one_dimensional():
    z, dy = skorohod_step([1.0], [-2.0], [[1.0]])
    assert z.tolist() == [0.0] and dy.tolist() == [1.0]


def test_step_normal_reflection():
    z, dy = skorohod_step([1, 1], [-2, 0], np.eye(2))
    np.testing.assert_allclose(z, [0, 1])
    np.testing.assert_allclose(dy, [1, 0])


def test_step_oblique_into_corner():
    z, dy = skorohod_step([1, 0], [-2, 0], R_EQ)
    np.testing.assert_allclose(z, [0, 0], atol=1e-12)
    np.testing.assert_allclose(dy, [4 / 3, 2 / 3], atol=1e-12)
    bz, by = brute_force_lcp(np.array([-1.0, 0.0]), R_EQ)
    np.testing.assert_allclose(dy, by, atol=1e-12)


def test_step_interior_is_free():
    z, dy = skorohod_step([0.3, 0.4], [0.1, -0.2], R_EQ)
    np.testing.assert_allclose(z, [0.4, 0.2])
    assert not dy.any()


def test_step_rejects_bad_input():
    with pytest.raises(ValidationError):
        skorohod_step([-1.0], [0.0], [[1.0]])
    with pytest.raises(ValidationError):
        skorohod_step([1.0, 1.0], [0.0, 0.0], [[1, -2], [-2, 1]])
    with pytest.raises(ValidationError):
        skorohod_step([1.0], [0.0, 0.0], [[1.0]])


def test_step_cap_reports_numerical_error():
    # rho(Q) = 0.999999 converges very slowly; a tiny cap must trip
    r = np.array([[1.0, -0.999999], [-0.999999, 1.0]])
    with pytest.raises(NumericalError, match="cap"):
        skorohod_step([0.0, 0.0], [-1.0, -1.0], r, max_iter=5)


@settings(max_examples=200, deadline=None)
@given(d=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_step_matches_active_set_oracle(d, seed):
    rng = np.random.default_rng(seed)
    r = random_m_matrix(rng, d) if d > 1 else np.eye(1)
    z0 = rng.exponential(0.5, d) * (rng.uniform(size=d) < 0.6)
    dx = rng.normal(0, 1, d)
    z, dy = skorohod_step(z0, dx, r)
    oz, ody = brute_force_lcp(z0 + dx, r)
    np.testing.assert_allclose(z, oz, atol=1e-10)
    np.testing.assert_allclose(dy, ody, atol=1e-10)
    assert np.all(z >= 0) and np.all(dy >= 0)
    assert np.max(np.abs(z * dy)) <= 1e-10


# -- whole paths ----------------------------------------------------------------

def test_constant_driver_gives_constant_path():
    path = skorohod_map(np.tile([0.5, 0.25], (10, 1)), R_EQ)
    np.testing.assert_array_equal(path.states, np.tile([0.5, 0.25], (10, 1)))
    assert not path.regulators.any()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_one_dimensional_map_matches_running_minimum(seed):
    rng = np.random.default_rng(seed)
    x = np.concatenate([[rng.exponential()], rng.exponential() + np.cumsum(rng.normal(0, 0.3, 200))])
    x[0] = abs(x[0])
    path = skorohod_map(x, [[1.0]])
    z, y = reflect_1d(x)
    np.testing.assert_allclose(path.states[:, 0], z, atol=1e-12)
    np.testing.assert_allclose(path.regulators[:, 0], y, atol=1e-12)


def test_two_dimensional_map_matches_stepwise_oracle(rng):
    r = random_m_matrix(rng, 2)
    knots = np.vstack([[0.5, 0.2], rng.normal(0, 1, (6, 2)).cumsum(axis=0) + [0.5, 0.2]])
    t = np.linspace(0, 6, 61)
    x = np.column_stack([np.interp(t, np.arange(7), knots[:, i]) for i in range(2)])
    path = skorohod_map(x, r)
    z = x[0].copy()
    for k in range(1, len(t)):
        z, _ = brute_force_lcp(z + (x[k] - x[k - 1]), r)
        np.testing.assert_allclose(path.states[k], z, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_path_invariants(d, seed):
    rng = np.random.default_rng(seed)
    r = random_m_matrix(rng, d) if d > 1 else np.eye(1)
    x = np.vstack([np.zeros(d), np.cumsum(rng.normal(0, 0.1, (300, d)), axis=0)])
    path = skorohod_map(x, r)
    assert np.all(path.states >= 0)
    assert not path.regulators[0].any()
    assert np.all(np.diff(path.regulators, axis=0) >= 0)
    np.testing.assert_allclose(path.states, x + path.regulators @ r.T, atol=1e-10)
    slack = np.sum(path.states[1:] * np.diff(path.regulators, axis=0))
    assert slack <= d * 1e-12 * len(x)


def test_map_rejects_start_outside():
    with pytest.raises(ValidationError):
        skorohod_map([[-0.1, 0.0], [0.0, 0.0]], R_EQ)


# -- SRBM spec and simulation -----------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValidationError):
        SrbmSpec([[1, -2], [-2, 1]], [0, 0], np.eye(2))
    with pytest.raises(ValidationError):
        SrbmSpec(np.eye(2), [0, 0], np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        SrbmSpec(np.eye(2), [0, 0, 0], np.eye(2))
    with pytest.raises(ValidationError):
        SrbmSpec(np.eye(2), [0, 0], np.eye(2), zero_noise=True)
    spec = SrbmSpec(R_EQ, [1, 2], A_EQ)
    assert SrbmSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()


def test_time_grid():
    t, h = time_grid(1.0, 0.3)
    assert len(t) == 4 and h == pytest.approx(1 / 3) and t[-1] == 1.0
    with pytest.raises(ValidationError):
        time_grid(1.0, 0.0)
    with pytest.raises(ValidationError):
        time_grid(1.0, 2.0)


def test_zero_noise_interior_is_constant():
    spec = SrbmSpec(R_EQ, [0, 0], np.zeros((2, 2)), zero_noise=True)
    path = simulate_srbm(spec, [0.3, 0.7], 1.0, 0.1, seed=0)
    np.testing.assert_array_equal(path.states, np.tile([0.3, 0.7], (11, 1)))


def test_zero_noise_pushed_into_boundary():
    spec = SrbmSpec([[1.0]], [-1.0], [[0.0]], zero_noise=True)
    path = simulate_srbm(spec, [0.0], 1.0, 0.01, seed=0)
    assert not path.states.any()
    np.testing.assert_allclose(path.regulators[:, 0], path.times, atol=1e-12)


def test_simulation_is_deterministic():
    spec = SrbmSpec(R_EQ, [-0.5, 0.2], A_EQ)
    a = simulate_srbm(spec, [0.1, 0.2], 1.0, 1e-3, seed=42)
    b = simulate_srbm(spec, [0.1, 0.2], 1.0, 1e-3, seed=42)
    c = simulate_srbm(spec, [0.1, 0.2], 1.0, 1e-3, seed=43)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.regulators, b.regulators)
    assert not np.array_equal(a.states, c.states)


def test_increment_moments():
    spec = SrbmSpec(R_EQ, [0.3, -0.2], A_EQ)
    path = simulate_srbm(spec, [1e6, 1e6], 200.0, 1e-3, seed=1)
    dx = np.diff(path.driver, axis=0)
    np.testing.assert_allclose(dx.mean(axis=0) / 1e-3, [0.3, -0.2], atol=0.25)
    np.testing.assert_allclose(np.cov(dx.T) / 1e-3, A_EQ, atol=0.02)


def test_simulate_rejects_bad_start():
    spec = SrbmSpec(R_EQ, [0, 0], A_EQ)
    with pytest.raises(ValidationError):
        simulate_srbm(spec, [-1.0, 0.0], 1.0, 0.1, seed=0)


# -- particles ---------------------------------------------------------------------

def test_named_zero_noise_frozen():
    spec = ParticleSystemSpec.classical((0, 0, 0), (1, 2, 3))
    path = simulate_named(spec, [0.0, 2.0, 1.0], 1.0, 0.1, seed=0, zero_noise=True)
    np.testing.assert_array_equal(path.positions, np.tile([0.0, 2.0, 1.0], (11, 1)))
    assert path.rank_history[0].tolist() == [1, 3, 2]


def test_named_two_particles_swap_drift_at_crossing():
    spec = ParticleSystemSpec.classical((1, -1), (1, 1))
    path = simulate_named(spec, [0.0, 1.0], 1.0, 0.125, seed=0, zero_noise=True)
    # the lower particle climbs at +1, the upper descends at -1, until they cross
    np.testing.assert_allclose(path.positions[4], [0.5, 0.5])
    assert np.all(np.abs(path.positions[4:, 0] - path.positions[4:, 1]) <= 0.25 + 1e-12)


def test_named_ranks_are_ranking_permutations(rng):
    from collide.particles import ranking_permutation

    spec = ParticleSystemSpec.classical((1, 0, -1), (1, 4, 9))
    path = simulate_named(spec, [0.0, 0.5, 1.0], 0.5, 1e-3, seed=3)
    for k in range(0, len(path.times), 50):
        assert path.rank_history[k].tolist() == ranking_permutation(path.positions[k]).tolist()
    assert np.all(np.diff(path.ranked(), axis=1) >= 0)


def test_named_requires_classical():
    spec = ParticleSystemSpec(3, (0, 0, 0), (1, 1, 1), (0.5, 0.7, 0.6), (0.3, 0.4, 0.5))
    with pytest.raises(ValidationError):
        simulate_named(spec, [0, 1, 2], 1.0, 0.1, seed=0)


def test_ranked_two_particles_gap_is_one_dimensional_srbm():
    spec = ParticleSystemSpec.classical((0.5, -0.5), (1, 1))
    ranked, gaps = simulate_ranked(spec, [0.0, 0.2], 1.0, 1e-3, seed=9)
    z, _ = reflect_1d(gaps.driver[:, 0])
    np.testing.assert_allclose(ranked[:, 1] - ranked[:, 0], z, atol=1e-10)


@pytest.mark.parametrize(
    "spec",
    [
        ParticleSystemSpec.classical((0, 0, 0, 0), (1, 0.81, 0.81, 1)),
        ParticleSystemSpec(3, (1, 0, -1), (1, 1, 1), (0.5, 0.7, 0.6), (0.3, 0.4, 0.5)),
    ],
)
def test_ranked_gaps_equal_srbm_states(spec):
    ranked, gaps = simulate_ranked(spec, np.arange(spec.n, dtype=float), 1.0, 1e-3, seed=4)
    np.testing.assert_allclose(np.diff(ranked, axis=1), gaps.states, atol=1e-10)
    assert np.all(np.diff(ranked, axis=1) >= -1e-10)


def test_ranked_zero_noise_separates_with_spreading_drift():
    spec = ParticleSystemSpec.classical((-1, 0, 1), (1, 1, 1))
    ranked, _ = simulate_ranked(spec, [0.0, 0.0, 0.0], 1.0, 0.1, seed=0, zero_noise=True)
    np.testing.assert_allclose(ranked[-1], [-1, 0, 1], atol=1e-12)


def test_ranked_zero_noise_collapses_with_converging_drift():
    # converging drifts keep the particles together and share the motion
    spec = ParticleSystemSpec.classical((1, -1), (1, 1))
    ranked, gaps = simulate_ranked(spec, [0.0, 0.0], 1.0, 0.1, seed=0, zero_noise=True)
    np.testing.assert_allclose(ranked[:, 0], ranked[:, 1], atol=1e-12)
    np.testing.assert_allclose(ranked[-1], [0, 0], atol=1e-12)


def test_ranked_rejects_unsorted_start():
    with pytest.raises(ValidationError):
        simulate_ranked(ParticleSystemSpec.classical((0, 0), (1, 1)), [1.0, 0.0], 1.0, 0.1, seed=0)


# -- collisions ---------------------------------------------------------------------

def _path(states):
    states = np.asarray(states, dtype=float)
    return SimulatedPath(np.arange(len(states), dtype=float), states, np.zeros_like(states))


def test_collisions_none_when_far():
    rep = detect_collisions(_path([[1, 1, 1], [0.5, 0.2, 0.3]]), 0.01)
    assert all(v == 0 for v in rep.near_triple_count.values())
    assert all(v == 0 for v in rep.near_simultaneous_count.values())


def test_collisions_at_corner():
    rep = detect_collisions(_path([[1, 1], [0, 0], [0.5, 0.0]]), 1e-3)
    assert rep.pair_min[(1, 2)] == 0.0
    assert rep.near_triple_count[2] == 1
    assert rep.to_dict()["near_triple_count"] == {"2": 1}


def test_collisions_rank_labels_and_nonadjacent_pairs():
    rep = detect_collisions(_path([[0, 5, 0], [1, 1, 1]]), 0.1)
    assert rep.near_triple_count == {2: 0, 3: 0}
    assert rep.near_simultaneous_count[(1, 3)] == 1
    assert rep.pair_min[(1, 3)] == 0.0


def test_collisions_reject_bad_delta():
    with pytest.raises(ValidationError):
        detect_collisions(_path([[1.0]]), 0.0)


# -- comparison properties ----------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(d=st.integers(2, 3), seed=st.integers(0, 2**32 - 1))
def test_smaller_reflection_matrix_gives_smaller_path(d, seed):
    rng = np.random.default_rng(seed)
    r = random_m_matrix(rng, d, 0.6)
    r_bar = r - np.where(np.eye(d) == 1, 0.0, rng.uniform(0, 0.3, (d, d)))
    if max(abs(np.linalg.eigvals(np.eye(d) - r_bar))) >= 0.99:
        r_bar = r
    x = np.vstack([np.full(d, 0.2), 0.2 + np.cumsum(rng.normal(0, 0.05, (400, d)), axis=0)])
    z = skorohod_map(x, r).states
    zb = skorohod_map(x, r_bar).states
    assert np.all(zb <= z + 1e-9)
    for i in range(d):
        sub = skorohod_map(x[:, [i]], [[1.0]]).states[:, 0]
        assert np.all(z[:, i] <= sub + 1e-9)


def test_srbm_of_gap_process_round_trips():
    spec = to_srbm(ParticleSystemSpec.classical((1, 0, -1), (1, 4, 9)))
    r, mu, a = gap_matrices(ParticleSystemSpec.classical((1, 0, -1), (1, 4, 9)))
    np.testing.assert_array_equal(spec.r, r)
    np.testing.assert_array_equal(spec.mu, mu)
    np.testing.assert_array_equal(spec.a, a)
