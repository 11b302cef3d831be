import math

import numpy as np
import pytest
from scipy import stats

from latnet.chain import (
    build_chain,
    chain_from_spec,
    choose_code_below,
    is_prime,
    mac_rate_targets,
    rate_grid,
)
from latnet.errors import GuardError, InfeasibleToleranceError, SchemaError
from latnet.lattice import integer_lattice
from latnet.rngutil import substream


def test_single_user_z2_chain():
    # P = 12 on Z^2 with a mod-3 rate-1/2 code: scale 12, code lattice
    # 4 * (code + 3 Z^2), coding rate log2(3)/2.
    ch = build_chain(integer_lattice(2), [12.0], 3, 1, tolerance=0.5, seed=7)
    assert ch.base_scale == pytest.approx(12.0, abs=1e-9)
    assert ch.achieved_powers[0] == pytest.approx(12.0, abs=1e-9)
    assert ch.rates[0] == pytest.approx(0.5 * math.log2(3.0), abs=1e-12)
    assert ch.shaping[0].volume == pytest.approx(144.0, abs=1e-6)
    assert ch.code_lattice.volume == pytest.approx(48.0, abs=1e-6)
    # Leader count equals the volume ratio.
    leaders = ch.coset_leaders(1)
    assert leaders.cardinality == 3
    assert leaders.cardinality == pytest.approx(ch.shaping[0].volume / ch.code_lattice.volume)


def test_equal_powers_collapse():
    ch = build_chain(integer_lattice(2), [7.0, 7.0, 7.0], 2, 1, tolerance=0.5, seed=1)
    assert ch.multipliers == (1, 1, 1)
    assert len(set(ch.rates)) == 1
    for lam in ch.shaping[1:]:
        assert np.allclose(lam.generator, ch.shaping[0].generator)


def test_integer_ratio_chain_48_12(scalar_chain_48_12):
    ch = scalar_chain_48_12
    assert ch.multipliers == (2, 1)
    assert ch.achieved_powers[0] == pytest.approx(4.0 * ch.achieved_powers[1], abs=1e-9)
    assert ch.rates[0] - ch.rates[1] == pytest.approx(1.0, abs=1e-12)
    # Rate ladder in terms of achieved powers is exact for integer ratios.
    ladder = ch.rates[0] - ch.rates[1] - 0.5 * math.log2(ch.achieved_powers[0] / ch.achieved_powers[1])
    assert ladder == pytest.approx(0.0, abs=1e-12)


def test_leaders_of_6z_over_2z():
    # P = 3 makes the shaping lattice 6Z; a full mod-3 code makes the code
    # lattice 2Z; the canonical representatives are 0, 2, -2.
    ch = build_chain(integer_lattice(1), [3.0], 3, 1, tolerance=0.1, seed=1)
    assert ch.shaping[0].generator[0, 0] == pytest.approx(6.0)
    assert ch.code_lattice.volume == pytest.approx(2.0)
    leaders = sorted(float(x) for x in ch.coset_leaders(1).leaders[:, 0])
    assert leaders == pytest.approx([-2.0, 0.0, 2.0])


def test_level_counts_product_form(scalar_chain_48_12):
    assert scalar_chain_48_12.coset_leaders(1).cardinality == 6  # m * p^k = 2 * 3
    assert scalar_chain_48_12.coset_leaders(2).cardinality == 3


def test_nesting_membership(scalar_chain_48_12):
    ch = scalar_chain_48_12
    for i, lam in enumerate(ch.shaping):
        for row in lam.generator:
            assert ch.code_lattice.contains(row)
            if i + 1 < ch.user_count:
                assert ch.shaping[i + 1].contains(row)


def test_leaders_distinct_and_in_voronoi(scalar_chain_48_12):
    ch = scalar_chain_48_12
    for level in (1, 2):
        ls = ch.coset_leaders(level)
        assert len(set(ls.ids)) == ls.cardinality
        for vec in ls.leaders:
            assert np.allclose(ch.shaping[level - 1].nearest_point(vec), 0.0, atol=1e-9)


def test_power_floor_never_exceeds_target():
    rng = substream(41, 0)
    for _ in range(20):
        K = int(rng.integers(1, 4))
        powers = np.sort(rng.uniform(1.0, 60.0, size=K))[::-1]
        try:
            ch = build_chain(integer_lattice(1), powers, 2, 1, tolerance=float(powers[-1]), seed=3)
        except InfeasibleToleranceError:
            continue
        for a, t in zip(ch.achieved_powers, ch.target_powers):
            assert 0.0 < a <= t + 1e-9


def test_infeasible_tolerance_reports_nearest():
    # P = (50, 12): the multiplier grid reaches 48, short of 50 - 0.5.
    with pytest.raises(InfeasibleToleranceError) as exc:
        build_chain(integer_lattice(1), [50.0, 12.0], 3, 1, tolerance=0.5, seed=1)
    assert exc.value.nearest_achievable == pytest.approx(48.0, abs=1e-9)


def test_code_dimension_out_of_range():
    with pytest.raises(ValueError, match="range"):
        build_chain(integer_lattice(2), [10.0], 3, 3, seed=1)


def test_nonprime_rejected():
    with pytest.raises(ValueError, match="prime"):
        build_chain(integer_lattice(1), [10.0], 4, 1, seed=1)
    assert is_prime(31) and not is_prime(33)


def test_coset_guard():
    with pytest.raises(GuardError):
        ch = build_chain(integer_lattice(8), [12.0], 13, 8, tolerance=0.5, seed=1)
        ch.coset_leaders(1)


def test_rate_targets_values():
    vals = mac_rate_targets([15.0, 15.0])
    assert vals[0] == pytest.approx(0.5 * math.log2(15.5), abs=1e-12)
    assert vals[0] == vals[1]
    assert mac_rate_targets([15.0]) == [pytest.approx(2.0, abs=1e-12)]
    assert mac_rate_targets([15.0, 0.0])[1] == 0.0


def test_rate_targets_validation():
    with pytest.raises(ValueError):
        mac_rate_targets([1.0, 2.0])
    with pytest.raises(ValueError):
        mac_rate_targets([0.0, 0.0])


def test_rate_grid_and_selection():
    grid = rate_grid(4, max_multiplier=2, primes=(2, 3))
    rates = [g[0] for g in grid]
    assert rates == sorted(rates)
    p, k, r = choose_code_below(1.0, 4, primes=(2, 3, 5, 7))
    assert r <= 1.0 + 1e-12
    assert r == pytest.approx(1.0)  # k/n log2 p = 4/4 * 1


def test_zero_dimension_code():
    ch = build_chain(integer_lattice(2), [5.0], 3, 0, tolerance=0.5, seed=1)
    assert ch.rates[0] == 0.0
    assert ch.coset_leaders(1).cardinality == 1
    assert np.allclose(ch.coset_leaders(1).leaders[0], 0.0)


def test_encode_basics(scalar_chain_48_12):
    ch = scalar_chain_48_12
    x = ch.encode(1, 0, np.zeros(1))
    assert np.allclose(x, 0.0)  # leader 0 with zero dither
    with pytest.raises(ValueError, match="range"):
        ch.encode(1, 99, np.zeros(1))
    with pytest.raises(ValueError, match="dither"):
        ch.encode(1, 0, np.array([100.0]))


def test_dither_statistics(scalar_chain_48_12):
    ch = scalar_chain_48_12
    rng = substream(42, 0)
    samples = np.array([ch.sample_dither(1, rng)[0] for _ in range(4000)])
    # Uniform on (-12, 12]: mean 0, second moment 48.
    assert abs(samples.mean()) <= 3 * samples.std(ddof=1) / math.sqrt(len(samples))
    m2 = samples**2
    assert abs(m2.mean() - 48.0) <= 3 * m2.std(ddof=1) / math.sqrt(len(samples))
    assert np.all(np.abs(samples) <= 12.0 + 1e-9)


def test_encode_power_matches_second_moment(scalar_chain_48_12):
    ch = scalar_chain_48_12
    rng = substream(43, 0)
    for level, power in [(1, 48.0), (2, 12.0)]:
        card = ch.coset_leaders(level).cardinality
        vals = []
        for _ in range(3000):
            msg = int(rng.integers(0, card))
            x = ch.encode(level, msg, ch.sample_dither(level, rng), validate=False)
            vals.append(float(x @ x) / ch.dimension)
        vals = np.array(vals)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - power) <= 3 * se


def test_dithered_group_shift_is_uniform(scalar_chain_48_12):
    # Discrete form of the dither argument: adding a uniform codebook
    # element to any fixed element and folding stays uniform.
    ch = scalar_chain_48_12
    leaders = ch.coset_leaders(1)
    rng = substream(44, 0)
    for fixed_idx in (0, 3):
        b = leaders.leaders[fixed_idx]
        counts = np.zeros(leaders.cardinality, dtype=int)
        for _ in range(3000):
            u = leaders.leaders[int(rng.integers(0, leaders.cardinality))]
            out = ch.canonical_leader(1, ch.shaping[0].reduce(b + u))
            counts[leaders.index_of[ch.leader_id(1, out)]] += 1
        assert stats.chisquare(counts).pvalue > 1e-3


def test_encode_output_independent_of_message(scalar_chain_48_12):
    # Continuous dither makes the transmit value message independent:
    # two-sample test between the outputs for two fixed messages.
    ch = scalar_chain_48_12
    rng = substream(45, 0)
    xs = {0: [], 4: []}
    for msg in xs:
        for _ in range(1500):
            xs[msg].append(float(ch.encode(1, msg, ch.sample_dither(1, rng), validate=False)[0]))
    assert stats.ks_2samp(xs[0], xs[4]).pvalue > 1e-3


def test_chain_from_spec_schema():
    spec = {"base": "Zn", "dimension": 1, "powers": [3.0], "prime": 3, "code_dimension": 1, "seed": 1}
    ch = chain_from_spec(spec)
    assert ch.user_count == 1
    with pytest.raises(SchemaError, match="badkey"):
        chain_from_spec(dict(spec, badkey=1))
    with pytest.raises(SchemaError, match="prime"):
        chain_from_spec({"powers": [3.0], "code_dimension": 1})
