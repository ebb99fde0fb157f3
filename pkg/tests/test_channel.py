"""
Test the cascaded channel model

Run: python tests/test_channel.py
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy.stats import ks_2samp

from src.tools.channel import cascaded_gain, draw_channel, draw_channel_batch, sample_nlos, snr_prefactor
from src.tools.placement import conventional_positions, optimal_positions
from src.tools.rng import SeededStream, block_bounds, block_rng
from src.utils.config import default_geometry
from src.utils.errors import LayoutMismatchError
from src.utils.state import ChannelDraw, LinkGeometry, RicianSpec

GEOMETRY = default_geometry().to_link_geometry()


def test_nlos_statistics():
    """CN(0,1): zero mean, unit power, independent halves of variance 1/2"""
    print("=" * 60)
    print("TEST 1: NLoS draws")
    print("=" * 60)

    rng = np.random.default_rng(11)
    z = sample_nlos(rng, 1_000_000)
    print(f"✓ mean = {z.mean():.5f}, E|z|^2 = {np.mean(np.abs(z) ** 2):.5f}")
    assert abs(z.mean()) < 0.005
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.var(z.real) - 0.5) < 0.01
    assert abs(np.var(z.imag) - 0.5) < 0.01
    assert abs(np.mean(z.real * z.imag)) < 0.005

    a = sample_nlos(np.random.default_rng(3))
    b = sample_nlos(np.random.default_rng(3))
    assert isinstance(a, complex) and a == b
    print("✓ same seed -> same draw")


def test_cascaded_gain_power():
    """E|h|^2 = 1 for every K, LoS term dominates at large K"""
    print("\n" + "=" * 60)
    print("TEST 2: Cascaded gain")
    print("=" * 60)

    rng = np.random.default_rng(5)
    x = np.arange(8) * 0.37
    for K in (0.0, 1.0, 4.0, 10.0):
        h = cascaded_gain(K, sample_nlos(rng, (50_000, 8)), x, GEOMETRY)
        power = np.mean(np.abs(h) ** 2)
        print(f"  K={K:>4g}: E|h|^2 = {power:.4f}")
        assert abs(power - 1.0) < 0.02
        assert abs(h.mean() - np.sqrt(K / (K + 1))) < 0.01

    h = cascaded_gain(1e12, sample_nlos(rng, 1000), 0.0, GEOMETRY)
    assert np.max(np.abs(h - 1.0)) < 1e-5
    print("✓ K=1e12 gives h ~ 1")

    z = sample_nlos(rng, 1000)
    assert np.array_equal(cascaded_gain(0.0, z, 0.0, GEOMETRY), z)
    assert cascaded_gain(0.0, complex(0.3, -1.2), 0.0, GEOMETRY) == complex(0.3, -1.2)
    print("✓ K=0 at the reference point returns the NLoS draw unchanged")

    assert cascaded_gain(4.0, 0j, 0.0, GEOMETRY) == pytest.approx(np.sqrt(0.8))
    with pytest.raises(ValueError):
        cascaded_gain(-1.0, 0j, 0.0, GEOMETRY)


def test_snr_prefactor():
    """Reference setup: 1 W, 1e-3^2, 30^3 * 10^3, 1e-14 W"""
    pref = snr_prefactor(GEOMETRY)
    print(f"\n✓ prefactor = {pref:.4f}")
    assert pref == pytest.approx(3.7037, rel=1e-4)

    louder = GEOMETRY.with_updates(beta0=2 * GEOMETRY.beta0)
    assert snr_prefactor(louder) == pytest.approx(4 * pref, rel=1e-12)
    farther = GEOMETRY.with_updates(d_rd=2 * GEOMETRY.d_rd)
    assert GEOMETRY.alpha == 3.0
    assert snr_prefactor(farther) == pytest.approx(pref / 8, rel=1e-12)
    print("✓ doubling beta0 gives x4, doubling d_rd gives /8")


def test_draw_channel():
    spec = RicianSpec(K=4.0, N=6)
    layout = optimal_positions(6, GEOMETRY)
    draw = draw_channel(spec, layout, GEOMETRY, np.random.default_rng(1))
    assert isinstance(draw, ChannelDraw)
    assert draw.N == 6
    assert np.all(draw.phases >= -np.pi) and np.all(draw.phases < np.pi)
    assert np.max(np.abs(draw.phases - np.angle(draw.gains))) < 1e-12

    with pytest.raises(LayoutMismatchError):
        draw_channel(RicianSpec(K=4.0, N=5), layout, GEOMETRY, np.random.default_rng(1))
    with pytest.raises(ValueError):
        ChannelDraw(gains=np.ones(3), phases=np.zeros(2))

    again = draw_channel(spec, layout, GEOMETRY, np.random.default_rng(1))
    assert np.array_equal(again.gains, draw.gains)
    assert np.array_equal(again.phases, draw.phases)
    print("✓ same seed -> identical ChannelDraw")

    assert not draw.gains.flags.writeable and not draw.phases.flags.writeable
    with pytest.raises(ValueError):
        draw.phases[0] = 0.0
    source = np.ones(3, dtype=complex)
    ChannelDraw(gains=source, phases=np.zeros(3))
    assert source.flags.writeable
    print("✓ draw_channel shapes, phases and length checks")


def test_batch_matches_single_draws():
    """A batch is the same model as repeated single draws"""
    spec = RicianSpec(K=2.0, N=4)
    layout = optimal_positions(4, GEOMETRY)
    batch = draw_channel_batch(spec, layout, GEOMETRY, np.random.default_rng(9), 20_000)
    assert batch.shape == (20_000, 4)
    assert abs(np.mean(np.abs(batch) ** 2) - 1.0) < 0.02
    with pytest.raises(ValueError):
        draw_channel_batch(spec, layout, GEOMETRY, np.random.default_rng(9), 0)
    print("✓ batch draws")


def test_rayleigh_phase_uniform():
    """K=0: 64-bin phase histogram flat to 1% (10^7 draws so the bound is ~4 sigma)"""
    print("\n" + "=" * 60)
    print("TEST: K=0 phase histogram")
    print("=" * 60)

    spec = RicianSpec(K=0.0, N=2)
    layout = conventional_positions(2, GEOMETRY.lam)
    edges = np.linspace(-np.pi, np.pi, 65)
    counts = np.zeros(64)
    rng = np.random.default_rng(21)
    for _ in range(5):
        h = draw_channel_batch(spec, layout, GEOMETRY, rng, 1_000_000)
        counts += np.histogram(np.angle(h), bins=edges)[0]
    fractions = counts / counts.sum()
    deviation = np.max(np.abs(fractions * 64 - 1.0))
    print(f"✓ max relative bin deviation {100 * deviation:.3f}%")
    assert deviation < 0.01


def test_phase_symmetry():
    """|F(phi) + F(-phi) - 1| < 0.01 for the empirical phase CDF"""
    rng = np.random.default_rng(8)
    phases = np.angle(cascaded_gain(4.0, sample_nlos(rng, 1_000_000), 0.0, GEOMETRY))
    grid = np.linspace(0.0, np.pi, 41)
    F = lambda phi: np.mean(phases <= phi)
    worst = max(abs(F(p) + F(-p) - 1.0) for p in grid)
    print(f"\n✓ max |F(phi) + F(-phi) - 1| = {worst:.5f}")
    assert worst < 0.01


def test_phase_independent_of_position():
    """Raw phases of the first and last element share one distribution"""
    spec = RicianSpec(K=4.0, N=8)
    layout = conventional_positions(8, GEOMETRY.lam)
    h = draw_channel_batch(spec, layout, GEOMETRY, np.random.default_rng(13), 100_000)
    stat = ks_2samp(np.angle(h[:, 0]), np.angle(h[:, -1])).statistic
    print(f"\n✓ KS(element 1, element {spec.N}) = {stat:.4f}")
    assert stat < 0.01


def test_block_streams():
    """Block generators depend only on (seed, block)"""
    assert block_bounds(10, 4) == [(0, 0, 4), (1, 4, 8), (2, 8, 10)]
    a = block_rng(7, 3).standard_normal(5)
    b = block_rng(7, 3).standard_normal(5)
    c = block_rng(7, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)

    stream = SeededStream(42)
    assert stream.seed == 42
    first = stream.fork().standard_normal(3)
    second = stream.fork().standard_normal(3)
    assert not np.array_equal(first, second)
    assert np.array_equal(SeededStream(42).fork().standard_normal(3), first)
    print("✓ block and forked streams are reproducible and distinct")


def test_geometry_validation():
    with pytest.raises(ValueError):
        GEOMETRY.with_updates(d_rd=0.0)
    with pytest.raises(ValueError):
        GEOMETRY.with_updates(phi_sr=float("nan"))
    with pytest.raises(ValueError):
        GEOMETRY.with_cos_sum(2.5)
    moved = GEOMETRY.with_cos_sum(1.0)
    assert moved.cos_sum == pytest.approx(1.0)
    assert moved.phi_sr == moved.phi_rd
    assert isinstance(moved, LinkGeometry)
    print("✓ geometry validation")


if __name__ == "__main__":
    print("IRS Simulator - Channel Tests")
    print("=" * 60)

    try:
        test_nlos_statistics()
        test_cascaded_gain_power()
        test_snr_prefactor()
        test_draw_channel()
        test_batch_matches_single_draws()
        test_rayleigh_phase_uniform()
        test_phase_symmetry()
        test_phase_independent_of_position()
        test_block_streams()
        test_geometry_validation()
        print("\n✅ ALL CHANNEL TESTS PASSED!")
    except Exception as e:
        print(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
