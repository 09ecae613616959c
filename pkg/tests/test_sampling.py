import json
import math

import numpy as np
import pytest
from scipy import stats

from solgas.domains import DiskDomain, EllipseDomain, QuadratureDomain, area
from solgas.errors import MaxIterationsExceeded, PointOutsideReferenceDisk
from solgas.sampling import (
    FEKETE_SCALE,
    GinibreChain,
    SamplerConfig,
    derive_seed,
    fekete_energy,
    fekete_gradient,
    fekete_points,
    ginibre_sample,
    make_rng,
    map_to_domain,
    norming_constants,
    read_points_csv,
    stratified_domain_sample,
    uniform_domain_sample,
    write_points_csv,
)
from solgas.types import DensitySpec


def brute_energy(w):
    n = len(w)
    e = 0.5 * n * np.sum(np.abs(w) ** 2)
    for j in range(n):
        for k in range(j + 1, n):
            e -= 2 * math.log(abs(w[j] - w[k]))
    return e


def test_energy_and_gradient_oracles(rng):
    w = rng.normal(size=7) + 1j * rng.normal(size=7)
    assert fekete_energy(w) == pytest.approx(brute_energy(w), rel=1e-13)
    # Wirtinger gradient dE/d conj(w) = (dE/dx + i dE/dy)/2
    g = fekete_gradient(w)
    h = 1e-6
    for j in range(7):
        e = np.zeros(7, complex)
        e[j] = h
        dx = (brute_energy(w + e) - brute_energy(w - e)) / (2 * h)
        dy = (brute_energy(w + 1j * e) - brute_energy(w - 1j * e)) / (2 * h)
        assert g[j] == pytest.approx(0.5 * (dx + 1j * dy), rel=1e-6, abs=1e-6)


def test_fekete_small_n():
    assert fekete_points(1).points.tolist() == [0j]
    for seed in (0, 1, 5):
        p2 = fekete_points(2, tol=1e-10, seed=seed).points
        assert np.abs(p2) == pytest.approx(1 / math.sqrt(2), abs=1e-6)
        assert abs(p2.sum()) < 1e-8
        p3 = fekete_points(3, tol=1e-10, seed=seed).points
        assert np.abs(p3) == pytest.approx(math.sqrt(2 / 3), abs=1e-6)
        sides = np.abs(p3 - np.roll(p3, 1))
        assert np.ptp(sides) < 1e-6


def test_fekete_result_fields(tmp_path):
    res = fekete_points(60, seed=2)
    assert res.converged and res.gradient_norm <= 1e-6 * 60
    assert math.isfinite(res.energy)
    assert res.energy == pytest.approx(fekete_energy(res.points))
    # critical points satisfy sum |w|^2 = N - 1
    assert np.sum(np.abs(res.points) ** 2) == pytest.approx(59, rel=1e-5)
    assert np.abs(res.unit_disk_points).max() < 1.0
    assert np.allclose(res.unit_disk_points, res.points / FEKETE_SCALE)
    res.write(tmp_path / "p.csv", tmp_path / "p.json")
    assert np.array_equal(read_points_csv(tmp_path / "p.csv"), res.points)
    side = json.loads((tmp_path / "p.json").read_text())
    assert set(side) >= {"energy", "gradient_norm", "iterations", "seed"}


def test_fekete_energy_monotone_and_cap():
    res = fekete_points(40, max_iter=5, seed=3)
    assert not res.converged and res.iterations == 5
    with pytest.raises(MaxIterationsExceeded) as info:
        fekete_points(40, max_iter=5, seed=3, strict=True)
    assert info.value.result.iterations == 5
    energies = [fekete_points(40, max_iter=k, seed=3).energy for k in (1, 2, 4, 8, 16)]
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_seed_streams():
    assert derive_seed(7, 0) == 7
    assert derive_seed(7, 3) == 7 ^ 3
    a = make_rng(11).random(5)
    assert np.array_equal(a, make_rng(11).random(5))


def test_ginibre_one_particle():
    # N = 1: density exp(-|w|^2), so |w|^2 ~ Exp(1)
    vals = np.array([abs(ginibre_sample(1, SamplerConfig(seed=1, mcmc_burn_in=30), k)[0]) ** 2
                     for k in range(3000)])
    assert vals.mean() == pytest.approx(1.0, abs=4 / math.sqrt(3000))
    assert stats.kstest(vals, "expon").pvalue > 1e-3


def test_ginibre_kostlan_and_circular_law():
    rng = np.random.default_rng(9)
    ks = []
    for k in range(20):
        u = ginibre_sample(200, SamplerConfig(seed=4), trial=k)
        g = rng.gamma(np.arange(1, 201), 1.0) / 200
        ks.append(stats.ks_2samp(np.abs(u) ** 2, g).statistic)
    assert np.mean(ks) < 0.1
    u = ginibre_sample(400, SamplerConfig(seed=4))
    assert np.mean(np.abs(u) <= 0.9) == pytest.approx(0.81, abs=0.05)


def test_ginibre_linear_statistic():
    vals = [np.mean(np.abs(ginibre_sample(100, SamplerConfig(seed=8), k)) ** 2) for k in range(50)]
    se = np.std(vals, ddof=1) / math.sqrt(50)
    # E[N^-1 sum |w|^2] = (N + 1)/(2N) for the finite ensemble, 1/2 in the limit
    assert abs(np.mean(vals) - 0.5) < 3 * se + 0.5 / 100


def test_ginibre_chain_reproducible():
    a = ginibre_sample(50, SamplerConfig(seed=3), trial=2)
    b = ginibre_sample(50, SamplerConfig(seed=3), trial=2)
    assert np.array_equal(a, b)
    chain = GinibreChain(50, SamplerConfig(seed=3))
    chain.sweep(10)
    assert 0.2 < chain.acceptance_rate < 0.9
    assert len(list(chain.samples(3))) == 3
    with pytest.raises(ValueError):
        SamplerConfig(mcmc_burn_in=0)


def test_map_to_domain():
    disk = DiskDomain(1j, 0.1)
    assert map_to_domain([0], disk)[0] == 1j
    assert map_to_domain([1], disk)[0] == pytest.approx(1j + 0.1)
    w = 0.99 * np.exp(2j * np.pi * np.arange(30) / 30)
    assert disk.contains(map_to_domain(w, disk)).all()
    ell = EllipseDomain(0.5, 1.5, 0.6)
    assert ell.contains(map_to_domain(w, ell)).all()
    with pytest.raises(PointOutsideReferenceDisk):
        map_to_domain([1.01], disk)
    with pytest.raises(TypeError):
        map_to_domain([0], QuadratureDomain(1j, 4e-4, 1e-3, 2))


def test_uniform_sample_moments_and_sectors():
    disk = DiskDomain(1j, 0.1)
    z = uniform_domain_sample(disk, 2000, seed=5)
    assert disk.contains(z).all()
    u = (z - 1j) / 0.1
    se = 1 / math.sqrt(2 * 2000)
    assert abs(u.real.mean()) < 4 * se and abs(u.imag.mean()) < 4 * se
    assert np.mean(np.abs(u) ** 2) == pytest.approx(0.5, abs=0.02)
    sectors = np.floor((np.angle(u) + np.pi) / (np.pi / 4)).astype(int) % 8
    counts = np.bincount(sectors, minlength=8)
    assert stats.chisquare(counts).pvalue > 0.01
    ell = EllipseDomain(0.5, 1.5, 0.6)
    assert ell.contains(uniform_domain_sample(ell, 500, seed=1)).all()


@pytest.mark.parametrize("domain", [QuadratureDomain(1j, 4e-4, 1e-3, 2), DiskDomain(1j, 0.1),
                                    EllipseDomain(0.5, 1.5, 0.6)])
def test_stratified_sample(domain):
    for n in (100, 200, 333):
        z = stratified_domain_sample(domain, n)
        assert z.size == n and domain.contains(z).all()
        assert np.unique(z).size == n
    # equal-area nodes integrate |z - centre|^2 accurately
    c = domain.polar_center()
    z = stratified_domain_sample(domain, 400)
    ang = 2 * np.pi * np.arange(4096) / 4096
    exact = np.mean(domain.polar_radius(ang) ** 4) / 2 / np.mean(domain.polar_radius(ang) ** 2)
    assert np.mean(np.abs(z - c) ** 2) == pytest.approx(exact, rel=2e-2)


def test_norming_constants():
    disk = DiskDomain(1j, 0.1)
    z = map_to_domain(fekete_points(50).unit_disk_points, disk)
    d = norming_constants(z, area(disk), DensitySpec.constant(math.pi / 0.01))
    assert np.allclose(d.c, math.pi / 50, rtol=1e-14)
    assert np.all(norming_constants(z, area(disk), DensitySpec.constant(0)).c == 0)
    beta = DensitySpec(0, (1.0, 2.0), expansion_center=1j)
    d = norming_constants(z, area(disk), beta)
    bound = area(disk) * (1 + 2 * 0.1) / (math.pi * 50)
    assert np.abs(d.c).max() <= bound
    # total mass -> area integral of beta / pi = rho^2 beta(center)
    assert d.c.sum() == pytest.approx(0.01, rel=1e-3)


def test_points_csv_roundtrip(tmp_path):
    pts = np.array([0.5 + 1j, -0.0 - 2.25j])
    write_points_csv(pts, tmp_path / "x.csv")
    text = (tmp_path / "x.csv").read_text()
    assert text.splitlines()[0] == "re,im" and "-0," not in text
    assert np.array_equal(read_points_csv(tmp_path / "x.csv"), pts)
