"""Point spectra filling a domain, and their norming constants.

Reference configurations live around the origin:

* ``fekete_points`` minimises ``E(w) = -2 sum_{j<k} log|w_j - w_k| + (N/2) sum |w_j|^2``.
  Critical points satisfy ``sum |w_j|^2 = N - 1``, so the minimisers fill the
  disk of radius sqrt(2); ``FeketeResult.unit_disk_points`` rescales them.
* ``ginibre_sample`` draws from ``exp(-E)`` by Metropolis-Hastings and returns
  the configuration rescaled to the unit disk, i.e. a draw from
  ``prod |u_j - u_k|^2 exp(-N sum |u_j|^2)``.

Random streams: ``numpy.random.Generator(PCG64(seed))``; trial ``k`` of an
experiment uses ``derive_seed(seed, k) = seed XOR k``.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .domains import DiskDomain, Domain, EllipseDomain, QuadratureDomain
from .errors import CollapsedPoints, MaxIterationsExceeded, PointOutsideReferenceDisk
from .types import DensitySpec, ScatteringData, eval_density

FEKETE_SCALE = math.sqrt(2.0)
_MIN_PAIR_DISTANCE = 1e-12
_SEED_MASK = (1 << 64) - 1


def derive_seed(seed: int, trial: int) -> int:
    return (int(seed) ^ int(trial)) & _SEED_MASK


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _SEED_MASK))


def uniform_unit_disk(n: int, rng: np.random.Generator) -> np.ndarray:
    r = np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


# ---------------------------------------------------------------- Fekete

@numba.njit(cache=True)
def _energy_kernel(w):
    n = w.shape[0]
    e = 0.0
    dmin = np.inf
    for j in range(n):
        e += 0.5 * n * (w[j].real ** 2 + w[j].imag ** 2)
        for k in range(j + 1, n):
            d = abs(w[j] - w[k])
            dmin = min(dmin, d)
            e -= 2.0 * math.log(d) if d > 0 else -np.inf
    return e, dmin


@numba.njit(cache=True)
def _gradient_kernel(w):
    n = w.shape[0]
    g = np.empty(n, dtype=np.complex128)
    for j in range(n):
        g[j] = 0.5 * n * w[j]
    for j in range(n):
        wj = np.conj(w[j])
        for k in range(j + 1, n):
            inv = 1.0 / (wj - np.conj(w[k]))
            g[j] -= inv
            g[k] += inv
    return g


def fekete_energy(w) -> float:
    e, dmin = _energy_kernel(np.ascontiguousarray(w, dtype=np.complex128))
    return math.inf if dmin < _MIN_PAIR_DISTANCE else float(e)


def fekete_gradient(w) -> np.ndarray:
    """Wirtinger gradient ``dE/d conj(w_j)``."""
    return _gradient_kernel(np.ascontiguousarray(w, dtype=np.complex128))


@dataclass(frozen=True)
class FeketeResult:
    points: np.ndarray
    energy: float
    gradient_norm: float
    iterations: int
    converged: bool
    seed: int

    @property
    def unit_disk_points(self) -> np.ndarray:
        return self.points / FEKETE_SCALE

    def sidecar(self) -> dict:
        d = asdict(self)
        d.pop("points")
        d["n"] = len(self.points)
        return d

    def write(self, csv_path, json_path=None) -> None:
        write_points_csv(self.points, csv_path)
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def fekete_points(n: int, tol: float = 1e-6, max_iter: int = 20000, seed: int = 0,
                  strict: bool = False) -> FeketeResult:
    """Gradient descent with Armijo backtracking from a random start.

    Converged when ``max_j |dE/d conj(w_j)| <= tol * n``. On hitting
    ``max_iter`` the best configuration is returned with ``converged=False``
    (or :class:`MaxIterationsExceeded` is raised when ``strict``).
    """
    if n < 1:
        raise ValueError("n must be positive")
    result = _fekete_cached(int(n), float(tol), int(max_iter), int(seed))
    if strict and not result.converged:
        raise MaxIterationsExceeded(
            f"gradient norm {result.gradient_norm:.3e} after {result.iterations} iterations",
            result=result)
    return result


@functools.lru_cache(maxsize=32)
def _fekete_cached(n: int, tol: float, max_iter: int, seed: int) -> FeketeResult:
    if n == 1:
        # only the confining term: the minimiser is the origin
        w = np.zeros(1, dtype=complex)
        w.setflags(write=False)
        return FeketeResult(w, 0.0, 0.0, 0, True, seed)
    rng = make_rng(seed)
    w = uniform_unit_disk(n, rng)
    energy = fekete_energy(w)
    grad = fekete_gradient(w)
    gnorm = float(np.abs(grad).max())
    it = 0
    step = 1.0 / n
    while gnorm > tol * n and it < max_iter:
        g2 = float(np.sum(np.abs(grad) ** 2))
        trial = min(2.0 * step, 1.0 / n)
        while True:
            cand = w - trial * grad
            e_new = fekete_energy(cand)
            # dE along -grad is -2 |grad|^2
            if e_new <= energy - 1e-4 * 2.0 * trial * g2:
                break
            trial *= 0.5
            if trial < 1e-30:
                raise CollapsedPoints("line search failed to find a descent step")
        step = trial
        w, energy = cand, e_new
        grad = fekete_gradient(w)
        gnorm = float(np.abs(grad).max())
        it += 1
    w.setflags(write=False)
    return FeketeResult(w, energy, gnorm, it, gnorm <= tol * n, seed)


# ---------------------------------------------------------------- Ginibre

@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    mcmc_burn_in: int = 200
    mcmc_steps_per_sample: int = 20
    proposal_scale: float = 1.0

    def __post_init__(self):
        if self.mcmc_burn_in < 1 or self.mcmc_steps_per_sample < 1:
            raise ValueError("MCMC step counts must be positive")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")


@numba.njit(cache=True)
def _metropolis_sweep(u, steps, uniforms, n_weight):
    # log density: 2 sum_{j<k} log|u_j - u_k| - n_weight sum |u_j|^2
    n = u.shape[0]
    accepted = 0
    for j in range(n):
        old = u[j]
        new = old + steps[j]
        delta = -n_weight * (abs(new) ** 2 - abs(old) ** 2)
        ok = True
        for k in range(n):
            if k != j:
                dn = abs(new - u[k])
                if dn < 1e-12:
                    ok = False
                    break
                delta += 2.0 * (math.log(dn) - math.log(abs(old - u[k])))
        if ok and (delta >= 0.0 or uniforms[j] < math.exp(delta)):
            u[j] = new
            accepted += 1
    return accepted


class GinibreChain:
    """Metropolis chain on the unit-disk Ginibre density (single-particle moves)."""

    def __init__(self, n: int, config: SamplerConfig, seed: int | None = None):
        self.n = n
        self.config = config
        self.rng = make_rng(config.seed if seed is None else seed)
        self.u = uniform_unit_disk(n, self.rng)
        self.sigma = config.proposal_scale / math.sqrt(n)
        self.accepted = 0
        self.proposed = 0

    def sweep(self, count: int = 1) -> None:
        for _ in range(count):
            steps = self.sigma * (self.rng.standard_normal(self.n)
                                  + 1j * self.rng.standard_normal(self.n)) / math.sqrt(2.0)
            uniforms = self.rng.random(self.n)
            self.accepted += _metropolis_sweep(self.u, steps, uniforms, float(self.n))
            self.proposed += self.n

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def samples(self, count: int):
        self.sweep(self.config.mcmc_burn_in)
        for _ in range(count):
            yield self.u.copy()
            self.sweep(self.config.mcmc_steps_per_sample)


def ginibre_sample(n: int, config: SamplerConfig, trial: int = 0) -> np.ndarray:
    """One draw (after burn-in) from an independent chain seeded by ``derive_seed``."""
    if n < 1:
        raise ValueError("n must be positive")
    chain = GinibreChain(n, config, seed=derive_seed(config.seed, trial))
    chain.sweep(config.mcmc_burn_in)
    return chain.u.copy()


# ---------------------------------------------------------------- domains

def map_to_domain(points, domain: Domain, check: bool = True) -> np.ndarray:
    """Affine image of unit-disk points: ``z = center + rho w`` (axis-scaled for ellipses)."""
    w = np.asarray(points, dtype=complex)
    if check and w.size and np.abs(w).max() > 1.0 + 1e-6:
        raise PointOutsideReferenceDisk(f"max |w| = {np.abs(w).max():.6f} exceeds 1")
    if isinstance(domain, DiskDomain):
        return domain.center + domain.radius * w
    if isinstance(domain, QuadratureDomain) and domain.m == 1:
        return domain.d0 + domain.d1 + domain.rho * w
    if isinstance(domain, EllipseDomain):
        a, b = domain.semi_axes
        return 1j * domain.y0 + a * w.real + 1j * b * w.imag
    raise TypeError(f"no affine unit-disk map onto {type(domain).__name__}")


def uniform_domain_sample(domain: Domain, n: int, seed: int) -> np.ndarray:
    """``n`` independent uniform points by rejection from the bounding box."""
    rng = make_rng(seed)
    x0, x1, y0, y1 = domain.bounding_box()
    out = np.empty(0, dtype=complex)
    while out.size < n:
        batch = max(64, 2 * (n - out.size))
        cand = rng.uniform(x0, x1, batch) + 1j * rng.uniform(y0, y1, batch)
        out = np.concatenate([out, cand[domain.contains(cand)]])
    return out[:n]


def _radial_count(n: int) -> int:
    # aim for square cells (n_ang ~ 2 pi n_rad); prefer a divisor of n so that
    # every angular cell holds the same number of nodes
    target = math.sqrt(n / (2 * math.pi))
    divisors = [d for d in range(1, n + 1) if n % d == 0 and target / 1.5 <= d <= 1.5 * target]
    if divisors:
        return min(divisors, key=lambda d: abs(math.log(d / target)))
    return max(1, int(round(target)))


def stratified_domain_sample(domain: Domain, n: int) -> np.ndarray:
    """Deterministic equal-area nodes for a domain star-shaped about its centre.

    In polar coordinates about the centre the area element is uniform in
    ``(r^2, angle)``. Angular cells carry equal mass per node; within a cell
    the nodes sit at the midpoints of ``r^2``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    center = domain.polar_center()
    n_rad = _radial_count(n)
    n_ang = max(1, n // n_rad)
    counts = np.full(n_ang, n // n_ang)
    counts[: n - counts.sum()] += 1
    fine = 64 * n_ang
    ang = 2 * np.pi * (np.arange(fine) + 0.5) / fine
    mass = np.cumsum(domain.polar_radius(ang) ** 2)
    mass = np.concatenate([[0.0], mass / mass[-1]])
    grid_ang = 2 * np.pi * np.arange(fine + 1) / fine
    edges = np.concatenate([[0.0], np.cumsum(counts) / n])
    mids = 0.5 * (edges[:-1] + edges[1:])
    cell_angles = np.interp(mids, mass, grid_ang)
    pts = []
    for a, k in zip(cell_angles, counts):
        rr = domain.polar_radius(a) * np.sqrt((np.arange(k) + 0.5) / k)
        pts.append(center + rr * np.exp(1j * a))
    return np.concatenate(pts)


def norming_constants(points, area: float, density: DensitySpec, n: int | None = None) -> ScatteringData:
    """Pair each pole with ``area * beta(z_j) / (pi N)``."""
    z = np.asarray(points, dtype=complex)
    n = len(z) if n is None else n
    c = area * np.asarray(eval_density(density, z)) / (math.pi * n)
    return ScatteringData(z, c)


def write_points_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im"])
        for p in np.asarray(points, dtype=complex):
            w.writerow([format(p.real + 0.0, ".17g"), format(p.imag + 0.0, ".17g")])


def read_points_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] == ["re", "im"]:
        rows = rows[1:]
    return np.array([complex(float(a), float(b)) for a, b in rows], dtype=complex)
