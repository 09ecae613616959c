"""Exact N-soliton fields from discrete scattering data.

The rational matrix ``Y(z) = I + sum A_j/(z - z_j) + sum B_j/(z - conj(z_j))``
is fixed by the residue conditions at the poles. Substituting the ansatz turns
them into a 2N x 2N complex linear system for ``g_j`` and ``conj(f_j)``:

    g_j     - gamma_j       * sum_l conj(f_l) / (z_j - conj(z_l)) = gamma_j
    conj(f_k) + conj(gamma_k) * sum_l g_l / (conj(z_k) - z_l)     = 0

with ``gamma_j = c_j exp(2 theta(z_j; x, t))`` and ``psi = -2i sum_j conj(g_j)``.

For clustered spectra the gammas span many decades once ``x`` is negative and
the literal system becomes hopelessly ill conditioned. By default the solver
therefore works with ``W = Y diag(b, 1/b)``, where ``b(z) = prod_F (z - z_k)/(z - conj(z_k))``
runs over a subset F of "flipped" poles. For a flipped pole the residue sits in
the other column and its effective constant is ``1/(gamma_j b'(z_j)^2)``;
unflipped constants become ``gamma_j b(z_j)^2``. F is picked greedily so that
every effective constant satisfies ``|kappa_j| <= 2 Im z_j``. Each greedy toggle
increases the dominant principal-minor term of the tau-function expansion, so
the search terminates. With F empty the literal system is recovered exactly,
and ``psi`` and ``Y`` are unchanged because ``b -> 1`` at infinity.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (
    GridTooSmall,
    NonUniformGrid,
    PoleTooClose,
    SingularSystem,
    ZeroConstant,
)
from .types import EvaluationPoint, Grid, ScatteringData

COND_LIMIT = 1e12
POLE_MIN_DISTANCE = 1e-8
_METHODS = ("full", "reduced")


def theta(z, x, t):
    """``i (z^2 t + z x)``; broadcasts over arrays."""
    return 1j * (z * z * t + z * x)


@dataclass(frozen=True)
class SolveDiagnostics:
    condition_estimate: float
    linear_residual: float
    n: int
    flipped: int = 0

    @staticmethod
    def worst(items) -> "SolveDiagnostics":
        items = list(items)
        return SolveDiagnostics(
            condition_estimate=max(d.condition_estimate for d in items),
            linear_residual=max(d.linear_residual for d in items),
            n=items[0].n,
            flipped=max(d.flipped for d in items),
        )


@dataclass(frozen=True)
class MatrixY:
    entries: np.ndarray

    @property
    def det(self) -> complex:
        e = self.entries
        return complex(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])

    def __getitem__(self, idx):
        return self.entries[idx]


@dataclass(frozen=True)
class FieldSample:
    grid: Grid
    psi: np.ndarray  # indexed [t][x]
    diagnostics: SolveDiagnostics

    def __post_init__(self):
        if self.psi.shape != self.grid.shape:
            raise ValueError(f"psi has shape {self.psi.shape}, grid is {self.grid.shape}")

    def rows(self):
        for i, t in enumerate(self.grid.t_values):
            for j, x in enumerate(self.grid.x_values):
                v = complex(self.psi[i, j])
                yield (float(x), float(t), v.real, v.imag, abs(v))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "t", "re_psi", "im_psi", "abs_psi"])
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    # +0.0 folds negative zero
    return format(float(v) + 0.0, ".17g")


class SolitonParams(NamedTuple):
    a: float
    b: float
    x0: float
    phi0: float


class _Kernel:
    """Pole-only matrices shared by every (x, t) solve of one spectrum."""

    def __init__(self, data: ScatteringData):
        z = data.z
        self.data = data
        self.z = z
        self.n = len(z)
        zb = np.conj(z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        cross = z[:, None] - zb[None, :]
        self.P = 1.0 / cross  # 1/(z_j - conj z_l)
        self.Q = 1.0 / diff  # 1/(z_j - z_l), diagonal unused
        np.fill_diagonal(self.Q, 0.0)
        log_ratio = np.log(diff) - np.log(cross)
        np.fill_diagonal(log_ratio, 0.0)
        self.log_ratio = log_ratio
        self.log_ratio_abs = log_ratio.real.copy()
        self.log_two_im = np.log(2.0 * z.imag)
        self.log_z_minus_zbar = np.log(z - zb)
        with np.errstate(divide="ignore"):
            self.log_c = np.log(data.c)

    def log_gamma(self, x: float, t: float) -> np.ndarray:
        return self.log_c + 2.0 * theta(self.z, x, t)

    def choose_flips(self, log_gamma: np.ndarray) -> np.ndarray:
        n = self.n
        flipped = np.zeros(n, dtype=bool)
        base = log_gamma.real - self.log_two_im
        acc = np.zeros(n)
        for _ in range(20 * n + 10):
            q = base + acc
            q = np.where(flipped, -q, q)
            j = int(np.argmax(q))
            if not q[j] > 1e-12:
                break
            flipped[j] = not flipped[j]
            sign = 2.0 if flipped[j] else -2.0
            acc += sign * self.log_ratio_abs[:, j]
        return flipped

    def system(self, x: float, t: float, flip: bool = True):
        lg = self.log_gamma(x, t)
        F = self.choose_flips(lg) if flip else np.zeros(self.n, dtype=bool)
        if F.any():
            lb = self.log_ratio[:, F].sum(axis=1)
            log_k = np.where(F, -(lg + 2.0 * (lb - self.log_z_minus_zbar)), lg + 2.0 * lb)
            Fj, Fl = F[:, None], F[None, :]
            C1 = np.where(Fj, np.where(Fl, np.conj(self.P), np.conj(self.Q)),
                          np.where(Fl, self.Q, self.P))
        else:
            log_k = lg
            C1 = self.P
        with np.errstate(under="ignore"):
            kappa = np.exp(log_k)
        kp = np.where(F, np.conj(kappa), kappa)
        mu = np.where(F, -kappa, np.conj(kappa))
        s = np.where(F, -1.0, 1.0)
        upper = kp[:, None] * C1  # couples a_j to b_l
        lower = (mu[:, None] * np.conj(C1)) * s[None, :]  # couples b_j to a_l
        return F, kp, upper, lower, s

    def solve(self, x: float, t: float, method: str = "full", flip: bool = True):
        """Return (a, b, F, s, diagnostics) for the (possibly flipped) system."""
        if method not in _METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {_METHODS}")
        F, kp, upper, lower, s = self.system(x, t, flip)
        n = self.n
        if method == "full":
            A = np.eye(2 * n, dtype=complex)
            A[:n, n:] = -upper
            A[n:, :n] = lower
            rhs = np.concatenate([kp, np.zeros(n, dtype=complex)])
        else:
            A = np.eye(n, dtype=complex) + upper @ lower
            rhs = kp.astype(complex)
        sol, diag = _lu_solve_monitored(A, rhs, x, t)
        if method == "full":
            a, b = sol[:n], sol[n:]
        else:
            a = sol
            b = -(lower @ a)
        return a, b, F, s, SolveDiagnostics(diag[0], diag[1], n, int(F.sum()))


def _lu_solve_monitored(A: np.ndarray, rhs: np.ndarray, x, t):
    anorm = float(np.abs(A).sum(axis=1).max())
    try:
        lu, piv = sla.lu_factor(A, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - LAPACK failure
        raise SingularSystem(f"LU factorisation failed: {exc}", x=x, t=t) from exc
    rcond, info = lapack.zgecon(lu, anorm, norm="I")
    cond = math.inf if rcond == 0 else max(1.0, 1.0 / rcond)
    if info != 0 or not math.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystem(
            f"condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e} at x={x}, t={t}",
            condition=cond, x=x, t=t,
        )
    sol = sla.lu_solve((lu, piv), rhs, check_finite=False)
    sol = sol + sla.lu_solve((lu, piv), rhs - A @ sol, check_finite=False)
    r = rhs - A @ sol
    denom = anorm * float(np.abs(sol).max(initial=0.0)) + float(np.abs(rhs).max(initial=0.0))
    resid = float(np.abs(r).max()) / denom if denom > 0 else 0.0
    return sol, (cond, resid)


def _psi_from(a: np.ndarray, s: np.ndarray) -> complex:
    return complex(-2j * np.conj(np.sum(s * a)))


def evaluate_psi(data: ScatteringData, at: EvaluationPoint, method: str = "full",
                 flip: bool = True, _kernel: _Kernel | None = None):
    """psi_N at one point, with solver diagnostics.

    ``flip=False`` solves the literal residue system (no pole flipping); it is
    only reliable while every ``|c_j exp(2 theta_j)|`` stays moderate.
    """
    kernel = _kernel or _Kernel(data)
    a, _, _, s, diag = kernel.solve(float(at.x), float(at.t), method, flip)
    return _psi_from(a, s), diag


def evaluate_field(data: ScatteringData, grid: Grid, method: str = "full",
                   flip: bool = True, workers: int | None = None) -> FieldSample:
    kernel = _Kernel(data)
    pts = [(i, j, float(t), float(x))
           for i, t in enumerate(grid.t_values)
           for j, x in enumerate(grid.x_values)]

    def one(p):
        _, _, t, x = p
        a, _, _, s, diag = kernel.solve(x, t, method, flip)
        return _psi_from(a, s), diag

    if workers and workers > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pts))
    else:
        results = [one(p) for p in pts]
    psi = np.empty(grid.shape, dtype=complex)
    for (i, j, _, _), (v, _) in zip(pts, results):
        psi[i, j] = v
    return FieldSample(grid, psi, SolveDiagnostics.worst(d for _, d in results))


def evaluate_Y(data: ScatteringData, at: EvaluationPoint, z: complex,
               method: str = "full", flip: bool = True) -> MatrixY:
    z = complex(z)
    poles = data.z
    dist = min(np.abs(z - poles).min(), np.abs(z - np.conj(poles)).min())
    if dist <= POLE_MIN_DISTANCE:
        raise PoleTooClose(f"z={z} is within {dist:.2e} of a pole")
    kernel = _Kernel(data)
    a, bvec, F, _, _ = kernel.solve(float(at.x), float(at.t), method, flip)
    U = ~F
    r_pole = 1.0 / (z - poles)
    r_conj = 1.0 / (z - np.conj(poles))
    # unflipped: g = a, conj(f) = b ; flipped: conj(p) = a, q = b
    col1 = np.array([
        1.0 + np.sum(np.conj(bvec[U]) * r_pole[U]) + np.sum(np.conj(bvec[F]) * r_conj[F]),
        np.sum(a[U] * r_pole[U]) - np.sum(a[F] * r_conj[F]),
    ])
    col2 = np.array([
        -np.sum(np.conj(a[U]) * r_conj[U]) + np.sum(np.conj(a[F]) * r_pole[F]),
        1.0 + np.sum(bvec[U] * r_conj[U]) + np.sum(bvec[F] * r_pole[F]),
    ])
    blaschke = np.prod((z - poles[F]) * r_conj[F]) if F.any() else 1.0
    entries = np.column_stack([col1 / blaschke, col2 * blaschke])
    return MatrixY(entries)


def one_soliton_field(a, b, x0, phi0, x, t):
    """Vectorised one-soliton profile; see :func:`one_soliton_closed_form`."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    arg = 2.0 * b * (x + 2.0 * a * t - x0)
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(arg)
    phase = np.exp(-2j * (a * x + (a * a - b * b) * t + 0.5 * phi0))
    return 2.0 * b * sech * phase


def one_soliton_closed_form(a: float, b: float, x0: float, phi0: float,
                            at: EvaluationPoint) -> complex:
    """``2b sech(2b(x + 2at - x0)) exp(-2i(ax + (a^2 - b^2)t + phi0/2))``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return complex(one_soliton_field(a, b, x0, phi0, at.x, at.t))


def soliton_params_from_constant(z0: complex, c0: complex) -> SolitonParams:
    """Velocity, amplitude, peak position and phase of the pole/constant pair.

    The peak sits at ``ln(|c0| / 2b) / 2b``; this is the normalisation that
    matches the exact single-pole solve.
    """
    z0, c0 = complex(z0), complex(c0)
    if not z0.imag > 0:
        raise ValueError("z0 must lie in the upper half-plane")
    if c0 == 0:
        raise ZeroConstant("norming constant must be nonzero")
    a, b = z0.real, z0.imag
    x0 = math.log(abs(c0) / (2.0 * b)) / (2.0 * b)
    return SolitonParams(a, b, x0, math.pi / 2 + math.atan2(c0.imag, c0.real))


def _uniform_step(values: np.ndarray, name: str) -> float:
    d = np.diff(values)
    h = float(d.mean())
    if not np.allclose(d, h, rtol=1e-8, atol=0.0):
        raise NonUniformGrid(f"{name} spacing is not uniform")
    return h


def fnls_residual(field: FieldSample, interior_margin=1) -> float:
    """Max of ``|i psi_t + psi_xx / 2 + |psi|^2 psi|`` with central differences."""
    grid = field.grid
    nt, nx = grid.shape
    if nx < 5 or nt < 5:
        raise GridTooSmall(f"need at least 5 points per direction, got {nt} x {nx}")
    mx, mt = (interior_margin, interior_margin) if np.isscalar(interior_margin) else interior_margin
    mx, mt = max(int(mx), 1), max(int(mt), 1)
    if 2 * mx >= nx or 2 * mt >= nt:
        raise GridTooSmall("interior margin leaves no interior points")
    hx = _uniform_step(grid.x_values, "x")
    ht = _uniform_step(grid.t_values, "t")
    u = field.psi
    core = u[1:-1, 1:-1]
    dt = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * ht)
    dxx = (u[1:-1, 2:] - 2.0 * core + u[1:-1, :-2]) / (hx * hx)
    res = np.abs(1j * dt + 0.5 * dxx + np.abs(core) ** 2 * core)
    res = res[mt - 1: res.shape[0] - (mt - 1), mx - 1: res.shape[1] - (mx - 1)]
    return float(res.max())
