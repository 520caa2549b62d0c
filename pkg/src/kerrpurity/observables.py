"""State functionals: excitation, purity, entropies and the Wigner function."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

EIG_FLOOR = 1e-14


class GridTooCoarse(UserWarning):
    """Wigner grid does not integrate to one within tolerance."""


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    excitation: float
    purity: float
    linear_entropy: float
    von_neumann: float

    @classmethod
    def of(cls, rho, t):
        p = purity(rho)
        _, s = entropies(rho)
        return cls(float(t), excitation(rho), p, 1.0 - p, s)


FIELDS = ("t", "excitation", "purity", "linear_entropy", "von_neumann")


def purity(rho) -> float:
    """Tr(rho^2)."""
    # Tr(rho rho) = sum_ij rho_ij rho_ji
    p = np.sum(rho * rho.T)
    if abs(p.imag) > 1e-12 * max(1.0, abs(p.real)):
        raise ValueError(f"purity has imaginary part {p.imag:.3e}; rho is not Hermitian")
    return float(p.real)


def excitation(rho) -> float:
    """Mean number <a'a> = Tr(rho a'a)."""
    return float(np.real(np.diagonal(rho) @ np.arange(rho.shape[0])))


def entropies(rho):
    """Linear entropy 1 - Tr(rho^2) and von Neumann entropy -Tr(rho ln rho)."""
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    lam = lam[lam > EIG_FLOOR]
    return 1.0 - purity(rho), float(-np.sum(lam * np.log(lam)))


def thermal_purity_oracle(nbar: float) -> float:
    return 1.0 / (2.0 * nbar + 1.0)


def thermal_populations(nbar: float, dim: int) -> np.ndarray:
    """Bose-Einstein occupations nbar^n / (nbar+1)^(n+1), n < dim (not renormalized)."""
    n = np.arange(dim)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(nbar) - (n + 1) * math.log1p(nbar))


def thermal_purity_series(nbar: float, tol: float = 1e-12) -> float:
    """Sum of squared thermal occupations, term by term until the tail is below ``tol``."""
    if nbar == 0:
        return 1.0
    total, n = 0.0, 0
    q = nbar / (nbar + 1.0)
    while True:
        term = (q ** n / (nbar + 1.0)) ** 2
        total += term
        n += 1
        # remaining geometric tail = term * q^2 / (1 - q^2)
        if term * q * q / (1.0 - q * q) < tol:
            return total


def thermal_state(nbar: float, dim: int) -> np.ndarray:
    return np.diag(thermal_populations(nbar, dim)).astype(complex)


def trace_distance(rho1, rho2) -> float:
    """0.5 * Tr|rho1 - rho2|."""
    d = rho1 - rho2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def density_matrix_errors(rho):
    """(hermiticity error, trace error, smallest eigenvalue) of a candidate state."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(abs(np.trace(rho) - 1.0))
    lam_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return herm, tr, lam_min


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

@dataclass
class WignerGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    values: np.ndarray  # shape (nx, ny); values[i, j] = W(x_i, y_j)

    @property
    def xs(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y_min, self.y_max, self.ny)

    def normalization(self) -> float:
        dx = (self.x_max - self.x_min) / (self.nx - 1)
        dy = (self.y_max - self.y_min) / (self.ny - 1)
        return float(np.sum(self.values) * dx * dy)


def default_bounds(rho) -> float:
    """Half-width 2*sqrt(n_max)+3 where n_max is the largest Fock level with weight."""
    pops = np.real(np.diagonal(rho))
    occupied = np.nonzero(pops > 1e-8)[0]
    n_max = occupied[-1] if occupied.size else 0
    return 2.0 * math.sqrt(n_max) + 3.0


@lru_cache(maxsize=8)
def _displacement_generator(dim: int):
    """Eigenpairs of i(a' - a) and the parity signs linking +lambda to -lambda."""
    s = np.sqrt(np.arange(1, dim, dtype=float))
    # i(a' - a) is Hermitian tridiagonal with purely imaginary off-diagonals;
    # conjugating by diag(i^n) makes it real symmetric with off-diagonal s.
    from scipy.linalg import eigh_tridiagonal
    lam, w = eigh_tridiagonal(np.zeros(dim), s)
    v = (1j ** np.arange(dim))[:, None] * w
    # parity maps the eigenvector of lam_j onto that of -lam_j = lam_{dim-1-j}
    par = (-1.0) ** np.arange(dim)
    q = np.einsum("nj,n,nj->j", v.conj(), par, v[:, ::-1])
    if not np.allclose(np.abs(q), 1.0, atol=1e-8):
        raise RuntimeError("displacement generator spectrum is not paired")
    return lam, v, q


def _padded_dim(dim: int, rmax: float) -> int:
    return max(dim + 10, int(math.ceil((rmax + math.sqrt(dim) + 5.0) ** 2)))


def wigner(rho, x_bounds=None, y_bounds=None, nx: int = 61, ny: int = 61,
           method: str = "parity", pad_dim: int | None = None, check: bool = True) -> WignerGrid:
    """Wigner function on a rectangular grid of beta = x + i y.

    ``method="parity"`` evaluates (2/pi) Tr[P D(beta)^dag rho D(beta)] with the
    displacement exponentiated exactly in a padded Fock space (``pad_dim``,
    chosen from the grid extent when omitted). ``method="laguerre"`` uses the
    closed-form Fock matrix elements through a stable recursion.
    With this convention the vacuum peaks at 2/pi and W integrates to one.
    """
    rho = np.asarray(rho, dtype=complex)
    if x_bounds is None or y_bounds is None:
        r = default_bounds(rho)
        x_bounds = x_bounds or (-r, r)
        y_bounds = y_bounds or (-r, r)
    xs = np.linspace(x_bounds[0], x_bounds[1], nx)
    ys = np.linspace(y_bounds[0], y_bounds[1], ny)
    beta = xs[:, None] + 1j * ys[None, :]
    if method == "parity":
        values = _wigner_parity(rho, beta, pad_dim)
    elif method == "laguerre":
        values = _wigner_laguerre(rho, beta)
    else:
        raise ValueError(f"unknown Wigner method {method!r}")
    grid = WignerGrid(float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]), nx, ny, values)
    if check and nx > 1 and ny > 1:
        norm = grid.normalization()
        if not 0.97 <= norm <= 1.03:
            warnings.warn(f"Wigner grid integrates to {norm:.4f}; enlarge or refine the grid",
                          GridTooCoarse, stacklevel=2)
    return grid


def wigner_point(rho, beta: complex, method: str = "parity") -> float:
    rho = np.asarray(rho, dtype=complex)
    b = np.array([[complex(beta)]])
    if method == "parity":
        return float(_wigner_parity(rho, b, None)[0, 0])
    return float(_wigner_laguerre(rho, b)[0, 0])


def _wigner_parity(rho, beta, pad_dim):
    dim = rho.shape[0]
    rmax = float(np.max(np.abs(beta)))
    dp = pad_dim or _padded_dim(dim, rmax)
    lam, v, q = _displacement_generator(dp)
    vtop = v[:dim]
    zq = (vtop[:, ::-1] * q[::-1][None, :])
    m_idx = np.arange(dim)
    out = np.empty(beta.shape)
    for idx, b in np.ndenumerate(beta):
        r, theta = abs(b), np.angle(b)
        u = np.exp(1j * theta * m_idx)[:, None]
        # rows < dim of U V, and the same rows of U V E Q E^* (a signed reversal)
        bmat = u * vtop
        zmat = (u * zq) * np.exp(2j * r * lam)[None, :]
        val = np.sum(bmat.conj() * (rho @ zmat))
        out[idx] = (2.0 / math.pi) * val.real
    return out


def _wigner_laguerre(rho, beta):
    dim = rho.shape[0]
    a = beta
    wl = [np.exp(-2.0 * np.abs(a) ** 2) / math.pi]
    w = np.real(rho[0, 0]) * np.real(wl[0])
    for n in range(1, dim):
        wl.append(2.0 * a * wl[n - 1] / math.sqrt(n))
        w = w + 2.0 * np.real(rho[0, n] * wl[n])
    for m in range(1, dim):
        temp = wl[m].copy()
        wl[m] = (2.0 * np.conj(a) * temp - math.sqrt(m) * wl[m - 1]) / math.sqrt(m)
        w = w + np.real(rho[m, m] * wl[m])
        for n in range(m + 1, dim):
            temp2 = (2.0 * a * wl[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wl[n].copy()
            wl[n] = temp2
            w = w + 2.0 * np.real(rho[m, n] * wl[n])
    return 2.0 * w
