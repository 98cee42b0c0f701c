"""Frequency-domain stability toolkit over the nodal admittance model.

Four instruments, all driven by the same network description:

- Generalized Nyquist: eigenloci of the loop gain L(s) = Z_net(s) Y_a(s),
  tracked continuously in frequency; the interconnection is stable iff
  the loci do not encircle (-1, 0), assuming both subsystems are
  standalone stable (asserted by the caller, not verified here).
- Participation factors of the critical (smallest-modulus) eigenvalue of
  Y_n(s), from the left/right eigenvector product with psi Phi = I.
- The compensation coefficient xi = -tr(adj(Y_n)) / det'(Y_n) that turns
  critical-eigenvalue sensitivities into mode sensitivities
  d lambda / d Y_n[i, j] = xi * P[i, j].
- Muller iteration on det Y_n(s) to refine system modes (zeros of the
  determinant), plus a seeded scan that harvests distinct modes from a
  region of the complex plane.

Winding numbers come from summed principal-value angle increments around
(-1, 0) along the positive-frequency sweep; the negative-frequency half
is its conjugate mirror and contributes the same total, and the two
junction segments (near omega = 0 and at the sweep end) are closed
analytically.  Any ambiguity (angle jump near pi, large displacement
close to the critical point, or a winding sum far from an integer)
raises RefineGrid instead of guessing.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._parallel import parallel_map
from .errors import (
    DefectiveMatrixError,
    NoConvergenceError,
    NonFiniteError,
    OutOfRegionError,
    RefineGridError,
    SingularMatrixError,
    ZeroDenominatorError,
)
from .network import Network, assemble_devices, assemble_net, assemble_nodal
from .numerics import adjugate, determinant, general_eigen, inverse, trace
from .passivity import log_omega_grid

CRITICAL = -1.0 + 0.0j

# A mode counts as unstable when its real part clears this fraction of
# omega_b; far below physical damping scales, far above eigenvalue noise.
UNSTABLE_RE_RTOL = 1e-6


def loop_gain(network: Network, s: complex) -> np.ndarray:
    """L = Z_net Y_a; raises SingularMatrixError at a network resonance."""
    return inverse(assemble_net(network, s)) @ assemble_devices(network, s)


@dataclass(frozen=True, eq=False)
class LoopGainLoci:
    """Eigenvalues of L(j omega) matched into continuous tracks."""

    omegas: np.ndarray  # ascending, rad/s
    loci: np.ndarray    # (n_tracks, n_freqs) complex


@dataclass(frozen=True)
class GncVerdict:
    """Winding count of all loci around (-1, 0) and the verdict it implies."""

    encirclements: int
    stable: bool
    winding_float: float          # pre-rounding sum; far from integer => RefineGrid
    min_critical_distance: float  # closest approach of any locus to (-1, 0)


def _match_tracks(prev: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """Index permutation aligning nxt to the tracks ending at prev.

    Greedy nearest-neighbor; falls back to a minimal-total-displacement
    assignment when greedy collides or two candidates are closer than
    half the minimum inter-eigenvalue spacing.
    """
    m = prev.size
    dist = np.abs(prev[:, None] - nxt[None, :])
    choice = np.argmin(dist, axis=1)
    ambiguous = len(set(choice.tolist())) != m
    if not ambiguous and m > 1:
        sep = np.abs(nxt[:, None] - nxt[None, :])
        np.fill_diagonal(sep, np.inf)
        ranked = np.sort(dist, axis=1)
        ambiguous = bool(np.any(ranked[:, 1] - ranked[:, 0] < 0.5 * sep.min()))
    if ambiguous:
        rows, cols = linear_sum_assignment(dist)
        choice = cols[np.argsort(rows)]
    return choice


def _track_loci(per_freq: list[np.ndarray]) -> np.ndarray:
    m = per_freq[0].size
    loci = np.empty((m, len(per_freq)), dtype=complex)
    loci[:, 0] = per_freq[0]
    for k in range(1, len(per_freq)):
        loci[:, k] = per_freq[k][_match_tracks(loci[:, k - 1], per_freq[k])]
    return loci


def gnc(network: Network, omegas) -> tuple[LoopGainLoci, GncVerdict]:
    """Generalized Nyquist verdict on a fixed positive-frequency grid.

    Raises RefineGrid when the grid is too coarse to count windings
    unambiguously; see gnc_auto for self-refining behavior.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or omegas.size < 2:
        raise ValueError("need an ascending grid of at least 2 frequencies")
    if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
        raise ValueError("frequencies must be positive and strictly increasing")

    per_freq = parallel_map(
        lambda w: general_eigen(loop_gain(network, 1j * w)).values, omegas
    )
    loci = _track_loci(per_freq)

    rel = loci - CRITICAL
    dist = np.abs(rel)
    min_dist = float(dist.min())
    if min_dist == 0.0:
        raise RefineGridError("an eigenlocus sample hit (-1, 0) exactly")

    # Grid-density guard near the critical point.
    step = np.abs(np.diff(loci, axis=1))
    near = np.minimum(dist[:, :-1], dist[:, 1:])
    coarse = (near < 1.0) & (step >= 0.25 * near)
    if np.any(coarse):
        k = int(np.argwhere(coarse.any(axis=0))[0][0])
        raise RefineGridError(
            f"eigenlocus displacement exceeds a quarter of the distance to (-1, 0) "
            f"between omega={omegas[k]:.6g} and omega={omegas[k + 1]:.6g} rad/s"
        )

    angles = np.angle(rel[:, 1:] / rel[:, :-1])
    if np.any(np.abs(angles) > 0.95 * math.pi):
        k = int(np.argwhere((np.abs(angles) > 0.95 * math.pi).any(axis=0))[0][0])
        raise RefineGridError(
            f"angle increment around (-1, 0) near pi between "
            f"omega={omegas[k]:.6g} and omega={omegas[k + 1]:.6g} rad/s"
        )

    # Conjugate closure: the negative-frequency mirror repeats the swept
    # total, and the junction segments contribute the angle between each
    # endpoint and its conjugate; both halves fold into a division by pi.
    swept = float(angles.sum())
    junction = float(np.angle(rel[:, 0]).sum() - np.angle(rel[:, -1]).sum())
    winding_float = (swept + junction) / math.pi
    encirclements = round(winding_float)
    if abs(winding_float - encirclements) > 0.25:
        raise RefineGridError(
            f"winding sum {winding_float:.3f} is not close to an integer; "
            f"the sweep span or density is insufficient"
        )

    verdict = GncVerdict(
        encirclements=encirclements,
        stable=(encirclements == 0),
        winding_float=winding_float,
        min_critical_distance=min_dist,
    )
    return LoopGainLoci(omegas=omegas, loci=loci), verdict


def gnc_auto(
    network: Network,
    f_min_hz: float = 1e-2,
    f_max_hz: float = 1e4,
    points: int = 800,
    max_doublings: int = 6,
) -> tuple[LoopGainLoci, GncVerdict]:
    """GNC on a log grid, doubling the density until the winding count is
    unambiguous; re-raises RefineGrid if the cap is hit."""
    last: RefineGridError | None = None
    for level in range(max_doublings + 1):
        try:
            return gnc(network, log_omega_grid(f_min_hz, f_max_hz, points * 2 ** level))
        except RefineGridError as exc:
            last = exc
    raise last


@dataclass(frozen=True, eq=False)
class FdParticipation:
    """Participation factors of the critical eigenvalue of Y_n(s).

    matrix[i, j] = psi_c[i] * phi_c[j] with psi the left eigenvector row
    normalized by psi Phi = I; its diagonal sums to 1.  tied_with lists
    other eigenvalues whose modulus matches the critical one within
    tolerance; a tie is reported, never silently resolved.
    """

    s: complex
    eigenvalues: np.ndarray
    critical_index: int
    tied_with: tuple[int, ...]
    matrix: np.ndarray  # (2N, 2N) complex

    @property
    def critical_value(self) -> complex:
        return complex(self.eigenvalues[self.critical_index])

    def bus_block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def diagonal_by_bus(self) -> np.ndarray:
        n = self.matrix.shape[0] // 2
        return np.array([np.trace(self.bus_block(k, k)) for k in range(n)])


def fd_pf(network: Network, s: complex) -> FdParticipation:
    """Participation factors at any complex frequency (s = j omega for a
    frequency reading, s = lambda for a full-modal reading)."""
    eig = general_eigen(assemble_nodal(network, s))
    if eig.defective:
        raise DefectiveMatrixError(
            f"nodal admittance eigenvectors are numerically defective at s={s:.6g}"
        )
    mods = np.abs(eig.values)
    c = int(np.argmin(mods))
    scale = float(mods.max())
    tol = 1e-6 * (scale if scale > 0 else 1.0)
    tied = tuple(int(k) for k in np.flatnonzero(mods - mods[c] <= tol) if k != c)
    p = np.outer(eig.left[c, :], eig.right[:, c])
    return FdParticipation(
        s=complex(s),
        eigenvalues=eig.values,
        critical_index=c,
        tied_with=tied,
        matrix=p,
    )


def _det_nodal(network: Network, s: complex) -> complex:
    return determinant(assemble_nodal(network, s))


def _try_det(network: Network, s: complex) -> complex | None:
    """det Y_n(s), or None where it is not evaluable (device poles make
    det meromorphic; an exact pole hit raises deep in a model)."""
    try:
        val = _det_nodal(network, s)
    except (ZeroDivisionError, SingularMatrixError, ValueError):
        return None
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        return None
    return val


def _det_nudged(network: Network, s: complex, span: float) -> tuple[complex, complex] | None:
    """Evaluate det Y_n at s, stepping off non-evaluable points.

    Returns (point actually used, value) or None when a small
    neighborhood is not evaluable either.
    """
    x = complex(s)
    for attempt in range(4):
        val = _try_det(network, x)
        if val is not None:
            return x, val
        x = complex(s) + span * 1e-3 * (attempt + 1) * complex(1.0, 1.0)
    return None


def xi_coefficient(network: Network, lam: complex, omega_b: float) -> complex:
    """xi = -tr(adj(Y_n(lambda))) / det'(lambda).

    The determinant derivative uses central differences with step
    h = 1e-6 * max(|lambda|, omega_b) and one Richardson level.
    """
    h = 1e-6 * max(abs(lam), omega_b)

    def quotient(step: float) -> tuple[complex, float]:
        fp = _det_nodal(network, lam + step)
        fm = _det_nodal(network, lam - step)
        return (fp - fm) / (2.0 * step), max(abs(fp), abs(fm))

    d_h, m1 = quotient(h)
    d_h2, m2 = quotient(h / 2.0)
    d = (4.0 * d_h2 - d_h) / 3.0
    scale = max(m1, m2) / h
    if abs(d) < 1e-14 * max(scale, 1e-300):
        raise ZeroDenominatorError(
            f"determinant derivative vanishes at lambda={lam:.6g}; xi undefined"
        )
    return -trace(adjugate(assemble_nodal(network, lam))) / d


def mode_admittance_sensitivity(network: Network, lam: complex, omega_b: float) -> np.ndarray:
    """Entrywise mode sensitivity d lambda / d Y_n[i, j] = xi * P[i, j],
    evaluated full-modally at a refined mode lambda."""
    xi = xi_coefficient(network, lam, omega_b)
    return xi * fd_pf(network, lam).matrix


@dataclass(frozen=True)
class ModeEstimate:
    """One refined zero of det Y_n(s)."""

    lam: complex       # rad/s
    residual: float    # |det Y_n(lam)|
    converged: bool
    iterations: int

    @property
    def frequency_hz(self) -> float:
        return abs(self.lam.imag) / (2.0 * math.pi)


def _in_region(s: complex, region) -> bool:
    re_lo, re_hi, im_lo, im_hi = region
    return re_lo <= s.real <= re_hi and im_lo <= s.imag <= im_hi


def refine_mode(
    network: Network,
    s0: complex,
    omega_b: float,
    region=None,
    max_iterations: int = 100,
) -> ModeEstimate:
    """Muller iteration on det Y_n(s) from seed s0.

    region, when given, is (re_min, re_max, im_min, im_max); iterates
    leaving it raise OutOfRegion.  Converged means the step shrank to
    1e-9 * max(|s|, omega_b) and the residual is small against the
    largest determinant magnitude seen during the search.
    """
    if region is not None and not _in_region(complex(s0), region):
        raise OutOfRegionError(f"seed {s0:.6g} outside the search region")

    d = 1e-4 * max(abs(s0), omega_b)
    xs, fs = [], []
    for seed in (complex(s0) - d, complex(s0) + d, complex(s0)):
        got = _det_nudged(network, seed, d)
        if got is None:
            raise NoConvergenceError(
                f"determinant not evaluable near seed {s0:.6g}", partial=None
            )
        xs.append(got[0])
        fs.append(got[1])
    fscale = max(max(abs(f) for f in fs), 1e-300)

    x2 = xs[2]
    for it in range(1, max_iterations + 1):
        (x0, x1, x2), (f0, f1, f2) = xs, [f / fscale for f in fs]
        if x1 == x0 or x2 == x1:
            step = d * (1 + it)
            x3 = x2 + step
        else:
            q = (x2 - x1) / (x1 - x0)
            a = q * f2 - q * (1 + q) * f1 + q * q * f0
            b = (2 * q + 1) * f2 - (1 + q) ** 2 * f1 + q * q * f0
            c = (1 + q) * f2
            disc = cmath.sqrt(b * b - 4 * a * c)
            den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
            if den == 0:
                x3 = x2 + (x2 - x1)
            else:
                x3 = x2 - (x2 - x1) * (2 * c / den)
        if not (math.isfinite(x3.real) and math.isfinite(x3.imag)):
            raise NonFiniteError("Muller iterate became non-finite")
        if region is not None and not _in_region(x3, region):
            raise OutOfRegionError(
                f"iterate {x3:.6g} left the search region after {it} iterations"
            )
        got = _det_nudged(network, x3, max(abs(x3 - x2), d))
        if got is None:
            partial = ModeEstimate(lam=x2, residual=abs(fs[2]), converged=False,
                                   iterations=it)
            raise NoConvergenceError(
                f"determinant not evaluable near iterate {x3:.6g}", partial=partial
            )
        x3, f3 = got
        fscale = max(fscale, abs(f3))
        xs = [x1, x2, x3]
        fs = [fs[1], fs[2], f3]
        if abs(x3 - x2) <= 1e-9 * max(abs(x3), omega_b):
            residual = abs(f3)
            return ModeEstimate(
                lam=x3,
                residual=residual,
                converged=(residual <= 1e-8 * fscale),
                iterations=it,
            )
    partial = ModeEstimate(lam=xs[2], residual=abs(fs[2]), converged=False,
                           iterations=max_iterations)
    raise NoConvergenceError(
        f"Muller did not converge from seed {s0:.6g} in {max_iterations} iterations",
        partial=partial,
    )


@dataclass(frozen=True)
class ModeScan:
    """Distinct converged modes harvested from a seeded region scan."""

    modes: tuple[ModeEstimate, ...]
    unstable: bool


def mode_scan(
    network: Network,
    omega_b: float,
    re_range: tuple[float, float] = (-500.0, 200.0),
    im_range: tuple[float, float] = (0.0, 2.0 * math.pi * 500.0),
    n_re: int = 7,
    n_im: int = 11,
) -> ModeScan:
    """Refine modes from a rectangular seed grid (upper half-plane; the
    conjugate partners are implied) and deduplicate the results.

    Seeds that fail to converge or wander off are dropped; the scan is a
    coverage tool, not a completeness proof.
    """
    re_lo, re_hi = re_range
    im_lo, im_hi = im_range
    pad_re = 0.2 * (re_hi - re_lo) + omega_b
    pad_im = 0.2 * (im_hi - im_lo) + omega_b
    region = (re_lo - pad_re, re_hi + pad_re, im_lo - pad_im, im_hi + pad_im)

    found: list[ModeEstimate] = []
    for sig in np.linspace(re_lo, re_hi, n_re):
        for omg in np.linspace(im_lo, im_hi, n_im):
            try:
                est = refine_mode(network, complex(sig, omg), omega_b, region=region)
            except (NoConvergenceError, OutOfRegionError):
                continue
            if not est.converged:
                continue
            if est.lam.imag < 0:
                # real-coefficient models: fold onto the implied conjugate
                est = ModeEstimate(lam=est.lam.conjugate(), residual=est.residual,
                                   converged=est.converged, iterations=est.iterations)
            dup = any(
                abs(est.lam - kept.lam) <= 1e-6 * max(abs(est.lam), omega_b)
                for kept in found
            )
            if not dup:
                found.append(est)
    unstable = any(m.lam.real > UNSTABLE_RE_RTOL * omega_b for m in found)
    return ModeScan(modes=tuple(found), unstable=unstable)
