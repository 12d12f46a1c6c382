"""Truncated Fock x spin basis, Floquet unitary, spectra and continuation.

The basis is the Cartesian product of two-mode number states with a total
cutoff n_x + n_y <= N_t and a spin-1/2 factor, ordered by ascending
(N, n_x, sigma) with sigma = -1 before +1; the spin index is fastest, so a
state vector reshapes to (osc_dim, 2).  The truncated space is an exact
tensor product of the cut oscillator space with the spin space, which keeps
every propagator below exactly unitary.

One period applies exp(-i H0 tau) exp(-i lam q_x s_x) exp(-i lam q_y s_y)
with H0 diagonal in this basis (eigenphase -(omega (N+1) + delta m_sigma)).
The kick generators q_chi s_chi preserve the parity grading
sigma (-1)^N, so the Floquet operator is block diagonal over the two
parity sectors O (parity -1) and E (parity +1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from .errors import (DimensionMismatch, EigFailure, StepUnderflow)
from .model import ValidatedConfig

Axis = Literal["x", "y"]
SpinAxis = Literal["x", "y", "z"]

# spin-1/2 operators in the (sigma=-1, sigma=+1) ordering
SPIN_HALF = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
    "y": np.array([[0.0, 0.5j], [-0.5j, 0.0]], dtype=complex),
    "z": np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=complex),
}


@dataclass
class FockBasis:
    """Enumeration of (n_x, n_y, sigma) states with n_x + n_y <= n_t."""

    n_t: int
    n_x: np.ndarray = field(repr=False)
    n_y: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    osc_nx: np.ndarray = field(repr=False)
    osc_ny: np.ndarray = field(repr=False)

    def __init__(self, n_t: int):
        if n_t < 0:
            raise ValueError("n_t must be >= 0")
        self.n_t = int(n_t)
        osc = [(nx, total - nx) for total in range(n_t + 1) for nx in range(total + 1)]
        self.osc_nx = np.array([nx for nx, _ in osc], dtype=int)
        self.osc_ny = np.array([ny for _, ny in osc], dtype=int)
        self.n_x = np.repeat(self.osc_nx, 2)
        self.n_y = np.repeat(self.osc_ny, 2)
        self.sigma = np.tile(np.array([-1, 1]), len(osc))
        self._osc_index = {pair: k for k, pair in enumerate(osc)}
        self._kick_cache: dict = {}

    @property
    def dim(self) -> int:
        return self.n_x.size

    @property
    def osc_dim(self) -> int:
        return self.osc_nx.size

    @property
    def total(self) -> np.ndarray:
        return self.n_x + self.n_y

    @property
    def parity(self) -> np.ndarray:
        """Diagonal of the parity operator: sigma * (-1)^(n_x + n_y), exactly +/-1."""
        return self.sigma * np.where(self.total % 2 == 0, 1, -1)

    @property
    def parity_class(self) -> np.ndarray:
        """'O' where the parity eigenvalue is -1, 'E' where it is +1."""
        return np.where(self.parity < 0, "O", "E")

    def index(self, n_x: int, n_y: int, sigma: int) -> int:
        return 2 * self._osc_index[(n_x, n_y)] + (0 if sigma < 0 else 1)

    def osc_index(self, n_x: int, n_y: int) -> int:
        return self._osc_index[(n_x, n_y)]

    def entry(self, k: int) -> tuple[int, int, int]:
        return int(self.n_x[k]), int(self.n_y[k]), int(self.sigma[k])

    def entries(self) -> list[tuple[int, int, int]]:
        return [self.entry(k) for k in range(self.dim)]

    def sector_indices(self, sector: str) -> np.ndarray:
        value = -1 if sector == "O" else 1
        return np.flatnonzero(self.parity == value)

    def basis_state(self, n_x: int, n_y: int, sigma: int) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(n_x, n_y, sigma)] = 1.0
        return vec


def build_basis(n_t: int) -> FockBasis:
    return FockBasis(n_t)


@dataclass
class Operator:
    """Dense matrix over a FockBasis with property flags set by constructors."""

    matrix: np.ndarray
    hermitian: bool = False
    unitary: bool = False
    diagonal: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class QuantumState:
    """Normalised vector over a FockBasis."""

    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=complex)
        n = np.linalg.norm(self.vector)
        if not abs(n - 1.0) <= 1e-12:
            raise ValueError(f"state norm {n!r} is not 1 within 1e-12")

    @classmethod
    def normalized(cls, vector: np.ndarray) -> "QuantumState":
        vector = np.asarray(vector, dtype=complex)
        n = np.linalg.norm(vector)
        if n == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(vector / n)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def state_vector(state) -> np.ndarray:
    """Accept a QuantumState or a raw ndarray."""
    return np.asarray(getattr(state, "vector", state), dtype=complex)


# --- operator construction -------------------------------------------------

def osc_position_matrix(basis: FockBasis, axis: Axis) -> np.ndarray:
    """(a + a^dag)/sqrt(2) for one mode, over the cut oscillator basis."""
    mat = np.zeros((basis.osc_dim, basis.osc_dim))
    nx, ny = basis.osc_nx, basis.osc_ny
    for i in range(basis.osc_dim):
        n_own = nx[i] if axis == "x" else ny[i]
        up = (nx[i] + 1, ny[i]) if axis == "x" else (nx[i], ny[i] + 1)
        if up[0] + up[1] <= basis.n_t:
            j = basis.osc_index(*up)
            val = math.sqrt(n_own + 1) / math.sqrt(2.0)
            mat[i, j] = val
            mat[j, i] = val
    return mat


def osc_momentum_matrix(basis: FockBasis, axis: Axis) -> np.ndarray:
    """-i (a - a^dag)/sqrt(2) for one mode, over the cut oscillator basis."""
    mat = np.zeros((basis.osc_dim, basis.osc_dim), dtype=complex)
    nx, ny = basis.osc_nx, basis.osc_ny
    for i in range(basis.osc_dim):
        n_own = nx[i] if axis == "x" else ny[i]
        up = (nx[i] + 1, ny[i]) if axis == "x" else (nx[i], ny[i] + 1)
        if up[0] + up[1] <= basis.n_t:
            j = basis.osc_index(*up)
            val = math.sqrt(n_own + 1) / math.sqrt(2.0)
            mat[i, j] = -1j * val   # <n| p |n+1> for p = -i (a - a^dag)/sqrt(2)
            mat[j, i] = 1j * val
    return mat


def kron_osc_spin(osc_mat: np.ndarray, spin_mat: np.ndarray) -> np.ndarray:
    """Full-space matrix from oscillator and spin factors (spin index fastest)."""
    return np.kron(osc_mat, spin_mat)


def h0_phases(basis: FockBasis, cfg: ValidatedConfig) -> np.ndarray:
    """Diagonal of exp(-i H0 tau): entries exp(-i [omega (N+1) + delta sigma/2])."""
    angle = cfg.omega * (basis.total + 1) + cfg.delta * basis.sigma / 2.0
    return np.exp(-1j * angle)


@dataclass
class OperatorSet:
    """Dense operators over the full basis used by diagnostics and tests."""

    basis: FockBasis
    q_x: Operator
    q_y: Operator
    p_x: Operator
    p_y: Operator
    s_x: Operator
    s_y: Operator
    s_z: Operator
    h0_propagator: Operator
    parity: Operator


def build_operators(basis: FockBasis, cfg: ValidatedConfig) -> OperatorSet:
    eye2 = np.eye(2)
    eye_osc = np.eye(basis.osc_dim)
    ops = {}
    for axis in ("x", "y"):
        ops[f"q_{axis}"] = Operator(kron_osc_spin(osc_position_matrix(basis, axis), eye2),
                                    hermitian=True)
        ops[f"p_{axis}"] = Operator(kron_osc_spin(osc_momentum_matrix(basis, axis), eye2),
                                    hermitian=True)
    for axis in ("x", "y", "z"):
        ops[f"s_{axis}"] = Operator(kron_osc_spin(eye_osc, SPIN_HALF[axis]), hermitian=True)
    ops["h0_propagator"] = Operator(np.diag(h0_phases(basis, cfg)), unitary=True, diagonal=True)
    ops["parity"] = Operator(np.diag(basis.parity.astype(complex)),
                             hermitian=True, unitary=True, diagonal=True)
    return OperatorSet(basis=basis, **ops)


# --- kick propagators ------------------------------------------------------
#
# q_x changes n_x by one at fixed n_y, so under the total-number cut it is
# block diagonal over n_y (and vice versa).  Each block is diagonalised
# once per (n_t, axis) and reused for every coupling value.

def _kick_blocks(basis: FockBasis, axis: Axis):
    key = ("blocks", axis)
    cached = basis._kick_cache.get(key)
    if cached is not None:
        return cached
    other = basis.osc_ny if axis == "x" else basis.osc_nx
    own = basis.osc_nx if axis == "x" else basis.osc_ny
    blocks = []
    for fixed in range(basis.n_t + 1):
        idx = np.flatnonzero(other == fixed)
        idx = idx[np.argsort(own[idx])]
        size = idx.size
        sub = np.zeros((size, size))
        for k in range(size - 1):
            sub[k, k + 1] = sub[k + 1, k] = math.sqrt(k + 1) / math.sqrt(2.0)
        evals, evecs = np.linalg.eigh(sub)
        blocks.append((idx, evals, evecs))
    basis._kick_cache[key] = blocks
    return blocks


def _osc_kick_exponentials(basis: FockBasis, axis: Axis, lam: float,
                           spin_eigs: np.ndarray) -> list[np.ndarray]:
    """exp(-i lam s q_axis) over the oscillator space, one per spin eigenvalue."""
    blocks = _kick_blocks(basis, axis)
    out = []
    for s in spin_eigs:
        mat = np.zeros((basis.osc_dim, basis.osc_dim), dtype=complex)
        for idx, evals, evecs in blocks:
            phase = np.exp(-1j * lam * s * evals)
            mat[np.ix_(idx, idx)] = (evecs * phase) @ evecs.T
        out.append(mat)
    return out


def kick_propagator(axis: Axis, lam: float, basis: FockBasis,
                    spin_axis: SpinAxis | None = None) -> Operator:
    """exp(-i lam q_axis s_spin_axis), exactly unitary by construction.

    The spin factor is diagonalised (a 2x2 rotation) and each spin block
    receives exp(-+ i lam q/2) through the spectral decomposition of the
    truncated Hermitian position operator.
    """
    if spin_axis is None:
        spin_axis = axis
    spin_eigs, spin_vecs = np.linalg.eigh(SPIN_HALF[spin_axis])
    osc_exps = _osc_kick_exponentials(basis, axis, lam, spin_eigs)
    full = np.zeros((basis.dim, basis.dim), dtype=complex)
    for k in range(2):
        proj = np.outer(spin_vecs[:, k], spin_vecs[:, k].conj())
        full += kron_osc_spin(osc_exps[k], proj)
    return Operator(full, unitary=True)


def apply_kick(vec: np.ndarray, axis: Axis, lam: float, basis: FockBasis,
               spin_axis: SpinAxis | None = None) -> np.ndarray:
    """Kick applied to a state vector without forming the dense propagator."""
    if spin_axis is None:
        spin_axis = axis
    spin_eigs, spin_vecs = np.linalg.eigh(SPIN_HALF[spin_axis])
    blocks = _kick_blocks(basis, axis)
    psi = vec.reshape(basis.osc_dim, 2)
    comps = psi @ spin_vecs.conj()        # columns: amplitude on each spin eigenvector
    out_comps = np.empty_like(comps)
    for k in range(2):
        col = comps[:, k]
        new = np.empty_like(col)
        for idx, evals, evecs in blocks:
            phase = np.exp(-1j * lam * spin_eigs[k] * evals)
            new[idx] = evecs @ (phase * (evecs.T @ col[idx]))
        out_comps[:, k] = new
    return (out_comps @ spin_vecs.T).reshape(-1)


def floquet_operator(cfg: ValidatedConfig, basis: FockBasis | None = None) -> Operator:
    """U = exp(-i H0 tau) exp(-i lam q_x s_x) exp(-i lam q_y s_y), dense."""
    if basis is None:
        basis = build_basis(cfg.n_t)
    k_x = kick_propagator("x", cfg.lam, basis)
    k_y = kick_propagator("y", cfg.lam, basis)
    mat = h0_phases(basis, cfg)[:, None] * (k_x.matrix @ k_y.matrix)
    return Operator(mat, unitary=True)


def apply_floquet(vec: np.ndarray, cfg: ValidatedConfig, basis: FockBasis) -> np.ndarray:
    """One period applied to a state vector (kick y, kick x, then H0 phases)."""
    out = apply_kick(vec, "y", cfg.lam, basis)
    out = apply_kick(out, "x", cfg.lam, basis)
    return h0_phases(basis, cfg) * out


# --- diagnostics -----------------------------------------------------------

def expectation(state, op: Operator) -> complex:
    """<psi|A|psi>; real to 1e-12 when the operator is flagged Hermitian."""
    vec = state_vector(state)
    if vec.shape[0] != op.dim:
        raise DimensionMismatch(f"state dim {vec.shape[0]} vs operator dim {op.dim}")
    return complex(np.vdot(vec, op.matrix @ vec))


def phase_space_expectations(state, basis: FockBasis) -> dict[str, float]:
    """<q>, <p> and <s> components without forming full-space operators."""
    psi = state_vector(state).reshape(basis.osc_dim, 2)
    out = {}
    for axis in ("x", "y"):
        q = osc_position_matrix(basis, axis)
        p = osc_momentum_matrix(basis, axis)
        out[f"q_{axis}"] = float(np.real(np.sum(psi.conj() * (q @ psi))))
        out[f"p_{axis}"] = float(np.real(np.sum(psi.conj() * (p @ psi))))
    rho_spin = psi.conj().T @ psi
    for axis in ("x", "y", "z"):
        out[f"s_{axis}"] = float(np.real(np.trace(rho_spin.T @ SPIN_HALF[axis])))
    return out


# --- spectra ---------------------------------------------------------------

@dataclass
class FloquetSpectrum:
    """Full eigendecomposition of a Floquet unitary.

    Eigenphases lie in (-pi, pi]; vectors are orthonormal columns.  When the
    operator commutes with parity the decomposition is done per sector and
    each column carries its sector label.
    """

    eigenphases: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    sectors: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def state(self, k: int) -> QuantumState:
        return QuantumState(self.vectors[:, k])

    def best_overlap(self, vec: np.ndarray) -> tuple[int, float]:
        overlaps = np.abs(self.vectors.conj().T @ vec)
        k = int(np.argmax(overlaps))
        return k, float(overlaps[k])


def _schur_eig(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and orthonormal eigenvectors of a (near-)unitary matrix.

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are true eigenvectors and exactly orthonormal.
    """
    t_mat, q_mat = scipy.linalg.schur(matrix, output="complex")
    phases = np.angle(np.diag(t_mat))
    order = np.argsort(phases, kind="stable")
    return phases[order], q_mat[:, order]


def diagonalize(op: Operator, parity: np.ndarray | Operator | None = None,
                residual_tol: float = 1e-9) -> FloquetSpectrum:
    """Eigenphases and eigenvectors of a unitary operator.

    When a parity diagonal is supplied and the operator commutes with it,
    each sector block is diagonalised separately; eigenvectors are then
    exactly sector pure.  Raises EigFailure if any eigenpair residual
    exceeds residual_tol.
    """
    mat = op.matrix
    dim = mat.shape[0]
    sectors = None
    if parity is not None:
        pdiag = np.real(np.diag(parity.matrix)) if isinstance(parity, Operator) else np.asarray(parity)
        commutator = mat * pdiag[None, :] - pdiag[:, None] * mat
        if np.max(np.abs(commutator)) <= 1e-8:
            phases = np.empty(dim)
            vectors = np.zeros((dim, dim), dtype=complex)
            sectors = np.empty(dim, dtype="<U1")
            col = 0
            for label, value in (("O", -1), ("E", 1)):
                idx = np.flatnonzero(pdiag == value)
                sub_phases, sub_vecs = _schur_eig(mat[np.ix_(idx, idx)])
                block = slice(col, col + idx.size)
                phases[block] = sub_phases
                vectors[np.ix_(idx, range(col, col + idx.size))] = sub_vecs
                sectors[block] = label
                col += idx.size
            order = np.argsort(phases, kind="stable")
            phases = phases[order]
            vectors = vectors[:, order]
            sectors = sectors[order]
        else:
            parity = None
    if parity is None and sectors is None:
        phases, vectors = _schur_eig(mat)
    residuals = np.linalg.norm(mat @ vectors - vectors * np.exp(1j * phases)[None, :], axis=0)
    worst = float(np.max(residuals)) if residuals.size else 0.0
    if worst > residual_tol:
        raise EigFailure(worst, residual_tol)
    return FloquetSpectrum(eigenphases=phases, vectors=vectors,
                           residuals=residuals, sectors=sectors)


def _sector_spectrum(mat: np.ndarray, idx: np.ndarray,
                     residual_tol: float) -> tuple[np.ndarray, np.ndarray]:
    sub = mat[np.ix_(idx, idx)]
    phases, vecs = _schur_eig(sub)
    residuals = np.linalg.norm(sub @ vecs - vecs * np.exp(1j * phases)[None, :], axis=0)
    worst = float(np.max(residuals))
    if worst > residual_tol:
        raise EigFailure(worst, residual_tol)
    return phases, vecs


# --- adaptive continuation -------------------------------------------------

@dataclass
class TrackedSample:
    lam: float
    state: np.ndarray
    eigenphase: float
    dlam_used: float
    overlap: float


@dataclass
class TrackedPath:
    """Eigenstate followed through the coupling sweep by overlap continuation."""

    samples: list[TrackedSample]
    sector: str | None

    def lams(self) -> np.ndarray:
        return np.array([s.lam for s in self.samples])

    def sample_at(self, lam: float, tol: float = 1e-12) -> TrackedSample:
        for s in self.samples:
            if abs(s.lam - lam) <= tol:
                return s
        raise KeyError(f"no tracked sample at lam = {lam!r}")

    def final(self) -> TrackedSample:
        return self.samples[-1]


MIN_TRACK_STEP = 1e-6


def track_eigenstate(lam_start: float, lam_end: float, seed, cfg: ValidatedConfig,
                     basis: FockBasis | None = None,
                     stops: Sequence[float] | None = None,
                     initial_dlam: float = 0.01,
                     max_dlam: float = 0.02) -> TrackedPath:
    """Follow one Floquet eigenstate from lam_start to lam_end.

    At every trial step the eigenvector of U(lam + dlam) with maximal
    overlap against the current state is selected; the step is accepted
    when 1 - |overlap| stays below cfg.overlap_threshold, otherwise dlam is
    halved (StepUnderflow below 1e-6).  After two consecutive acceptances
    dlam grows by 1.5x up to max_dlam.  Accepted states are phase aligned
    so consecutive inner products are real positive, and the path lands
    exactly on every requested stop.

    The seed must be an eigenvector of U(lam_start) to cfg.eig_residual_tol.
    If it is parity pure the whole continuation runs inside that sector, so
    sector leakage is exactly zero along the path.
    """
    if not lam_start < lam_end:
        raise ValueError("lam_start must be < lam_end")
    if basis is None:
        basis = build_basis(cfg.n_t)
    vec = state_vector(seed)
    vec = vec / np.linalg.norm(vec)

    u_start = floquet_operator(cfg.with_lam(lam_start), basis)
    rayleigh = complex(np.vdot(vec, u_start.matrix @ vec))
    phase0 = math.atan2(rayleigh.imag, rayleigh.real)
    resid = np.linalg.norm(u_start.matrix @ vec - np.exp(1j * phase0) * vec)
    if resid > cfg.eig_residual_tol:
        raise EigFailure(resid, cfg.eig_residual_tol)

    parity = basis.parity
    sector = None
    for label, value in (("O", -1), ("E", 1)):
        idx = np.flatnonzero(parity == value)
        if 1.0 - float(np.sum(np.abs(vec[idx]) ** 2)) <= 1e-12:
            sector = label
            break
    if sector is not None:
        idx = basis.sector_indices(sector)
    else:
        idx = np.arange(basis.dim)

    current = vec[idx]
    samples = [TrackedSample(lam=lam_start, state=vec.copy(), eigenphase=phase0,
                             dlam_used=0.0, overlap=1.0)]
    stop_list = sorted({float(s) for s in (stops or [])} | {float(lam_end)})
    stop_list = [s for s in stop_list if lam_start < s <= lam_end + 1e-15]

    lam = lam_start
    dlam = min(initial_dlam, lam_end - lam_start)
    accept_streak = 0
    while stop_list:
        next_stop = stop_list[0]
        target = min(lam + dlam, next_stop)
        u_t = floquet_operator(cfg.with_lam(target), basis)
        phases, vecs = _sector_spectrum(u_t.matrix, idx, cfg.eig_residual_tol)
        overlaps = np.abs(vecs.conj().T @ current)
        k = int(np.argmax(overlaps))
        overlap = float(overlaps[k])
        if 1.0 - overlap < cfg.overlap_threshold:
            new = vecs[:, k].copy()
            inner = complex(np.vdot(current, new))
            if abs(inner) > 0:
                new *= inner.conjugate() / abs(inner)
            full = np.zeros(basis.dim, dtype=complex)
            full[idx] = new
            samples.append(TrackedSample(lam=target, state=full,
                                         eigenphase=float(phases[k]),
                                         dlam_used=target - lam, overlap=overlap))
            current = new
            lam = target
            if abs(lam - next_stop) <= 1e-15:
                stop_list.pop(0)
            accept_streak += 1
            if accept_streak >= 2:
                dlam = min(dlam * 1.5, max_dlam)
                accept_streak = 0
        else:
            dlam /= 2.0
            accept_streak = 0
            if dlam < MIN_TRACK_STEP:
                raise StepUnderflow(
                    f"continuation step fell below {MIN_TRACK_STEP} at lam = {lam:.6f}")
    return TrackedPath(samples=samples, sector=sector)


def sector_leakage(state, basis: FockBasis, sector: str) -> float:
    """Probability weight outside the named parity sector."""
    vec = state_vector(state)
    idx = basis.sector_indices(sector)
    return float(1.0 - np.sum(np.abs(vec[idx]) ** 2))


def pgs_seed(basis: FockBasis) -> np.ndarray:
    """Zero-coupling pseudo-ground state: |0,0>|-> in the O sector."""
    return basis.basis_state(0, 0, -1)


def pes_seed(basis: FockBasis) -> np.ndarray:
    """Zero-coupling pseudo-excited state: the symmetric one-phonon level
    (|1,0> + |0,1>)/sqrt(2) |-> in the E sector.

    With the phase advance per period much smaller than the spin splitting
    this is the first excitation above the ground state, and it continues
    into the even localised partner of the bifurcation doublet.
    """
    vec = basis.basis_state(1, 0, -1) + basis.basis_state(0, 1, -1)
    return vec / math.sqrt(2.0)
