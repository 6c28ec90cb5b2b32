"""Two-mode excitation exchange, number decoherence and Lindblad propagation.

Phase convention, fixed and asserted in the test suite: the exchange unitary
transfers amplitude with a factor +i sin(gt), i.e.

    U(gt) a^dag U(gt)^dag = cos(gt) a^dag + i sin(gt) b^dag
    U(gt) a     U(gt)^dag = cos(gt) a     - i sin(gt) b

so a single excitation on A evolves to cos(gt)|10> + i sin(gt)|01>, and a
coherent input |alpha>|0> evolves to the product |alpha cos(gt)>|i alpha
sin(gt)>.  Only the product gt (coupling times time) enters any observable.
"""

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .hilbert import (
    DensityMatrix,
    DimensionError,
    ModeDims,
    ModeOperator,
    as_mode_dims,
)


class ConvergenceError(RuntimeError):
    """Adaptive integration failed to meet its tolerance."""


def exchange_unitary(dims, gt: float) -> ModeOperator:
    """Beam-splitter-type exchange unitary on two truncated modes.

    Block diagonal in the total excitation number; each block is the
    exponential of the tridiagonal hopping generator restricted to that
    block (exactly the exponential of the truncated generator).  See the
    module docstring for the sign convention.
    """
    md = as_mode_dims(dims)
    if md.n_modes != 2:
        raise DimensionError(f"exchange_unitary needs exactly 2 modes, got {md.n_modes}")
    da, db = md.dims
    if da < 2 or db < 2:
        raise DimensionError(f"both mode dims must be >= 2, got {md.dims}")
    mat = np.zeros((md.total, md.total), dtype=complex)
    for n in range(da + db - 1):
        a_lo = max(0, n - (db - 1))
        a_hi = min(n, da - 1)
        idx = [na * db + (n - na) for na in range(a_lo, a_hi + 1)]
        size = len(idx)
        if size == 1:
            mat[idx[0], idx[0]] = 1.0
            continue
        # hopping element between occupations (na, nb) and (na+1, nb-1)
        offdiag = np.array([
            np.sqrt((a_lo + j + 1) * (n - a_lo - j)) for j in range(size - 1)
        ])
        evals, evecs = scipy.linalg.eigh_tridiagonal(np.zeros(size), offdiag)
        block = (evecs * np.exp(1j * gt * evals)) @ evecs.T
        mat[np.ix_(idx, idx)] = block
    return ModeOperator(md, mat, unitary=True)


def heisenberg_transform(gt: float) -> np.ndarray:
    """2x2 mixing matrix of the annihilation operators (a, b) under exchange."""
    c, s = np.cos(gt), np.sin(gt)
    return np.array([[c, -1j * s], [-1j * s, c]])


def expm_oracle(generator: ModeOperator, scale: float = 1.0) -> ModeOperator:
    """Dense matrix exponential exp(scale * generator), independent oracle.

    Scaling-and-squaring with a degree-20 Taylor evaluation; intended only
    to cross-validate the analytic constructions, not for production paths.
    """
    if not np.all(np.isfinite(generator.mat)):
        raise ValueError("generator contains non-finite entries")
    return ModeOperator(generator.dims, _expm_taylor(scale * generator.mat))


_TAYLOR_ORDER = 20


def _expm_taylor(mat: np.ndarray) -> np.ndarray:
    d = mat.shape[0]
    norm = np.linalg.norm(mat, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    small = mat / (2.0 ** squarings)
    result = np.eye(d, dtype=complex)
    for k in range(_TAYLOR_ORDER, 0, -1):
        result = np.eye(d, dtype=complex) + (small / k) @ result
    for _ in range(squarings):
        result = result @ result
    return result


def decohere_number(rho: DensityMatrix, site: int) -> DensityMatrix:
    """Remove coherences between different excitation numbers on one site.

    A pinching channel: idempotent, completely positive and trace
    preserving.  Applied to a coherent-state projector it leaves the
    Poisson mixture of number states.
    """
    m = rho.dims.n_modes
    if not 0 <= site < m:
        raise DimensionError(f"site {site} out of range for {m} modes")
    occ = np.indices(rho.dims.dims).reshape(m, -1)[site]
    mask = occ[:, None] == occ[None, :]
    return DensityMatrix(rho.dims, np.where(mask, rho.mat, 0.0),
                         subnormalized=rho.subnormalized)


def decohered_dimer_state(alpha: complex, gt: float) -> DensityMatrix:
    """Fully number-decohered and (0,1)-projected dimer state.

    The incoherent mixture of the ground state and the coherently
    propagated single excitation,

        (|00><00| + |alpha|^2 |chi(gt)><chi(gt)|) / (1 + |alpha|^2)

    with |chi(gt)> = cos(gt)|10> + i sin(gt)|01> on two two-level sites.
    """
    asq = abs(alpha) ** 2
    chi = np.zeros(4, dtype=complex)
    chi[2] = np.cos(gt)       # |10>
    chi[1] = 1j * np.sin(gt)  # |01>
    mat = np.zeros((4, 4), dtype=complex)
    mat[0, 0] = 1.0
    mat += asq * np.outer(chi, chi.conj())
    return DensityMatrix(ModeDims((2, 2)), mat / (1.0 + asq))


@dataclass(frozen=True)
class LindbladSpec:
    """Generator of a GKSL master equation.

    ``jumps`` are (rate, operator) pairs entering with the full dissipator;
    ``losses`` enter with the anti-commutator part only, removing population
    from the system (monotonically decreasing trace).
    """

    hamiltonian: ModeOperator
    jumps: tuple = ()
    losses: tuple = ()

    def __post_init__(self):
        if not self.hamiltonian.hermitian:
            h = self.hamiltonian.mat
            if np.max(np.abs(h - h.conj().T)) > 1e-12:
                raise ValueError("Lindblad Hamiltonian must be Hermitian")
        object.__setattr__(self, "jumps", tuple(self.jumps))
        object.__setattr__(self, "losses", tuple(self.losses))
        for rate, _op in self.jumps + self.losses:
            if rate < 0:
                raise ValueError(f"negative rate {rate}")

    @property
    def trace_preserving(self) -> bool:
        return len(self.losses) == 0


@dataclass(frozen=True)
class Trajectory:
    """Time grid and the propagated states on it."""

    times: np.ndarray
    states: tuple

    def __len__(self) -> int:
        return len(self.states)


def _rhs_terms(spec: LindbladSpec):
    h = spec.hamiltonian.mat
    terms = []
    for rate, op in spec.jumps:
        c = np.sqrt(rate) * op.mat
        terms.append((c, c.conj().T @ c, True))
    for rate, op in spec.losses:
        c = np.sqrt(rate) * op.mat
        terms.append((c, c.conj().T @ c, False))
    return h, terms


def _make_rhs(spec: LindbladSpec):
    h, terms = _rhs_terms(spec)
    d = h.shape[0]

    def rhs(_t, y):
        rho = y.reshape(d, d)
        drho = -1j * (h @ rho - rho @ h)
        for c, cdc, recycle in terms:
            if recycle:
                drho += c @ rho @ c.conj().T
            drho -= 0.5 * (cdc @ rho + rho @ cdc)
        return drho.ravel()

    return rhs, d


def liouvillian_matrix(spec: LindbladSpec) -> np.ndarray:
    """Superoperator acting on row-major vec(rho)."""
    h, terms = _rhs_terms(spec)
    d = h.shape[0]
    eye = np.eye(d)
    liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c, cdc, recycle in terms:
        if recycle:
            liou += np.kron(c, c.conj())
        liou -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return liou


def lindblad_propagate(spec: LindbladSpec, rho0: DensityMatrix, t_grid,
                       method: str = "adaptive", rtol: float = 1e-9,
                       atol: float = 1e-12, fixed_substeps: int = 32) -> Trajectory:
    """Propagate a density matrix over an increasing time grid from 0.

    ``method="adaptive"`` uses an adaptive explicit Runge-Kutta scheme;
    ``method="fixed"`` uses classical RK4 with ``fixed_substeps`` steps per
    grid interval for bit-reproducible sweeps.  With only full jump terms
    the trace is conserved (drift beyond 1e-8 raises); with loss terms the
    system trace decreases monotonically and states are returned as
    subnormalized density matrices.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must increase from 0")
    if spec.hamiltonian.dims != rho0.dims:
        raise DimensionError("Hamiltonian and initial state dims differ")
    rhs, d = _make_rhs(spec)
    y0 = rho0.mat.astype(complex).ravel()

    if method == "adaptive":
        if len(t_grid) == 1:
            raws = [y0.reshape(d, d)]
        else:
            sol = scipy.integrate.solve_ivp(
                rhs, (t_grid[0], t_grid[-1]), y0, t_eval=t_grid,
                method="DOP853", rtol=rtol, atol=atol)
            if not sol.success:
                raise ConvergenceError(f"adaptive integrator failed: {sol.message}")
            raws = [sol.y[:, k].reshape(d, d) for k in range(sol.y.shape[1])]
    elif method == "fixed":
        raws = _fixed_collect(rhs, y0, t_grid, fixed_substeps, d)
    else:
        raise ValueError(f"unknown method {method!r}")

    trace0 = rho0.trace()
    subnormalized = (not spec.trace_preserving) or trace0 < 1.0 - 1e-12
    states = []
    prev_trace = None
    for raw in raws:
        raw = 0.5 * (raw + raw.conj().T)
        evals, evecs = scipy.linalg.eigh(raw)
        if evals[0] < -1e-8:
            raise ConvergenceError(
                f"integrator produced eigenvalue {evals[0]:.3e}; tighten tolerances")
        if evals[0] < 0.0:
            # round-off level negativity from the integrator; project back
            # onto the positive cone
            raw = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
        tr = np.trace(raw).real
        if spec.trace_preserving:
            if abs(tr - trace0) > 1e-8:
                raise ConvergenceError(f"trace drift {abs(tr - trace0):.3e} exceeds 1e-8")
            if tr > 0:
                raw = raw * (trace0 / tr)
        else:
            if prev_trace is not None and tr > prev_trace + 1e-8:
                raise ConvergenceError("system trace increased in loss mode")
            prev_trace = tr
        states.append(DensityMatrix(rho0.dims, raw, subnormalized=subnormalized))
    return Trajectory(times=t_grid, states=tuple(states))


def _fixed_collect(rhs, y0, t_grid, substeps, d):
    raws = [y0.reshape(d, d)]
    y = y0.copy()
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        dt = (t1 - t0) / substeps
        t = t0
        for _ in range(substeps):
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        raws.append(y.reshape(d, d).copy())
    return raws
