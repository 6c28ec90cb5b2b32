import numpy as np
import pytest

from excitonsim.dynamics import exchange_unitary
from excitonsim.entanglement import ExcitationProjector
from excitonsim.hilbert import FockVector, embed, number_operator, tensor
from excitonsim.states import coherent_truncated, fock
from excitonsim.transport import (
    CappedBasis,
    ConfigError,
    ConvergenceWarning,
    NetworkSpec,
    build_network,
    captured_series,
    default_time_grid,
    efficiency_integrated,
    efficiency_peak,
    initial_state,
    pairwise_concurrence,
    propagate,
    truncation_robustness,
)


def dimer_spec(**overrides):
    kwargs = dict(
        energies=(0.0, 0.0),
        couplings=((0.0, 1.0), (1.0, 0.0)),
        dephasing=(0.0, 0.0),
        exit_site=1,
        sink_rate=1.0,
    )
    kwargs.update(overrides)
    return NetworkSpec(**kwargs)


def chain3_spec(**overrides):
    kwargs = dict(
        energies=(0.0, 0.0, 0.0),
        couplings=((0.0, 1.0, 0.0), (1.0, 0.0, 1.0), (0.0, 1.0, 0.0)),
        dephasing=(0.5, 0.5, 0.5),
        exit_site=2,
        sink_rate=1.0,
    )
    kwargs.update(overrides)
    return NetworkSpec(**kwargs)


# --- spec and basis -------------------------------------------------------------

def test_network_spec_validation():
    with pytest.raises(ConfigError):
        NetworkSpec(energies=(0.0, 0.0), couplings=((0, 1), (2, 0)),
                    dephasing=(0, 0), exit_site=1, sink_rate=1.0)
    with pytest.raises(ConfigError):
        dimer_spec(sink_rate=-1.0)
    with pytest.raises(ConfigError):
        dimer_spec(exit_site=5)
    with pytest.raises(ConfigError):
        dimer_spec(sink_mode="bogus")


def test_network_spec_from_dict():
    spec = NetworkSpec.from_dict({
        "sites": 3,
        "couplings": [[0, 1, 1.0], [1, 2, 1.0]],
        "dephasing": 0.5,
        "exit_site": 2,
        "sink_rate": 1.0,
    })
    assert spec.n_sites == 3
    assert spec.coupling_matrix[0, 1] == 1.0
    assert spec.dephasing == (0.5, 0.5, 0.5)
    with pytest.raises(ConfigError):
        NetworkSpec.from_dict({"sites": 2})


def test_capped_basis_counting():
    # 3 sites + sink, single excitation: ground + 3 sites + sink
    basis = CappedBasis(4, 1)
    assert basis.dimension == 5
    model = build_network(chain3_spec(), cap=1)
    assert model.basis.dimension == 5
    # 7 sites, cap 1: ground + 7 + sink
    spec7 = NetworkSpec(
        energies=(0.0,) * 7,
        couplings=tuple(tuple(1.0 if abs(i - j) == 1 else 0.0 for j in range(7))
                        for i in range(7)),
        dephasing=(0.0,) * 7,
        exit_site=6,
        sink_rate=1.0,
    )
    model7 = build_network(spec7, cap=1)
    assert model7.basis.dimension == 9
    single_block = sum(1 for occ in model7.basis.states
                       if sum(occ) == 1 and occ[-1] == 0)
    assert single_block == 7


def test_capped_basis_ladder():
    basis = CappedBasis(2, 2)
    a0 = basis.lowering(0)
    occ = basis.index[(2, 0)]
    target = basis.index[(1, 0)]
    assert a0[target, occ] == pytest.approx(np.sqrt(2))


def test_dimer_reduces_to_exchange_model():
    # gamma = sink = 0: populations follow the closed two-mode exchange
    spec = dimer_spec(sink_rate=0.0)
    model = build_network(spec, cap=2)
    psi0 = initial_state(model, 0.3)
    t_grid = np.linspace(0.0, 3.0, 7)
    traj = propagate(model, psi0.to_density(), t_grid)

    dim = 3
    ref0 = tensor(coherent_truncated(0.3, dim, tail_tol=1.0), fock(dim, 0))
    n_b = embed(number_operator(dim), (dim, dim), 1)
    for t, state in zip(traj.times, traj.states):
        n_exit = model.basis.number(1)
        measured = np.trace(n_exit @ state.mat).real
        ref = n_b.expectation(
            exchange_unitary((dim, dim), t).apply(ref0).normalize()).real
        assert measured == pytest.approx(ref, abs=1e-7)


# --- efficiencies ----------------------------------------------------------------

def test_efficiency_zero_sink_rate():
    model = build_network(dimer_spec(sink_rate=0.0), cap=1)
    traj = propagate(model, initial_state(model, 0.3).to_density(),
                     np.linspace(0.0, 5.0, 11))
    assert efficiency_integrated(traj, model) == pytest.approx(0.0, abs=1e-12)


def test_efficiency_dimer_long_time_unity():
    model = build_network(dimer_spec(), cap=1)
    amps = np.zeros(model.basis.dimension, dtype=complex)
    amps[model.basis.index[(1, 0, 0)]] = 1.0
    traj = propagate(model, FockVector(model.basis.dims, amps).to_density(),
                     np.linspace(0.0, 300.0, 61))
    eff = efficiency_integrated(traj, model)
    assert eff == pytest.approx(1.0, abs=1e-6)


def test_efficiency_convergence_flag():
    model = build_network(dimer_spec(), cap=1)
    amps = np.zeros(model.basis.dimension, dtype=complex)
    amps[model.basis.index[(1, 0, 0)]] = 1.0
    rho0 = FockVector(model.basis.dims, amps).to_density()
    short = propagate(model, rho0, np.linspace(0.0, 5.0, 11))
    with pytest.warns(ConvergenceWarning):
        efficiency_integrated(short, model)


def test_relaxation_strictly_decreases_efficiency():
    base = chain3_spec()
    lossy = chain3_spec(relaxation=(0.1, 0.1, 0.1))
    t_grid = np.linspace(0.0, 60.0, 61)
    effs = []
    for spec in (base, lossy):
        model = build_network(spec, cap=1)
        with pytest.warns(ConvergenceWarning):
            traj = propagate(model, initial_state(model, 0.2).to_density(), t_grid)
            effs.append(efficiency_integrated(traj, model))
    assert effs[1] < effs[0] - 1e-3


def test_peak_unitary_dimer():
    model = build_network(dimer_spec(sink_rate=0.0), cap=1)
    amps = np.zeros(model.basis.dimension, dtype=complex)
    amps[model.basis.index[(1, 0, 0)]] = 1.0
    t_grid = np.linspace(0.0, np.pi, 65)
    traj = propagate(model, FockVector(model.basis.dims, amps).to_density(), t_grid)
    peak, t_at = efficiency_peak(traj, model)
    assert peak == pytest.approx(1.0, abs=1e-6)
    assert t_at == pytest.approx(np.pi / 2, abs=np.pi / 64 + 1e-9)
    assert peak <= 1.0 + 1e-9


def test_peak_vacuum_input_zero():
    model = build_network(dimer_spec(sink_rate=0.0), cap=1)
    vac = np.zeros(model.basis.dimension, dtype=complex)
    vac[model.basis.index[(0, 0, 0)]] = 1.0
    traj = propagate(model, FockVector(model.basis.dims, vac).to_density(),
                     np.linspace(0.0, 2.0, 9))
    peak, _ = efficiency_peak(traj, model)
    assert peak == pytest.approx(0.0, abs=1e-12)


def test_peak_empty_window_rejected():
    model = build_network(dimer_spec(sink_rate=0.0), cap=1)
    vac = np.zeros(model.basis.dimension, dtype=complex)
    vac[model.basis.index[(0, 0, 0)]] = 1.0
    traj = propagate(model, FockVector(model.basis.dims, vac).to_density(),
                     np.linspace(0.0, 2.0, 9))
    with pytest.raises(ValueError):
        efficiency_peak(traj, model, window=(5.0, 6.0))


def test_loss_mode_sink():
    spec = dimer_spec(sink_mode="loss")
    model = build_network(spec, cap=1)
    assert model.sink_mode_index is None
    psi0 = initial_state(model, 0.3)
    traj = propagate(model, psi0.to_density(), np.linspace(0.0, 200.0, 41))
    captured = captured_series(traj, model)
    assert np.all(np.diff(captured) >= -1e-9)
    # all excited weight is eventually absorbed; the vacuum weight remains
    excited_weight = 1 - abs(psi0.amps[model.basis.index[(0, 0)]]) ** 2
    assert captured[-1] == pytest.approx(excited_weight, abs=1e-6)


# --- number-sector structure ------------------------------------------------------

def test_single_excitation_block_independent_of_higher_sector():
    # same single-excitation component, with and without a two-excitation
    # component on top: identical single-sector dynamics under dephasing
    spec = chain3_spec(sink_rate=0.0)
    model = build_network(spec, cap=2)
    t_grid = np.linspace(0.0, 6.0, 13)

    occ1 = tuple(1 if k == 0 else 0 for k in range(model.n_modes))
    occ2 = tuple(2 if k == 0 else 0 for k in range(model.n_modes))
    idx1, idx2 = model.basis.index[occ1], model.basis.index[occ2]

    amps_a = np.zeros(model.basis.dimension, dtype=complex)
    amps_a[idx1] = 1.0
    amps_b = np.zeros(model.basis.dimension, dtype=complex)
    amps_b[model.vacuum_index()] = 0.6
    amps_b[idx1] = 0.6
    amps_b[idx2] = np.sqrt(1 - 2 * 0.36)

    mask = model.basis.sector_mask({1})
    runs = []
    for amps in (amps_a, amps_b):
        psi = FockVector(model.basis.dims, amps)
        traj = propagate(model, psi.to_density(), t_grid)
        weight = abs(amps[idx1]) ** 2
        block = [st.mat[np.ix_(mask, mask)] / weight for st in traj.states]
        runs.append(block)
    for block_a, block_b in zip(*runs):
        assert np.max(np.abs(block_a - block_b)) <= 1e-8


def test_restricted_expectation_residual_is_two_excitation_weight():
    spec = chain3_spec()
    alpha = 0.2
    t_grid = np.linspace(0.0, 20 * np.pi, 81)
    report = truncation_robustness(spec, alpha, t_grid=t_grid)
    diff = abs(report.efficiency_full - report.efficiency_restricted)
    # the difference saturates at the bound when every quantum is captured
    assert diff <= report.residual_bound + 1e-6
    # the bound itself is O(alpha^4)
    assert report.residual_bound <= 2.1 * alpha ** 4


def test_projection_dynamics_exchange_identity():
    # unitary dimer: <psi(t)|P1 T P1|psi(t)> equals T evaluated on the
    # propagated projected state
    dim = 4
    psi0 = tensor(coherent_truncated(0.35, dim, tail_tol=1.0), fock(dim, 0))
    t_op = embed(number_operator(dim), (dim, dim), 1).mat
    p1 = ExcitationProjector.single(psi0.dims).matrix().mat
    for gt in np.linspace(0.0, 2 * np.pi, 16):
        u = exchange_unitary((dim, dim), gt).mat
        evolved = u @ psi0.amps
        lhs = np.vdot(evolved, p1 @ t_op @ p1 @ evolved)
        projected_then_evolved = u @ (p1 @ psi0.amps)
        rhs = np.vdot(projected_then_evolved, t_op @ projected_then_evolved)
        assert abs(lhs - rhs) <= 1e-10


def test_efficiency_invariant_concurrence_not():
    # global phase and vacuum weight leave the normalized efficiency alone
    # but rescale the projected concurrence
    spec = chain3_spec()
    model = build_network(spec, cap=2)
    t_grid = np.linspace(0.0, 8.0, 33)

    psi = initial_state(model, 0.3)
    extra_vacuum = psi.amps.copy()
    extra_vacuum[model.vacuum_index()] *= 2.0
    extra_vacuum /= np.linalg.norm(extra_vacuum)
    variants = [
        psi,
        FockVector(model.basis.dims, np.exp(1j * 0.7) * psi.amps),
        FockVector(model.basis.dims, extra_vacuum),
    ]
    effs, concs = [], []
    import warnings as _w
    for state in variants:
        with _w.catch_warnings():
            _w.simplefilter("ignore", ConvergenceWarning)
            traj = propagate(model, state.to_density(), t_grid)
            effs.append(efficiency_integrated(traj, model, normalized=True))
        concs.append(max(
            pairwise_concurrence(st, model.basis, 0, 2, {0, 1})
            for st in traj.states))
    assert effs[1] == pytest.approx(effs[0], abs=1e-10)
    assert effs[2] == pytest.approx(effs[0], abs=1e-10)
    assert concs[1] == pytest.approx(concs[0], abs=1e-10)
    assert concs[2] < 0.6 * concs[0]


# --- the robustness experiment ----------------------------------------------------

@pytest.fixture(scope="module")
def robustness_reports():
    spec = chain3_spec()
    t_grid = np.linspace(0.0, 20 * np.pi, 161)
    return {alpha: truncation_robustness(spec, alpha, t_grid=t_grid)
            for alpha in (0.1, 0.2, 0.4)}


def test_robustness_alpha_sq_scaling(robustness_reports):
    ratios = [rep.relative_difference / alpha ** 2
              for alpha, rep in robustness_reports.items()]
    assert max(ratios) <= 2.0 * min(ratios)


def test_robustness_prefactor(robustness_reports):
    for alpha, rep in robustness_reports.items():
        ratio = max(rep.concurrence_p01) / max(rep.concurrence_p1)
        assert ratio == pytest.approx(alpha ** 2 / (1 + alpha ** 2), rel=1e-6)


def test_robustness_p1_series_insensitive_to_restriction(robustness_reports):
    # the single-excitation sector evolves independently, so the projected
    # series of the restricted run reproduces the full one
    for rep in robustness_reports.values():
        diffs = [abs(a - b) for a, b in
                 zip(rep.concurrence_p1, rep.concurrence_p1_restricted)]
        assert max(diffs) <= 1e-7


def test_robustness_zero_alpha():
    spec = chain3_spec()
    rep = truncation_robustness(spec, 0.0, t_grid=np.linspace(0.0, 5.0, 11))
    assert rep.efficiency_full == pytest.approx(0.0, abs=1e-12)
    assert rep.efficiency_restricted == pytest.approx(0.0, abs=1e-12)
    assert rep.relative_difference == 0.0
    assert max(rep.concurrence_p1) == 0.0


def test_robustness_report_fields(robustness_reports):
    rep = robustness_reports[0.2]
    assert 0.0 <= rep.efficiency_full <= 1.0
    assert 0.0 <= rep.efficiency_restricted <= 1.0
    assert 0.0 <= rep.normalized_efficiency_full <= 1.0 + 1e-9
    assert rep.efficiency_cap1 == pytest.approx(rep.efficiency_restricted, abs=1e-6)
    # closed-system full-state concurrence stays at the truncation level,
    # far below the projected series
    assert rep.unitary_full_concurrence_max <= 2 * 0.2 ** 3
    assert rep.unitary_full_concurrence_max <= 0.1 * max(rep.concurrence_p1)
    payload = rep.to_dict()
    assert payload["alpha"] == 0.2
    assert len(payload["times"]) == len(payload["concurrence_p1"])


def test_default_time_grid_scale():
    grid = default_time_grid(chain3_spec(), periods=10.0)
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(10 * np.pi)
    with pytest.raises(ConfigError):
        default_time_grid(NetworkSpec(
            energies=(0.0, 0.0), couplings=((0.0, 0.0), (0.0, 0.0)),
            dephasing=(0.0, 0.0), exit_site=1, sink_rate=0.0))
