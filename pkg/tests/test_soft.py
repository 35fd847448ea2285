import dataclasses

import numpy as np
import pytest

from vibroniq.model import (
    GridSpec,
    ModeParams,
    TimeGrid,
    VibronicModel,
    grid_points,
    initial_state,
    momentum_points,
    pyrazine_2mode,
    pyrazine_4d,
)
from vibroniq.soft import (
    SPLIT_ORDERS,
    PropagatorPlan,
    boundary_maxima,
    energy,
    populations,
    propagate,
    step,
    zpe,
)


def dense_hamiltonian(model: VibronicModel, grid: GridSpec) -> np.ndarray:
    """Exact matrix of the model on the product grid, electronic block first."""
    q = grid_points(grid)
    p = momentum_points(grid)
    npts = grid.size
    d = model.d
    shape = (npts,) * d
    size = npts**d

    def field(fn):
        out = np.zeros(shape)
        for axis in range(d):
            vec = fn(axis)
            out = out + vec.reshape((1,) * axis + (npts,) + (1,) * (d - axis - 1))
        return out.reshape(size)

    quad = field(lambda ax: 0.5 * model.modes[ax].omega * q**2)
    lin1 = field(lambda ax: (model.modes[ax].kappa1 or 0.0) * q)
    lin2 = field(lambda ax: (model.modes[ax].kappa2 or 0.0) * q)
    v1 = np.diag(-model.delta + quad + lin1)
    v2 = np.diag(model.delta + quad + lin2)
    coupling = np.zeros((size, size))
    if model.lam:
        cfield = field(lambda ax: model.lam * q if ax == model.coupling_mode else 0.0 * q)
        coupling = np.diag(cfield)
    dft = np.exp(2j * np.pi * np.outer(np.arange(npts), np.arange(npts)) / npts) / np.sqrt(npts)
    kin1 = dft @ np.diag(0.5 * model.modes[0].omega * p**2) @ dft.conj().T
    kin = np.zeros((size, size), dtype=complex)
    for axis in range(d):
        kmode = dft @ np.diag(0.5 * model.modes[axis].omega * p**2) @ dft.conj().T
        ops = [np.eye(npts)] * d
        ops[axis] = kmode
        full = ops[0]
        for op in ops[1:]:
            full = np.kron(full, op)
        kin = kin + full
    del kin1
    h = np.zeros((2 * size, 2 * size), dtype=complex)
    h[:size, :size] = v1 + kin
    h[size:, size:] = v2 + kin
    h[:size, size:] = coupling
    h[size:, :size] = coupling
    return h


def exact_propagator(h: np.ndarray, dt: float, hbar: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt / hbar)) @ v.conj().T


def tiny_model() -> VibronicModel:
    return VibronicModel(
        modes=(
            ModeParams("a", 0.0740, "Ag", kappa1=-0.0964, kappa2=0.1194),
            ModeParams("c", 0.0936, "B1g"),
        ),
        lam=0.1825,
        delta=0.4617,
    )


def test_norm_conservation_per_step():
    model = pyrazine_2mode()
    grid = GridSpec(n=4, q_min=-5.0, q_max=5.0)
    plan = PropagatorPlan(model, grid, dt=0.2)
    psi = initial_state(model, grid)
    for _ in range(200):
        psi = step(plan, psi)
        assert abs(psi.norm() - 1.0) < 1e-12


def test_step_against_dense_propagator():
    model = tiny_model()
    grid = GridSpec(n=2, q_min=-5.0, q_max=5.0)
    h = dense_hamiltonian(model, grid)
    psi = initial_state(model, grid)
    vec = psi.amplitudes.reshape(-1).copy()
    dt = 0.05
    u = exact_propagator(h, dt, model.hbar)
    plan = PropagatorPlan(model, grid, dt)
    for _ in range(40):
        psi = step(plan, psi)
        vec = u @ vec
    err = np.linalg.norm(psi.amplitudes.reshape(-1) - vec)
    assert err < 2e-4


def test_second_order_convergence():
    model = tiny_model()
    grid = GridSpec(n=2, q_min=-5.0, q_max=5.0)
    h = dense_hamiltonian(model, grid)
    total = 4.0
    errors = []
    for n_steps in (16, 32):
        dt = total / n_steps
        u = exact_propagator(h, dt, model.hbar)
        plan = PropagatorPlan(model, grid, dt)
        psi = initial_state(model, grid)
        vec = psi.amplitudes.reshape(-1).copy()
        for _ in range(n_steps):
            psi = step(plan, psi)
            vec = u @ vec
        errors.append(np.linalg.norm(psi.amplitudes.reshape(-1) - vec))
    ratio = errors[0] / errors[1]
    assert 3.0 < ratio < 5.0


def test_kinetic_first_is_first_order_in_the_coupling():
    # the reversed ordering has no palindromic cancellation, so halving dt
    # should shrink the error by about 2, not 4
    model = tiny_model()
    grid = GridSpec(n=2, q_min=-5.0, q_max=5.0)
    h = dense_hamiltonian(model, grid)
    total = 4.0
    errors = []
    for n_steps in (16, 32):
        dt = total / n_steps
        u = exact_propagator(h, dt, model.hbar)
        plan = PropagatorPlan(model, grid, dt, split_order="kinetic-first")
        psi = initial_state(model, grid)
        vec = psi.amplitudes.reshape(-1).copy()
        for _ in range(n_steps):
            psi = step(plan, psi)
            vec = u @ vec
        errors.append(np.linalg.norm(psi.amplitudes.reshape(-1) - vec))
    ratio = errors[0] / errors[1]
    assert 1.5 < ratio < 3.0


def test_observer_series_shapes():
    model = pyrazine_2mode()
    grid = GridSpec(n=3, q_min=-5.0, q_max=5.0)
    tg = TimeGrid(dt=0.25, n_steps=32, sample_stride=4)
    plan = PropagatorPlan(model, grid, tg.dt)
    out = propagate(plan, initial_state(model, grid), tg)
    acf = out["autocorr"]
    pops = out["population"]
    bnd = out["boundary"]
    assert len(acf.times) == 9
    assert acf.values[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(acf.values) <= 1.0 + 1e-10)
    assert np.allclose(pops.p_s1 + pops.p_s2, 1.0, atol=1e-12)
    assert bnd.per_mode.shape == (9, 2)
    assert out["state"].norm() == pytest.approx(1.0, abs=1e-10)


def test_energy_observer_drift_is_second_order():
    model = pyrazine_2mode()
    grid = GridSpec(n=4, q_min=-6.0, q_max=6.0)

    def max_drift(dt, n_steps):
        tg = TimeGrid(dt=dt, n_steps=n_steps)
        plan = PropagatorPlan(model, grid, dt)
        e = propagate(plan, initial_state(model, grid), tg, observers=("energy",))["energy"].values
        return np.max(np.abs(e - e[0]))

    # the splitting conserves a shadow energy; the true <H> wobbles at O(dt^2)
    coarse = max_drift(0.1, 50)
    fine = max_drift(0.05, 100)
    assert coarse < 1e-4, coarse
    assert 3.0 < coarse / fine < 5.5, (coarse, fine)


def test_unknown_observer_rejected():
    model = pyrazine_2mode()
    grid = GridSpec(n=3, q_min=-5.0, q_max=5.0)
    tg = TimeGrid(dt=0.25, n_steps=4)
    plan = PropagatorPlan(model, grid, tg.dt)
    with pytest.raises(ValueError):
        propagate(plan, initial_state(model, grid), tg, observers=("entropy",))


def test_no_observers_still_returns_state():
    model = pyrazine_2mode()
    grid = GridSpec(n=3, q_min=-5.0, q_max=5.0)
    tg = TimeGrid(dt=0.25, n_steps=4)
    plan = PropagatorPlan(model, grid, tg.dt)
    out = propagate(plan, initial_state(model, grid), tg, observers=())
    assert set(out) == {"state"}


def test_uncoupled_model_keeps_the_upper_population():
    model = dataclasses.replace(pyrazine_4d(), lam=0.0)
    grid = GridSpec(n=3, q_min=-5.0, q_max=5.0)
    tg = TimeGrid(dt=0.5, n_steps=64, sample_stride=8)
    plan = PropagatorPlan(model, grid, tg.dt)
    out = propagate(plan, initial_state(model, grid), tg)
    assert np.max(np.abs(out["population"].p_s2 - 1.0)) < 1e-12


def test_coupled_model_transfers_population():
    model = pyrazine_2mode()
    grid = GridSpec(n=4, q_min=-6.0, q_max=6.0)
    tg = TimeGrid(dt=0.25, n_steps=120, sample_stride=10)
    plan = PropagatorPlan(model, grid, tg.dt)
    out = propagate(plan, initial_state(model, grid), tg)
    assert out["population"].p_s1[-1] > 0.1


def test_populations_and_boundary_helpers():
    model = pyrazine_2mode()
    grid = GridSpec(n=4, q_min=-5.0, q_max=5.0)
    psi = initial_state(model, grid)
    p1, p2 = populations(psi)
    assert p1 == pytest.approx(0.0, abs=1e-14)
    assert p2 == pytest.approx(1.0, abs=1e-12)
    edges = boundary_maxima(psi)
    assert edges.shape == (2,)
    assert np.all(edges >= 0.0)
    assert np.all(edges < 1e-4)

    # a packet displaced toward the wall shows up in the monitor
    q = grid_points(grid)
    shifted = psi.copy()
    gauss = np.exp(-((q - 3.5) ** 2) / 2.0)
    outer = np.einsum("i,j->ij", gauss, gauss)
    shifted.amplitudes[1] = outer / np.linalg.norm(outer)
    assert boundary_maxima(shifted).max() > edges.max()


def test_energy_matches_dense_expectation():
    model = tiny_model()
    grid = GridSpec(n=2, q_min=-5.0, q_max=5.0)
    plan = PropagatorPlan(model, grid, dt=0.1)
    psi = initial_state(model, grid)
    h = dense_hamiltonian(model, grid)
    vec = psi.amplitudes.reshape(-1)
    expected = float(np.real(np.vdot(vec, h @ vec)))
    assert energy(plan, psi) == pytest.approx(expected, abs=1e-10)


def test_zpe_table_values():
    model = pyrazine_4d()
    end16 = GridSpec(n=4, q_min=-5.0, q_max=5.0, convention="endpoint")
    assert zpe(model, end16) == pytest.approx(0.2258500005, abs=1e-8)
    end4 = GridSpec(n=2, q_min=-5.0, q_max=5.0, convention="endpoint")
    assert zpe(model, end4) == pytest.approx(0.6524371769, abs=1e-8)
    # converged value is half the frequency sum
    target = 0.5 * sum(m.omega for m in model.modes)
    wide = GridSpec(n=6, q_min=-20.0, q_max=20.0, convention="endpoint")
    assert zpe(model, wide) == pytest.approx(target, abs=1e-6)


def test_split_orders_registry():
    assert SPLIT_ORDERS == ("potential-first", "kinetic-first")
    model = pyrazine_2mode()
    grid = GridSpec(n=3, q_min=-5.0, q_max=5.0)
    with pytest.raises(ValueError):
        PropagatorPlan(model, grid, dt=0.1, split_order="sideways")
