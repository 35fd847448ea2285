import numpy as np
import pytest

from vibroniq import kernels
from vibroniq.kernels import (
    HAVE_NUMBA,
    MemoryBudgetError,
    allocate_state,
    apply_matrix,
    apply_phase,
    apply_swap,
    backend,
    set_backend,
)


@pytest.fixture()
def both_backends():
    """Yield the list of usable backend names, restoring the original after."""
    before = backend()
    names = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    yield names
    set_backend(before)


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return (v / np.linalg.norm(v)).astype(np.complex128)


def test_allocate_state():
    s = allocate_state(3)
    assert s.shape == (8,)
    assert s.dtype == np.complex128
    assert np.all(s == 0)
    with pytest.raises(MemoryBudgetError):
        allocate_state(40)
    with pytest.raises(MemoryBudgetError):
        allocate_state(10, budget=100)


def test_set_backend_validation():
    before = backend()
    try:
        with pytest.raises(ValueError):
            set_backend("gpu")
        set_backend("numpy")
        assert backend() == "numpy"
    finally:
        set_backend(before)


def test_x_gate_flips_the_low_bit(both_backends):
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    for name in both_backends:
        set_backend(name)
        s = np.zeros(4, dtype=np.complex128)
        s[0] = 1.0
        apply_matrix(s, 2, 0, (), x)
        assert np.allclose(s, [0, 1, 0, 0])
        apply_matrix(s, 2, 1, (), x)
        assert np.allclose(s, [0, 0, 0, 1])


def test_controlled_gate_acts_only_on_matching_states(both_backends):
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    for name in both_backends:
        set_backend(name)
        s = np.zeros(4, dtype=np.complex128)
        s[1] = 1.0  # qubit 0 set, qubit 1 clear
        apply_matrix(s, 2, 1, ((0, 1),), x)
        assert np.allclose(s, [0, 0, 0, 1])
        # open control (polarity 0) fires on the cleared qubit instead
        s = np.zeros(4, dtype=np.complex128)
        s[0] = 1.0
        apply_matrix(s, 2, 1, ((0, 0),), x)
        assert np.allclose(s, [0, 0, 1, 0])


def test_phase_touches_only_the_fixed_subspace(both_backends):
    for name in both_backends:
        set_backend(name)
        s = np.ones(8, dtype=np.complex128)
        apply_phase(s, 3, ((0, 1), (2, 1)), 1j)
        expected = np.ones(8, dtype=np.complex128)
        for idx in range(8):
            if idx & 1 and idx & 4:
                expected[idx] = 1j
        assert np.allclose(s, expected)


def test_phase_with_every_qubit_fixed(both_backends):
    # fully specified index: the kernel must update exactly one amplitude
    for name in both_backends:
        set_backend(name)
        s = np.ones(8, dtype=np.complex128)
        apply_phase(s, 3, ((0, 1), (1, 0), (2, 1)), -1.0)
        expected = np.ones(8, dtype=np.complex128)
        expected[0b101] = -1.0
        assert np.allclose(s, expected)


def test_global_phase_shortcut(both_backends):
    for name in both_backends:
        set_backend(name)
        s = np.ones(4, dtype=np.complex128)
        apply_phase(s, 2, (), 1j)
        assert np.allclose(s, 1j * np.ones(4))


def test_swap_permutes_indices(both_backends):
    for name in both_backends:
        set_backend(name)
        s = np.arange(8, dtype=np.complex128)
        apply_swap(s, 3, 0, 2, ())
        expected = np.arange(8, dtype=np.complex128)
        expected[[1, 4]] = expected[[4, 1]]
        expected[[3, 6]] = expected[[6, 3]]
        assert np.allclose(s, expected)


def test_controlled_swap(both_backends):
    for name in both_backends:
        set_backend(name)
        s = np.arange(16, dtype=np.complex128)
        apply_swap(s, 4, 0, 1, ((3, 1),))
        expected = np.arange(16, dtype=np.complex128)
        expected[[9, 10]] = expected[[10, 9]]
        expected[[13, 14]] = expected[[14, 13]]
        assert np.allclose(s, expected)


def test_backends_agree_on_random_circuits(rng):
    if not HAVE_NUMBA:
        pytest.skip("numba backend unavailable")
    n = 6
    ops = []
    for _ in range(60):
        kind = rng.integers(0, 3)
        qubits = rng.permutation(n)
        if kind == 0:
            th = rng.normal()
            mat = np.array(
                [[np.cos(th / 2), -1j * np.sin(th / 2)], [-1j * np.sin(th / 2), np.cos(th / 2)]],
                dtype=np.complex128,
            )
            ctrl = tuple((int(q), int(rng.integers(0, 2))) for q in qubits[1 : 1 + rng.integers(0, 3)])
            ops.append(("mat", int(qubits[0]), ctrl, mat))
        elif kind == 1:
            fixed = tuple((int(q), int(rng.integers(0, 2))) for q in qubits[: rng.integers(0, n + 1)])
            ops.append(("phase", fixed, np.exp(1j * rng.normal())))
        else:
            ctrl = tuple((int(q), int(rng.integers(0, 2))) for q in qubits[2 : 2 + rng.integers(0, 2)])
            ops.append(("swap", int(qubits[0]), int(qubits[1]), ctrl))

    start = random_state(n, rng)
    results = {}
    before = backend()
    try:
        for name in ("numpy", "numba"):
            set_backend(name)
            s = start.copy()
            for op in ops:
                if op[0] == "mat":
                    apply_matrix(s, n, op[1], op[2], op[3])
                elif op[0] == "phase":
                    apply_phase(s, n, op[1], op[2])
                else:
                    apply_swap(s, n, op[1], op[2], op[3])
            results[name] = s
    finally:
        set_backend(before)
    assert np.max(np.abs(results["numpy"] - results["numba"])) < 1e-12


def test_matrix_preserves_norm(both_backends, rng):
    th = 0.7
    ry = np.array(
        [[np.cos(th / 2), -np.sin(th / 2)], [np.sin(th / 2), np.cos(th / 2)]],
        dtype=np.complex128,
    )
    for name in both_backends:
        set_backend(name)
        s = random_state(5, rng)
        apply_matrix(s, 5, 2, ((4, 1), (0, 0)), ry)
        assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)


def test_env_flag_is_documented():
    # the disable flag is honored at import time; here we can only pin the
    # public switch it feeds
    assert kernels.backend() in ("numpy", "numba")
    assert HAVE_NUMBA in (True, False)
