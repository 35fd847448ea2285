"""Gate-level circuit builders plus a statevector emulator.

Depth accounting: every gate carries a layer id declared by its builder, and
depth(circuit) is the number of distinct layers. Builders declare layers the
way the cost tables count them (register-parallel blocks share ids, phase
networks are sequential); gates sharing a layer always commute, so replaying
layer by layer equals replaying the gate list.

Qubit layout: mode register r occupies qubits [r*n, (r+1)*n) with qubit r*n+i
carrying weight 2^i, the electronic qubit sits at d*n (|0> is S1, |1> is S2),
an optional Hadamard-test ancilla at d*n+1, and any phase-readout register
above that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import GridSpec, TimeGrid, VibronicModel, Wavepacket, grid_points, initial_state
from . import soft as _soft

PARAM_KINDS = ("U1", "RY", "RX")
FIXED_KINDS = ("H", "X", "S", "SWAP")
KINDS = PARAM_KINDS + FIXED_KINDS

_H_MAT = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_X_MAT = np.array([[0, 1], [1, 0]], dtype=np.complex128)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    """One gate: base kind, target qubit(s), control (qubit, polarity) list."""

    kind: str
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    theta: float | None = None
    layer: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        want_targets = 2 if self.kind == "SWAP" else 1
        if len(self.targets) != want_targets or len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"{self.kind} needs {want_targets} distinct target(s), got {self.targets}")
        if self.kind in PARAM_KINDS:
            if self.theta is None or not math.isfinite(self.theta):
                raise CircuitError(f"{self.kind} needs a finite angle, got {self.theta}")
        elif self.theta is not None:
            raise CircuitError(f"{self.kind} takes no angle")
        cqubits = [q for q, _ in self.controls]
        if len(set(cqubits)) != len(cqubits) or set(cqubits) & set(self.targets):
            raise CircuitError(f"controls {self.controls} must be distinct and disjoint from targets")
        for _, pol in self.controls:
            if pol not in (0, 1):
                raise CircuitError(f"control polarity must be 0 or 1, got {pol}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)


class Circuit:
    """Ordered gate list over a fixed qubit count, with declared layers."""

    def __init__(self, n_qubits: int, global_phase: float = 0.0):
        if n_qubits < 1:
            raise CircuitError(f"need at least one qubit, got {n_qubits}")
        self.n_qubits = n_qubits
        self.global_phase = global_phase
        self.gates: list[Gate] = []
        self._layer = -1

    def new_layer(self) -> int:
        self._layer += 1
        return self._layer

    def add(self, kind, targets, controls=(), theta=None, layer=None) -> Gate:
        if layer is None:
            layer = self.new_layer()
        else:
            self._layer = max(self._layer, layer)
        gate = Gate(kind, tuple(targets), tuple(tuple(c) for c in controls), theta, layer)
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"qubit {q} outside the {self.n_qubits}-qubit circuit")
        self.gates.append(gate)
        return gate

    def depth(self) -> int:
        return len({g.layer for g in self.gates})

    def gate_count(self) -> int:
        return len(self.gates)

    def layers(self) -> list[list[Gate]]:
        order: dict[int, list[Gate]] = {}
        for g in self.gates:
            order.setdefault(g.layer, []).append(g)
        return [order[k] for k in sorted(order)]

    def append_circuit(self, other: "Circuit", qubit_map=None) -> None:
        """Concatenate another circuit; its layers land after the current ones."""
        offset = self._layer + 1
        for g in other.gates:
            targets = g.targets if qubit_map is None else tuple(qubit_map[q] for q in g.targets)
            controls = (
                g.controls
                if qubit_map is None
                else tuple((qubit_map[q], p) for q, p in g.controls)
            )
            self.add(g.kind, targets, controls, g.theta, layer=g.layer + offset)
        self.global_phase += other.global_phase

    def controlled(self, control: int, polarity: int = 1) -> "Circuit":
        """Every gate gains `control`; the global phase becomes a U1 there."""
        if polarity != 1:
            raise CircuitError("controlled() supports polarity 1 only")
        out = Circuit(max(self.n_qubits, control + 1))
        for g in self.gates:
            if control in g.qubits:
                raise CircuitError(f"control qubit {control} already used by {g}")
            out.add(g.kind, g.targets, g.controls + ((control, 1),), g.theta, layer=g.layer)
        if self.global_phase != 0.0:
            out.add("U1", (control,), theta=self.global_phase, layer=out._layer + 1)
        return out

    def inverse(self) -> "Circuit":
        """Reversed circuit; layer structure is mirrored so depth is unchanged."""
        out = Circuit(self.n_qubits, -self.global_phase)
        top = max((g.layer for g in self.gates), default=0)
        for g in reversed(self.gates):
            if g.kind in PARAM_KINDS:
                out.add(g.kind, g.targets, g.controls, -g.theta, layer=top - g.layer)
            elif g.kind == "S":
                out.add("U1", g.targets, g.controls, -math.pi / 2, layer=top - g.layer)
            else:
                out.add(g.kind, g.targets, g.controls, layer=top - g.layer)
        return out


def _rx_mat(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry_mat(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def apply(circuit: Circuit, state: np.ndarray, control_context=None) -> np.ndarray:
    """Run the circuit over `state` in place (and return it).

    `state` may live on more qubits than the circuit uses. When
    control_context=(qubit, polarity) is given, every gate and the global
    phase act only where that qubit has the given value.
    """
    n_state = state.size.bit_length() - 1
    if state.size != 1 << n_state or state.ndim != 1:
        raise CircuitError(f"state length {state.size} is not a power of two")
    if n_state < circuit.n_qubits:
        raise CircuitError(f"state has {n_state} qubits, circuit needs {circuit.n_qubits}")
    extra = () if control_context is None else (tuple(control_context),)
    for g in circuit.gates:
        controls = g.controls + extra
        if g.kind == "U1":
            kernels.apply_phase(state, n_state, controls + ((g.targets[0], 1),), np.exp(1j * g.theta))
        elif g.kind == "S":
            kernels.apply_phase(state, n_state, controls + ((g.targets[0], 1),), 1j)
        elif g.kind == "SWAP":
            kernels.apply_swap(state, n_state, g.targets[0], g.targets[1], controls)
        elif g.kind == "H":
            kernels.apply_matrix(state, n_state, g.targets[0], controls, _H_MAT)
        elif g.kind == "X":
            kernels.apply_matrix(state, n_state, g.targets[0], controls, _X_MAT)
        elif g.kind == "RX":
            kernels.apply_matrix(state, n_state, g.targets[0], controls, _rx_mat(g.theta))
        else:  # RY
            kernels.apply_matrix(state, n_state, g.targets[0], controls, _ry_mat(g.theta))
    if circuit.global_phase != 0.0:
        phase = np.exp(1j * circuit.global_phase)
        kernels.apply_phase(state, n_state, extra, phase)
    return state


def unitary_of(circuit: Circuit, n_qubits: int | None = None) -> np.ndarray:
    """Dense matrix of a small circuit, column by column."""
    n = circuit.n_qubits if n_qubits is None else n_qubits
    if n > 14:
        raise CircuitError(f"refusing a dense unitary on {n} qubits")
    dim = 1 << n
    u = np.zeros((dim, dim), dtype=np.complex128)
    for col in range(dim):
        vec = np.zeros(dim, dtype=np.complex128)
        vec[col] = 1.0
        u[:, col] = apply(circuit, vec)
    return u


@dataclass(frozen=True)
class QubitLayout:
    """Qubit numbering for d mode registers of n qubits plus bookkeeping qubits."""

    d: int
    n: int
    ancilla: bool = False
    time_bits: int = 0

    def mode_qubits(self, r: int) -> tuple[int, ...]:
        return tuple(range(r * self.n, (r + 1) * self.n))

    @property
    def electronic(self) -> int:
        return self.d * self.n

    @property
    def ancilla_qubit(self) -> int:
        if not self.ancilla:
            raise CircuitError("layout has no ancilla")
        return self.d * self.n + 1

    @property
    def time_qubits(self) -> tuple[int, ...]:
        base = self.d * self.n + 1 + (1 if self.ancilla else 0)
        return tuple(range(base, base + self.time_bits))

    @property
    def total(self) -> int:
        return self.d * self.n + 1 + (1 if self.ancilla else 0) + self.time_bits


# ---------------------------------------------------------------------------
# State preparation from nonnegative amplitudes (uniformly controlled Ry tree)
# ---------------------------------------------------------------------------


def prep_angles(amplitudes: np.ndarray) -> list[tuple[int, np.ndarray]]:
    """Ry angle blocks ((target bit, angles)), from most significant bit down.

    Block angles are the Gray-code mix of the conditional half-split angles
    alpha_w = 2*arcsin of the square root of the upper-half probability share.
    """
    probs = np.asarray(amplitudes, dtype=float) ** 2
    n = probs.size.bit_length() - 1
    if probs.size != 1 << n:
        raise CircuitError(f"amplitude count {probs.size} is not a power of two")
    blocks = []
    for t in range(n - 1, -1, -1):
        j = n - 1 - t
        alphas = np.empty(1 << j)
        for w in range(1 << j):
            den = probs[w << (t + 1) : (w + 1) << (t + 1)].sum()
            num = probs[(2 * w + 1) << t : (2 * w + 2) << t].sum()
            alphas[w] = 0.0 if den <= 0.0 else 2.0 * math.asin(math.sqrt(min(1.0, num / den)))
        if j == 0:
            thetas = alphas
        else:
            m = np.empty((1 << j, 1 << j))
            for k in range(1 << j):
                gray = k ^ (k >> 1)
                for w in range(1 << j):
                    sign = -1.0 if bin(w & gray).count("1") % 2 else 1.0
                    m[k, w] = sign / (1 << j)
            thetas = m @ alphas
        blocks.append((t, thetas))
    return blocks


def _gray_cnot_controls(j: int) -> list[int]:
    """Control-bit index (within the j control bits) after each Ry of a block."""
    out = []
    for k in range(1, 1 << j):
        out.append((k & -k).bit_length() - 1)
    out.append(j - 1)
    return out


def build_state_prep(n: int, amplitudes: np.ndarray) -> Circuit:
    """Circuit taking |0..0> to the given real nonnegative amplitude vector.

    Gate depth is exactly 2^(n+1) - 3; every gate sits in its own layer.
    """
    amps = np.asarray(amplitudes, dtype=float)
    if amps.size != 1 << n:
        raise CircuitError(f"expected {1 << n} amplitudes, got {amps.size}")
    if np.any(amps < 0):
        raise CircuitError("amplitudes must be nonnegative")
    if abs(np.sum(amps**2) - 1.0) > 1e-9:
        raise CircuitError(f"amplitudes must be normalized, norm^2 = {np.sum(amps**2)!r}")
    circ = Circuit(n)
    for t, thetas in prep_angles(amps):
        j = n - 1 - t
        if j == 0:
            circ.add("RY", (t,), theta=float(thetas[0]))
            continue
        ctrl_bits = _gray_cnot_controls(j)
        for k in range(1 << j):
            circ.add("RY", (t,), theta=float(thetas[k]))
            circ.add("X", (t,), controls=((t + 1 + ctrl_bits[k], 1),))
    return circ


def prepare_wavepacket(model: VibronicModel, grid: GridSpec) -> Circuit:
    """Full-register preparation: parallel per-mode Gaussian cascades plus the
    electronic flip onto S2. Depth equals the single-register prep depth."""
    layout = QubitLayout(model.d, grid.n)
    q = grid_points(grid)
    amps = np.exp(-q**2 / 2.0)
    amps = amps / np.linalg.norm(amps)
    base = build_state_prep(grid.n, amps)
    circ = Circuit(layout.total)
    circ.add("X", (layout.electronic,), layer=0)
    for r in range(model.d):
        qmap = layout.mode_qubits(r)
        for g in base.gates:
            circ.add(
                g.kind,
                tuple(qmap[t] for t in g.targets),
                tuple((qmap[c], p) for c, p in g.controls),
                g.theta,
                layer=g.layer,
            )
    return circ


# ---------------------------------------------------------------------------
# Diagonal potential, coupling, and kinetic phase circuits
# ---------------------------------------------------------------------------


def _branch_coeffs(model: VibronicModel, grid: GridSpec) -> dict:
    """Index-polynomial coefficients of V_s(Q(idx)) per mode and branch.

    Returns quad[k] (branch free), lin[s][k], const[s]; bilinear gamma terms
    contribute their affine corrections to lin/const so the pair circuits
    stay purely quadratic in the register indices.
    """
    q0 = grid.q_min
    dq = grid.dq
    quad = []
    lin = [[], []]
    const = [-model.delta, model.delta]
    for mode in model.modes:
        quad.append(0.5 * mode.omega * dq * dq)
        for s in range(2):
            kappa = 0.0
            if mode.kappa1 is not None:
                kappa = mode.kappa1 if s == 0 else mode.kappa2
            lin[s].append(mode.omega * q0 * dq + kappa * dq)
            const[s] += 0.5 * mode.omega * q0 * q0 + kappa * q0
    for pair in model.bilinear_diag:
        for s, gamma in ((0, pair.gamma1), (1, pair.gamma2)):
            lin[s][pair.l] += gamma * q0 * dq
            lin[s][pair.m] += gamma * q0 * dq
            const[s] += gamma * q0 * q0
    return {"quad": quad, "lin": lin, "const": const}


def _add_quadratic_network(circ: Circuit, qubits, theta: float, layers, signed: bool = False) -> None:
    """U1/CU1 phase network for theta * idx^2 over one register.

    `layers` supplies the shared layer ids (n singles then n(n-1) pairs);
    signed=True uses the two's-complement index with a negative top bit.
    """
    n = len(qubits)
    coeff = [float(1 << i) for i in range(n)]
    if signed:
        coeff[n - 1] = -coeff[n - 1]
    li = iter(layers)
    for i in range(n):
        circ.add("U1", (qubits[i],), theta=theta * coeff[i] * coeff[i], layer=next(li))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            circ.add(
                "U1",
                (qubits[j],),
                controls=((qubits[i], 1),),
                theta=theta * coeff[i] * coeff[j],
                layer=next(li),
            )


def build_Udiag(model: VibronicModel, grid: GridSpec, dt: float, branch: str) -> Circuit:
    """Register-diagonal phases of exp(-i V_branch dt / (2 hbar)), branch "S1"/"S2".

    Acts on the d*n register qubits only; the constant term becomes the
    circuit's global phase. Used as the emulation oracle for one branch; the
    time step assembles both branches via build_Udiag_pair.
    """
    if branch not in ("S1", "S2"):
        raise CircuitError(f"branch must be S1 or S2, got {branch!r}")
    s = 0 if branch == "S1" else 1
    co = _branch_coeffs(model, grid)
    pref = -dt / (2.0 * model.hbar)
    n = grid.n
    circ = Circuit(model.d * n)
    circ.global_phase = pref * co["const"][s]
    for k in range(model.d):
        qubits = list(range(k * n, (k + 1) * n))
        layers = [circ.new_layer() for _ in range(n * n)]
        _add_quadratic_network(circ, qubits, pref * co["quad"][k], layers)
        lin_layer = circ.new_layer()
        for i in range(n):
            circ.add("U1", (qubits[i],), theta=pref * co["lin"][s][k] * (1 << i), layer=lin_layer)
    for pair in model.bilinear_diag:
        gamma = pair.gamma1 if s == 0 else pair.gamma2
        theta = 2.0 * pref * gamma * grid.dq * grid.dq
        for i in range(n):
            for j in range(n):
                circ.add(
                    "U1",
                    (pair.m * n + j,),
                    controls=((pair.l * n + i, 1),),
                    theta=theta * (1 << i) * (1 << j) / 2.0,
                )
    return circ


def build_Udiag_pair(model: VibronicModel, grid: GridSpec, dt: float) -> Circuit:
    """Both-branch diagonal potential phases for half a step, n^2 + 5 layers.

    Constant layer pattern U1-X-U1-X on the electronic qubit (4 layers), one
    shared layer of branch-controlled linear phases, and the branch-free
    quadratic network (n^2 layers shared across mode registers).
    """
    co = _branch_coeffs(model, grid)
    pref = -dt / (2.0 * model.hbar)
    n = grid.n
    layout = QubitLayout(model.d, n)
    elec = layout.electronic
    circ = Circuit(layout.total)
    circ.add("U1", (elec,), theta=pref * co["const"][1])
    circ.add("X", (elec,))
    circ.add("U1", (elec,), theta=pref * co["const"][0])
    circ.add("X", (elec,))
    lin_layer = circ.new_layer()
    for k in range(model.d):
        qubits = layout.mode_qubits(k)
        for i in range(n):
            for s, pol in ((0, 0), (1, 1)):
                circ.add(
                    "U1",
                    (qubits[i],),
                    controls=((elec, pol),),
                    theta=pref * co["lin"][s][k] * (1 << i),
                    layer=lin_layer,
                )
    quad_layers = [circ.new_layer() for _ in range(n * n)]
    for k in range(model.d):
        _add_quadratic_network(circ, layout.mode_qubits(k), pref * co["quad"][k], quad_layers)
    return circ


def build_Uc(model: VibronicModel, grid: GridSpec, dt: float) -> Circuit:
    """Linear interstate coupling exp(-i lam Q_c X dt / (2 hbar)), depth n.

    Rx gates on the electronic qubit controlled by the coupling-mode register
    bits; the grid-offset rotation shares the first layer (same axis, same
    target, commuting).
    """
    layout = QubitLayout(model.d, grid.n)
    circ = Circuit(layout.total)
    if model.lam == 0.0:
        return circ
    axis = model.coupling_mode
    qubits = layout.mode_qubits(axis)
    elec = layout.electronic
    scale = model.lam * dt / model.hbar
    first = None
    for i in range(grid.n):
        layer = circ.new_layer()
        if first is None:
            first = layer
        circ.add("RX", (elec,), controls=((qubits[i], 1),), theta=scale * grid.dq * (1 << i), layer=layer)
    if grid.q_min != 0.0:
        circ.add("RX", (elec,), theta=scale * grid.q_min, layer=first)
    return circ


def build_UK(model: VibronicModel, grid: GridSpec, dt: float) -> Circuit:
    """Kinetic phases exp(-i K dt / hbar) in the transformed (momentum) basis.

    The quadratic network runs over the signed two's-complement index, n^2
    layers shared across mode registers; no electronic involvement.
    """
    n = grid.n
    layout = QubitLayout(model.d, n)
    circ = Circuit(model.d * n)
    base = 2.0 * math.pi / (grid.size * grid.dq)
    layers = [circ.new_layer() for _ in range(n * n)]
    for k, mode in enumerate(model.modes):
        theta = -0.5 * mode.omega * base * base * dt / model.hbar
        _add_quadratic_network(circ, layout.mode_qubits(k), theta, layers, signed=True)
    return circ


def build_qft(n: int, inverse: bool = False) -> Circuit:
    """Quantum Fourier transform on one n-qubit register, F|j> = sum_k e^{2 pi i jk/N}|k>/sqrt(N).

    n Hadamards, n(n-1)/2 controlled phases, floor(n/2) swaps, one layer each.
    """
    circ = Circuit(n)
    sign = -1.0 if inverse else 1.0
    if inverse:
        for i in range(n // 2):
            circ.add("SWAP", (i, n - 1 - i))
        for t in range(n):
            for c in range(t - 1, -1, -1):
                circ.add("U1", (t,), controls=((c, 1),), theta=sign * math.pi / (1 << (t - c)))
            circ.add("H", (t,))
    else:
        for t in range(n - 1, -1, -1):
            circ.add("H", (t,))
            for c in range(t - 1, -1, -1):
                circ.add("U1", (t,), controls=((c, 1),), theta=sign * math.pi / (1 << (t - c)))
        for i in range(n // 2):
            circ.add("SWAP", (i, n - 1 - i))
    return circ


def _qft_all(model: VibronicModel, grid: GridSpec, inverse: bool) -> Circuit:
    """QFT applied to every mode register in parallel layers."""
    layout = QubitLayout(model.d, grid.n)
    base = build_qft(grid.n, inverse)
    circ = Circuit(layout.total)
    for r in range(model.d):
        qmap = layout.mode_qubits(r)
        for g in base.gates:
            circ.add(
                g.kind,
                tuple(qmap[t] for t in g.targets),
                tuple((qmap[c], p) for c, p in g.controls),
                g.theta,
                layer=g.layer,
            )
    return circ


# ---------------------------------------------------------------------------
# Bilinear pair circuits (second-order models)
# ---------------------------------------------------------------------------


def build_bilinear_diag(grid: GridSpec, d: int, l: int, m: int, gamma: float, dt: float) -> Circuit:
    """exp(-i gamma Q_l Q_m dt / hbar) as n^2 cross-register controlled phases.

    Affine idx->Q corrections (when the grid origin is nonzero) appear as one
    extra layer of linear phases plus a global phase; on a zero-origin grid
    the depth is exactly n^2.
    """
    if l == m:
        raise CircuitError("bilinear pair must couple distinct modes")
    n = grid.n
    circ = Circuit(d * n)
    pref = -gamma * dt / kernels_hbar_default()
    q0, dq = grid.q_min, grid.dq
    for i in range(n):
        for j in range(n):
            circ.add(
                "U1",
                (m * n + j,),
                controls=((l * n + i, 1),),
                theta=pref * dq * dq * (1 << i) * (1 << j),
            )
    if q0 != 0.0:
        lin_layer = circ.new_layer()
        for reg in (l, m):
            for i in range(n):
                circ.add("U1", (reg * n + i,), theta=pref * q0 * dq * (1 << i), layer=lin_layer)
        circ.global_phase += pref * q0 * q0
    return circ


def kernels_hbar_default() -> float:
    from .model import HBAR_EV_FS

    return HBAR_EV_FS


def build_bilinear_offdiag(grid: GridSpec, d: int, l: int, m: int, mu: float, dt: float) -> Circuit:
    """exp(-i mu Q_l Q_m X dt / hbar) on the electronic qubit.

    n^2 doubly controlled Rx gates; affine corrections fold into one layer of
    singly controlled and plain Rx gates (all the same axis, commuting).
    """
    if l == m:
        raise CircuitError("bilinear pair must couple distinct modes")
    n = grid.n
    layout = QubitLayout(d, n)
    circ = Circuit(layout.total)
    elec = layout.electronic
    scale = 2.0 * mu * dt / kernels_hbar_default()
    q0, dq = grid.q_min, grid.dq
    for i in range(n):
        for j in range(n):
            circ.add(
                "RX",
                (elec,),
                controls=((l * n + i, 1), (m * n + j, 1)),
                theta=scale * dq * dq * (1 << i) * (1 << j),
            )
    if q0 != 0.0:
        lin_layer = circ.new_layer()
        for reg in (l, m):
            for i in range(n):
                circ.add(
                    "RX",
                    (elec,),
                    controls=((reg * n + i, 1),),
                    theta=scale * q0 * dq * (1 << i),
                    layer=lin_layer,
                )
        circ.add("RX", (elec,), theta=scale * q0 * q0, layer=lin_layer)
    return circ


def decompose_ccrx(gate: Gate) -> list[Gate]:
    """Expand a doubly controlled Rx into 5 two-qubit gates (exact)."""
    if gate.kind != "RX" or len(gate.controls) != 2:
        raise CircuitError(f"expected a doubly controlled RX, got {gate}")
    (a, pa), (b, pb) = gate.controls
    if pa != 1 or pb != 1:
        raise CircuitError("decomposition assumes on-|1> controls")
    t = gate.targets[0]
    half = gate.theta / 2.0
    lay = gate.layer
    return [
        Gate("RX", (t,), ((b, 1),), half, lay),
        Gate("X", (b,), ((a, 1),), None, lay + 1),
        Gate("RX", (t,), ((b, 1),), -half, lay + 2),
        Gate("X", (b,), ((a, 1),), None, lay + 3),
        Gate("RX", (t,), ((a, 1),), half, lay + 4),
    ]


def schedule_bilinear_diag(model: VibronicModel) -> list[list[int]]:
    """Partition the on-diagonal bilinear pairs into mode-disjoint groups.

    Within each symmetry clique the pairs follow the round-robin tournament
    coloring; cliques with several rounds share the leading group slots
    (their modes never clash across symmetries), while single-round cliques
    are gathered into one trailing group. This reproduces the six-group
    schedule the cost table assumes for the full second-order mode set.
    """
    by_sym: dict[str, list[int]] = {}
    for idx, pair in enumerate(model.bilinear_diag):
        by_sym.setdefault(model.modes[pair.l].symmetry, []).append(idx)
    multi: list[list[list[int]]] = []
    single: list[list[int]] = []
    for _sym, indices in sorted(by_sym.items()):
        rounds = _round_robin_rounds(model, indices)
        if len(rounds) > 1:
            multi.append(rounds)
        else:
            single.extend(rounds)
    n_groups = max((len(r) for r in multi), default=0)
    groups: list[list[int]] = [[] for _ in range(n_groups)]
    for rounds in multi:
        for g, rnd in enumerate(rounds):
            groups[g].extend(rnd)
    if single:
        trailing: list[int] = []
        for rnd in single:
            trailing.extend(rnd)
        groups.append(trailing)
    return [g for g in groups if g]


def _round_robin_rounds(model: VibronicModel, pair_indices: list[int]) -> list[list[int]]:
    """Tournament rounds (mode-disjoint matchings) for one clique of pairs."""
    verts = sorted({v for idx in pair_indices for v in (model.bilinear_diag[idx].l, model.bilinear_diag[idx].m)})
    v = len(verts)
    pos = {m: i for i, m in enumerate(verts)}
    lookup = {}
    for idx in pair_indices:
        p = model.bilinear_diag[idx]
        lookup[frozenset((pos[p.l], pos[p.m]))] = idx
    rounds: list[list[int]] = []
    if v % 2 == 1:
        for r in range(v):
            rnd = []
            for a in range(v):
                for b in range(a + 1, v):
                    if (a + b) % v == r and frozenset((a, b)) in lookup:
                        rnd.append(lookup[frozenset((a, b))])
            if rnd:
                rounds.append(rnd)
    else:
        hub = v - 1
        for r in range(v - 1):
            rnd = []
            key = frozenset((hub, r))
            if key in lookup:
                rnd.append(lookup[key])
            for i in range(1, (v - 1) // 2 + 1):
                a = (r + i) % (v - 1)
                b = (r - i) % (v - 1)
                key = frozenset((a, b))
                if a != b and key in lookup:
                    rnd.append(lookup[key])
            if rnd:
                rounds.append(rnd)
    return rounds


# ---------------------------------------------------------------------------
# One Trotter step
# ---------------------------------------------------------------------------


def build_timestep(
    model: VibronicModel,
    grid: GridSpec,
    dt: float,
    split_order: str = "potential-first",
) -> Circuit:
    """One dt step as counted by the cost tables.

    potential-first holds the state in the position basis and is the
    palindrome Udiag Uc QFT UK QFT' Uc Udiag. kinetic-first holds the state
    in the transformed basis (an outer QFT pair belongs to the caller) and
    runs UK/2 QFT' V QFT UK/2 with the full-step potential applied once,
    bilinear groups included and every doubly controlled Rx expanded.
    """
    if split_order not in _soft.SPLIT_ORDERS:
        raise CircuitError(f"unknown split order {split_order!r}")
    layout = QubitLayout(model.d, grid.n)
    circ = Circuit(layout.total)
    if split_order == "potential-first":
        if model.bilinear_diag or model.bilinear_off:
            raise CircuitError("bilinear terms use the kinetic-first split")
        circ.append_circuit(build_Udiag_pair(model, grid, dt))
        circ.append_circuit(build_Uc(model, grid, dt))
        circ.append_circuit(_qft_all(model, grid, inverse=False))
        circ.append_circuit(build_UK(model, grid, dt), qubit_map=list(range(model.d * grid.n)))
        circ.append_circuit(_qft_all(model, grid, inverse=True))
        circ.append_circuit(build_Uc(model, grid, dt))
        circ.append_circuit(build_Udiag_pair(model, grid, dt))
        return circ
    circ.append_circuit(build_UK(model, grid, dt / 2.0), qubit_map=list(range(model.d * grid.n)))
    circ.append_circuit(_qft_all(model, grid, inverse=True))
    circ.append_circuit(build_Udiag_pair(model, grid, 2.0 * dt))
    _append_bilinear_diag_groups(circ, model, grid, dt)
    uc = build_Uc(model, grid, 2.0 * dt)
    circ.append_circuit(uc)
    fold_layer = circ._layer if uc.gates else None
    _append_bilinear_offdiag(circ, model, grid, dt, fold_layer)
    circ.append_circuit(_qft_all(model, grid, inverse=False))
    circ.append_circuit(build_UK(model, grid, dt / 2.0), qubit_map=list(range(model.d * grid.n)))
    return circ


def _append_bilinear_diag_groups(circ: Circuit, model: VibronicModel, grid: GridSpec, dt: float) -> None:
    """Grouped on-diagonal bilinear phases; n^2 shared layers per group.

    Affine corrections already live in the Udiag coefficients, so each pair
    contributes the pure cross-register quadratic. Branch-split gammas ride
    the same layers as an open/closed controlled pair.
    """
    n = grid.n
    elec = QubitLayout(model.d, n).electronic
    pref = -dt / model.hbar
    for group in schedule_bilinear_diag(model):
        layers = [circ.new_layer() for _ in range(n * n)]
        for idx in group:
            pair = model.bilinear_diag[idx]
            li = iter(layers)
            for i in range(n):
                for j in range(n):
                    layer = next(li)
                    theta_base = pref * grid.dq * grid.dq * (1 << i) * (1 << j)
                    if pair.gamma1 == pair.gamma2:
                        circ.add(
                            "U1",
                            (pair.m * n + j,),
                            controls=((pair.l * n + i, 1),),
                            theta=pair.gamma1 * theta_base,
                            layer=layer,
                        )
                    else:
                        for gamma, pol in ((pair.gamma1, 0), (pair.gamma2, 1)):
                            circ.add(
                                "U1",
                                (pair.m * n + j,),
                                controls=((pair.l * n + i, 1), (elec, pol)),
                                theta=gamma * theta_base,
                                layer=layer,
                            )


def _append_bilinear_offdiag(
    circ: Circuit, model: VibronicModel, grid: GridSpec, dt: float, fold_layer: int | None
) -> None:
    """Off-diagonal bilinear couplings, each CCRx expanded to 5 gates.

    Affine idx->Q corrections are same-axis rotations on the electronic
    qubit, so they ride the coupling block's layer (`fold_layer`) when one
    exists; otherwise they claim a single fresh layer.
    """
    if not model.bilinear_off:
        return
    n = grid.n
    layout = QubitLayout(model.d, n)
    elec = layout.electronic
    q0, dq = grid.q_min, grid.dq
    if q0 != 0.0:
        extra = fold_layer if fold_layer is not None else circ.new_layer()
        for pair in model.bilinear_off:
            scale = 2.0 * pair.mu * dt / model.hbar
            for reg in (pair.l, pair.m):
                for i in range(n):
                    circ.add(
                        "RX",
                        (elec,),
                        controls=((reg * n + i, 1),),
                        theta=scale * q0 * dq * (1 << i),
                        layer=extra,
                    )
            circ.add("RX", (elec,), theta=scale * q0 * q0, layer=extra)
    for pair in model.bilinear_off:
        scale = 2.0 * pair.mu * dt / model.hbar
        for i in range(n):
            for j in range(n):
                theta = scale * dq * dq * (1 << i) * (1 << j)
                ccrx = Gate(
                    "RX",
                    (elec,),
                    ((pair.l * n + i, 1), (pair.m * n + j, 1)),
                    theta,
                    layer=0,
                )
                base = circ._layer + 1
                for g in decompose_ccrx(ccrx):
                    circ.add(g.kind, g.targets, g.controls, g.theta, layer=base + g.layer)


# ---------------------------------------------------------------------------
# Statevector <-> wavepacket and the circuit-engine propagator
# ---------------------------------------------------------------------------


def wavepacket_to_state(psi: Wavepacket, n_extra: int = 0) -> np.ndarray:
    """Flatten (2, N, ..., N) amplitudes into the emulator's basis ordering.

    Mode 0 occupies the lowest qubits, so its grid axis must vary fastest;
    n_extra adds |0> bookkeeping qubits above the electronic one.
    """
    amp = psi.amplitudes
    d = amp.ndim - 1
    n = (amp.shape[1]).bit_length() - 1
    flat = np.transpose(amp, (0,) + tuple(range(d, 0, -1))).reshape(-1)
    state = kernels.allocate_state(d * n + 1 + n_extra)
    state[: flat.size] = flat
    return state

def state_to_wavepacket(state: np.ndarray, d: int, n: int) -> Wavepacket:
    """Inverse of wavepacket_to_state; ignores any qubits above the electronic."""
    size = 1 << (d * n + 1)
    block = np.asarray(state[:size]).reshape((2,) + (1 << n,) * d)
    amp = np.transpose(block, (0,) + tuple(range(d, 0, -1))).copy()
    return Wavepacket(amp)

def circuit_propagate(
    model: VibronicModel,
    grid: GridSpec,
    time_grid: TimeGrid,
    split_order: str = "potential-first",
    observers: tuple = ("autocorr", "population"),
) -> dict:
    """Propagate through repeated emulated time-step circuits.

    Matches soft.propagate's observer records. The kinetic-first branch holds
    the state in the transformed basis between steps (one QFT pair at the
    walls), converting copies back for position-space observers.
    """
    step_circ = build_timestep(model, grid, time_grid.dt, split_order)
    psi0 = initial_state(model, grid)
    state = wavepacket_to_state(psi0)
    ref = state.copy()
    momentum_held = split_order == "kinetic-first"
    if momentum_held:
        fwd = _qft_all(model, grid, inverse=False)
        back = _qft_all(model, grid, inverse=True)
        apply(fwd, state)
        ref = state.copy()
    want = set(observers)
    sample_steps = time_grid.sample_steps()
    times = sample_steps * time_grid.dt
    autocorr = np.zeros(len(sample_steps), dtype=np.complex128) if "autocorr" in want else None
    pops = np.zeros((len(sample_steps), 2)) if "population" in want else None
    boundary = np.zeros((len(sample_steps), model.d)) if "boundary" in want else None
    cursor = 0

    def record(k: int) -> None:
        nonlocal cursor
        if autocorr is not None:
            autocorr[cursor] = np.vdot(ref, state)
        if pops is not None:
            half = state.size // 2
            pops[cursor, 0] = float(np.sum(np.abs(state[:half]) ** 2))
            pops[cursor, 1] = float(np.sum(np.abs(state[half:]) ** 2))
        if boundary is not None:
            probe = state.copy()
            if momentum_held:
                apply(back, probe)
            wp = state_to_wavepacket(probe, model.d, grid.n)
            boundary[cursor] = _soft.boundary_maxima(wp)
        cursor += 1

    next_sample = 0
    for k in range(time_grid.n_steps + 1):
        if next_sample < len(sample_steps) and k == sample_steps[next_sample]:
            record(k)
            next_sample += 1
        if k < time_grid.n_steps:
            apply(step_circ, state)
    if momentum_held:
        apply(back, state)
    out = {"times": times, "state": state_to_wavepacket(state, model.d, grid.n)}
    if autocorr is not None:
        out["autocorr"] = _soft.AutocorrSeries(times, autocorr)
    if pops is not None:
        out["population"] = _soft.PopulationSeries(times, pops[:, 0], pops[:, 1])
    if boundary is not None:
        out["boundary"] = _soft.BoundarySeries(times, boundary)
    return out


# ---------------------------------------------------------------------------
# Hadamard-test readout of the autocorrelation
# ---------------------------------------------------------------------------


def build_hadamard_test(evolution: Circuit, part: str = "real") -> Circuit:
    """Ancilla-interferometer circuit whose P(0) encodes Re or Im of <psi0|U|psi0>.

    The ancilla is the qubit just above the evolution register. part="imag"
    differs from part="real" by exactly one S gate before the closing H.
    """
    if part not in ("real", "imag"):
        raise CircuitError(f"part must be 'real' or 'imag', got {part!r}")
    anc = evolution.n_qubits
    circ = Circuit(anc + 1)
    circ.add("H", (anc,))
    circ.append_circuit(evolution.controlled(anc))
    if part == "imag":
        circ.add("S", (anc,))
    circ.add("H", (anc,))
    return circ

def _interferometer_probs(state: np.ndarray) -> tuple[float, float]:
    """P(ancilla=0) for the real and imag readouts of a pre-readout state.

    The state is (|0>psi0 + |1>U^k psi0)/sqrt(2) with the ancilla on top;
    closing with H (and S for the imag part) gives
    p0_real = (1 + Re A)/2 and p0_imag = (1 - Im A)/2.
    """
    half = state.size // 2
    overlap = complex(np.vdot(state[:half], state[half:])) * 2.0
    p0_real = 0.5 * (1.0 + overlap.real)
    p0_imag = 0.5 * (1.0 - overlap.imag)
    return p0_real, p0_imag

def estimate_autocorr(state: np.ndarray, shots: int, rng) -> complex:
    """Shot-sampled autocorrelation estimate from a pre-readout state.

    Re comes from shots on the real interferometer (Re = 2 k0/shots - 1),
    Im from shots on the S-shifted one (Im = 2 k1/shots - 1).
    """
    p0_real, p0_imag = _interferometer_probs(state)
    k0 = rng.binomial(shots, min(1.0, max(0.0, p0_real)))
    k1 = rng.binomial(shots, min(1.0, max(0.0, 1.0 - p0_imag)))
    return complex(2.0 * k0 / shots - 1.0, 2.0 * k1 / shots - 1.0)

def hadamard_series(
    model: VibronicModel,
    grid: GridSpec,
    time_grid: TimeGrid,
    split_order: str = "potential-first",
    shots: int | None = None,
    seed: int | None = None,
) -> dict:
    """Autocorrelation through the ancilla interferometer at each sample time.

    One controlled time-step circuit is applied cumulatively; the readout
    probabilities are evaluated on the running state. With shots=None the
    exact A(t) is returned, otherwise a binomially sampled estimate.
    """
    layout = QubitLayout(model.d, grid.n, ancilla=True)
    step_circ = build_timestep(model, grid, time_grid.dt, split_order)
    ctrl_step = step_circ.controlled(layout.ancilla_qubit)
    psi0 = initial_state(model, grid)
    flat = wavepacket_to_state(psi0)
    momentum_held = split_order == "kinetic-first"
    if momentum_held:
        apply(_qft_all(model, grid, inverse=False), flat)
    state = kernels.allocate_state(layout.total)
    half = flat.size
    state[:half] = flat / math.sqrt(2.0)
    state[half:] = flat / math.sqrt(2.0)
    sample_steps = time_grid.sample_steps()
    times = sample_steps * time_grid.dt
    exact = np.zeros(len(sample_steps), dtype=np.complex128)
    sampled = np.zeros(len(sample_steps), dtype=np.complex128) if shots else None
    rng = np.random.default_rng(seed)
    cursor = 0
    next_sample = 0
    for k in range(time_grid.n_steps + 1):
        if next_sample < len(sample_steps) and k == sample_steps[next_sample]:
            p0r, p0i = _interferometer_probs(state)
            exact[cursor] = complex(2.0 * p0r - 1.0, 1.0 - 2.0 * p0i)
            if sampled is not None:
                sampled[cursor] = estimate_autocorr(state, shots, rng)
            cursor += 1
            next_sample += 1
        if k < time_grid.n_steps:
            apply(ctrl_step, state)
    out = {"times": times, "exact": exact}
    if sampled is not None:
        out["sampled"] = sampled
    return out


# ---------------------------------------------------------------------------
# Phase estimation on the step unitary
# ---------------------------------------------------------------------------


def build_qpe(evolution_step: Circuit, m: int) -> Circuit:
    """Phase-estimation circuit: m-bit readout register over the step unitary.

    Readout qubit j (weight 2^j) controls 2^j applications of the step;
    the register is closed with an inverse QFT.
    """
    if m < 1:
        raise CircuitError(f"need at least one readout qubit, got {m}")
    base = evolution_step.n_qubits
    circ = Circuit(base + m)
    for j in range(m):
        circ.add("H", (base + j,))
    for j in range(m):
        ctrl = evolution_step.controlled(base + j)
        for _ in range(1 << j):
            circ.append_circuit(ctrl)
    iqft = build_qft(m, inverse=True)
    circ.append_circuit(iqft, qubit_map=[base + j for j in range(m)])
    return circ

def run_qpe(circuit: Circuit, system_state: np.ndarray, shots: int = 0, seed: int | None = None) -> dict:
    """Emulate a phase-estimation circuit over `system_state`.

    Returns the exact readout distribution over 2^m bins plus, when shots>0,
    multinomial counts. The system register is the low-order block.
    """
    n_total = circuit.n_qubits
    sys_size = np.asarray(system_state).size
    n_sys = sys_size.bit_length() - 1
    m = n_total - n_sys
    state = kernels.allocate_state(n_total)
    state[:sys_size] = system_state
    apply(circuit, state)
    probs = np.sum(np.abs(state.reshape(1 << m, sys_size)) ** 2, axis=1)
    out = {"probs": probs, "m": m}
    if shots:
        rng = np.random.default_rng(seed)
        counts = rng.multinomial(shots, probs / probs.sum())
        out["counts"] = {k: int(c) for k, c in enumerate(counts) if c}
    return out

def qpe_phase_to_energy(theta: float, dt: float, hbar: float) -> float:
    """Energy in the principal window [0, 2 pi hbar / dt) for a phase in [0, 1)."""
    window = 2.0 * math.pi * hbar / dt
    return (-theta * window) % window


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def export_gates(circuit: Circuit) -> str:
    """One line per gate: kind, targets, controls with polarity, angle, layer."""
    lines = [f"# qubits={circuit.n_qubits} gates={circuit.gate_count()} "
             f"depth={circuit.depth()} global_phase={circuit.global_phase!r}"]
    for g in circuit.gates:
        parts = [g.kind, "t=" + ",".join(str(q) for q in g.targets)]
        if g.controls:
            parts.append("c=" + ",".join(f"{q}:{p}" for q, p in g.controls))
        if g.theta is not None:
            parts.append(f"theta={g.theta!r}")
        parts.append(f"layer={g.layer}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
