"""Batch front end: reproducible CSV-emitting experiment runner.

Every run is deterministic for a given (config, seed): floats are written
with repr so reruns are byte-identical. Plotting lives outside the core; a
separate script can read these CSVs. Thread count for the compiled kernels
follows NUMBA_NUM_THREADS.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import circuits, resources, signals, soft
from .kernels import MemoryBudgetError
from .model import (
    GridSpec,
    ModelError,
    TimeGrid,
    get_model,
    initial_state,
)

ZPE_FIXED_RANGE_COUNTS = (4, 8, 16, 32, 64)
ZPE_FIXED_RESOLUTION = ((8, 2.5), (16, 5.0), (32, 10.0), (64, 20.0))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: str, header: list[str], rows) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _grid_from_args(args) -> GridSpec:
    lo, hi = args.range
    return GridSpec(n=args.n, q_min=lo, q_max=hi, convention=args.convention)


def _time_grid_from_args(args) -> TimeGrid:
    dt = args.total_fs / args.nt
    return TimeGrid(dt=dt, n_steps=args.nt, sample_stride=args.stride)


def cmd_zpe_scan(args) -> int:
    """Two convergence tables: point count at fixed range, and range at
    matched resolution. Columns: scan, n_points, dq, zpe_eV."""
    model = get_model(args.model)
    rows = []
    lo, hi = args.range
    for count in ZPE_FIXED_RANGE_COUNTS:
        n = int(np.log2(count))
        grid = GridSpec(n=n, q_min=lo, q_max=hi, convention=args.convention)
        rows.append(("fixed-range", count, grid.dq, soft.zpe(model, grid)))
    for count, half in ZPE_FIXED_RESOLUTION:
        n = int(np.log2(count))
        grid = GridSpec(n=n, q_min=-half, q_max=half, convention=args.convention)
        rows.append(("fixed-resolution", count, grid.dq, soft.zpe(model, grid)))
    path = os.path.join(args.out, "zpe_scan.csv")
    _write_csv(path, ["scan", "n_points", "dq", "zpe_eV"], rows)
    print(f"wrote {path}")
    return 0


def _run_engine(args, observers=("autocorr", "population", "boundary")) -> dict:
    model = get_model(args.model)
    grid = _grid_from_args(args)
    tg = _time_grid_from_args(args)
    if args.engine == "soft":
        plan = soft.PropagatorPlan(model, grid, tg.dt, split_order=args.split_order)
        return soft.propagate(plan, initial_state(model, grid), tg, observers=observers)
    return circuits.circuit_propagate(model, grid, tg, split_order=args.split_order, observers=observers)


def cmd_propagate(args) -> int:
    """Autocorrelation, population, and boundary-probe series for one run."""
    model = get_model(args.model)
    result = _run_engine(args)
    ac = result["autocorr"]
    _write_csv(
        os.path.join(args.out, "autocorr.csv"),
        ["t_fs", "re_a", "im_a"],
        zip(ac.times, ac.values.real, ac.values.imag),
    )
    pop = result["population"]
    _write_csv(
        os.path.join(args.out, "population.csv"),
        ["t_fs", "p_s1", "p_s2"],
        zip(pop.times, pop.p_s1, pop.p_s2),
    )
    bnd = result["boundary"]
    _write_csv(
        os.path.join(args.out, "boundary.csv"),
        ["t_fs"] + [f"p_edge_{m.label}" for m in model.modes],
        (tuple(row) for row in np.column_stack([bnd.times, bnd.per_mode])),
    )
    print(f"wrote autocorr.csv population.csv boundary.csv in {args.out}")
    return 0


def cmd_spectrum(args) -> int:
    """Damped energy-weighted spectrum of the engine's autocorrelation."""
    result = _run_engine(args, observers=("autocorr",))
    spec = signals.spectrum(result["autocorr"], tau_fs=args.tau_fs, damp_d=args.damp_d)
    path = os.path.join(args.out, "spectrum.csv")
    _write_csv(path, ["e_eV", "intensity"], zip(spec.energies, spec.intensities))
    print(f"wrote {path} ({len(spec.energies)} bins, spacing {spec.spacing:.6f} eV)")
    return 0


def cmd_shots_scan(args) -> int:
    """Shot-budget scan: TVD between sampled and exact spectra.

    Thresholds that are never sustained are reported as nan, not fatal.
    """
    result = _run_engine(args, observers=("autocorr",))
    scan = signals.shots_scan(
        result["autocorr"],
        method=args.mode,
        seeds=range(args.seed, args.seed + args.n_seeds),
        tau_fs=args.tau_fs,
        damp_d=args.damp_d,
    )
    rows = []
    for i, seed in enumerate(range(args.seed, args.seed + args.n_seeds)):
        for j, shots in enumerate(scan["shot_grid"]):
            rows.append((args.mode, seed, int(shots), scan["curves"][i, j]))
    path = os.path.join(args.out, "shots_scan.csv")
    _write_csv(path, ["method", "seed", "shots", "tvd"], rows)
    for thr, med in scan["medians"].items():
        tag = "unmet" if np.isnan(med) else f"{med:.0f}"
        print(f"threshold {thr:.2%}: median shots {tag}")
    print(f"wrote {path}")
    return 0


def cmd_resources(args) -> int:
    """Closed-form budget for one configuration (or the standard table)."""
    header = [
        "model_class", "n", "n_t", "variant", "n_init", "per_step",
        "n_evolution", "n_measure", "total", "qubits_state", "qubits_total",
    ]
    if args.table:
        reports = resources.standard_table()
    else:
        model_class = "24D-quadratic" if args.model_class == "24d" else "4D-linear"
        reports = [resources.assay(resources.AssayInput(model_class, args.n, args.nt, args.variant))]
    rows = [
        (
            r.inp.model_class, r.inp.n, r.inp.n_t, r.inp.variant, r.n_init,
            r.per_step, r.n_evolution, r.n_measure, r.total, r.qubits_state,
            r.qubits_total,
        )
        for r in reports
    ]
    path = os.path.join(args.out, "resources.csv")
    _write_csv(path, header, rows)
    for row in rows:
        print(" ".join(str(x) for x in row))
    return 0


def cmd_qpe_demo(args) -> int:
    """Single-mode uncoupled phase-estimation readout of the step energy."""
    from .model import ModeParams, VibronicModel

    model = VibronicModel(modes=(ModeParams("nu", 0.0936, "B1g"),), lam=0.0, delta=0.0)
    grid = GridSpec(n=args.n, q_min=args.range[0], q_max=args.range[1], convention=args.convention)
    dt = args.total_fs / args.nt
    step_circ = circuits.build_timestep(model, grid, dt)
    u = circuits.unitary_of(step_circ)
    w, v = np.linalg.eig(u)
    # pick the step eigenstate closest to the S2-branch grid ground state
    from .model import grid_points

    q = grid_points(grid)
    target = np.zeros(1 << step_circ.n_qubits, dtype=np.complex128)
    gauss = np.exp(-(q**2) / 2.0)
    target[q.size : 2 * q.size] = gauss / np.linalg.norm(gauss)
    best = int(np.argmax(np.abs(v.conj().T @ target)))
    eigstate = v[:, best]
    qpe_circ = circuits.build_qpe(step_circ, args.m_bits)
    out = circuits.run_qpe(qpe_circ, eigstate, shots=args.shots, seed=args.seed)
    probs = out["probs"]
    top = int(np.argmax(probs))
    energy = circuits.qpe_phase_to_energy(top / (1 << args.m_bits), dt, model.hbar)
    rows = [
        (k, circuits.qpe_phase_to_energy(k / (1 << args.m_bits), dt, model.hbar), probs[k])
        for k in range(1 << args.m_bits)
    ]
    path = os.path.join(args.out, "qpe_demo.csv")
    _write_csv(path, ["bin", "e_eV", "probability"], rows)
    print(f"top bin {top}: p={probs[top]:.4f}, E={energy:.6f} eV "
          f"(bin width {2*np.pi*model.hbar/dt/(1 << args.m_bits):.6f} eV)")
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    """Builder-vs-formula depths plus a circuit-vs-grid fidelity oracle."""
    failures = 0
    for model_class, ns in (("4D-linear", (2, 3, 4, 5)), ("24D-quadratic", (4, 5))):
        for n in ns:
            row = resources.verify_against_builder(model_class, n)
            status = "ok" if row["agree"] else "MISMATCH"
            if not row["agree"]:
                failures += 1
            print(f"{model_class} n={n}: {row['rows']} {status}")
    model = get_model("pyrazine-2mode" if args.modes == 2 else args.model)
    grid = _grid_from_args(args)
    tg = _time_grid_from_args(args)
    plan = soft.PropagatorPlan(model, grid, tg.dt, split_order=args.split_order)
    r_soft = soft.propagate(plan, initial_state(model, grid), tg, observers=())
    r_circ = circuits.circuit_propagate(model, grid, tg, split_order=args.split_order, observers=())
    fs = r_soft["state"].amplitudes.ravel()
    fc = r_circ["state"].amplitudes.ravel()
    fidelity = float(abs(np.vdot(fs, fc)) ** 2)
    print(f"engine fidelity over {tg.n_steps} steps ({model.d} modes, n={grid.n}): {fidelity!r}")
    if fidelity < 1.0 - 1e-8:
        failures += 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibroniq", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, engine=True):
        p.add_argument("--model", default="pyrazine-4d", help="preset name or model JSON path")
        p.add_argument("--n", type=int, default=4, help="qubits per mode register")
        p.add_argument("--nt", type=int, default=2048, help="number of time steps")
        p.add_argument("--total-fs", type=float, default=264.0, help="total propagation time")
        p.add_argument("--stride", type=int, default=16, help="sample stride in steps")
        p.add_argument("--range", type=float, nargs=2, default=(-5.0, 5.0), metavar=("QMIN", "QMAX"))
        p.add_argument("--convention", choices=("periodic", "endpoint"), default="periodic")
        p.add_argument("--split-order", choices=soft.SPLIT_ORDERS, default="potential-first")
        if engine:
            p.add_argument("--engine", choices=("soft", "circuit"), default="soft")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("zpe-scan", help="grid-convergence tables of the uncoupled ground energy")
    common(p, engine=False)
    p.set_defaults(func=cmd_zpe_scan)

    p = sub.add_parser("propagate", help="time series from either engine")
    common(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("spectrum", help="damped autocorrelation spectrum")
    common(p)
    p.add_argument("--tau-fs", type=float, default=30.0)
    p.add_argument("--damp-d", action="store_true", help="extra half-cosine window")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("shots-scan", help="shot budget vs spectrum accuracy")
    common(p)
    p.add_argument("--tau-fs", type=float, default=30.0)
    p.add_argument("--damp-d", action="store_true")
    p.add_argument("--mode", choices=("autocorr", "direct"), default="autocorr")
    p.add_argument("--n-seeds", type=int, default=10)
    p.set_defaults(func=cmd_shots_scan)

    p = sub.add_parser("resources", help="closed-form gate/qubit budgets")
    p.add_argument("--model-class", choices=("4d", "24d"), default="4d")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--nt", type=int, default=512)
    p.add_argument("--variant", choices=resources.VARIANTS, default="A")
    p.add_argument("--table", action="store_true", help="emit all standard configurations")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("qpe-demo", help="phase estimation on a single-mode step")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--nt", type=int, default=1, help="steps per controlled application")
    p.add_argument("--total-fs", type=float, default=1.0)
    p.add_argument("--range", type=float, nargs=2, default=(-6.0, 6.0), metavar=("QMIN", "QMAX"))
    p.add_argument("--convention", choices=("periodic", "endpoint"), default="periodic")
    p.add_argument("--m-bits", type=int, default=6)
    p.add_argument("--shots", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_qpe_demo)

    p = sub.add_parser("verify", help="builder-vs-formula and engine-vs-engine checks")
    common(p, engine=False)
    p.add_argument("--modes", type=int, choices=(2, 4), default=2)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, circuits.CircuitError, signals.SignalError,
            resources.ResourceError, MemoryBudgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
