"""Compare the two statevector kernel backends on a production-size circuit.

Builds one 17-qubit time-step circuit (the four-mode model at n=4) and times
repeated application under the numba backend and the pure-numpy fallback.
Run from the repository root:

    python3 bench/bench_kernels.py [--qubits-per-mode 4] [--steps 20] [--repeats 3]

The first numba application is reported separately because it includes JIT
compilation; steady-state numbers are what matter for long propagations.
"""

import argparse
import time

import numpy as np

from vibroniq import kernels
from vibroniq.circuits import apply, build_timestep, prepare_wavepacket, wavepacket_to_state
from vibroniq.model import GridSpec, initial_state, pyrazine_4d


def run_backend(name: str, circ, state0: np.ndarray, steps: int, repeats: int) -> dict:
    kernels.set_backend(name)
    state = state0.copy()
    t0 = time.perf_counter()
    apply(circ, state)
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeats):
        state = state0.copy()
        t0 = time.perf_counter()
        for _ in range(steps):
            apply(circ, state)
        best = min(best, time.perf_counter() - t0)
    return {"first_step_s": first, "best_s": best, "per_step_ms": 1e3 * best / steps}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits-per-mode", type=int, default=4)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    model = pyrazine_4d()
    grid = GridSpec(n=args.qubits_per_mode, q_min=-5.0, q_max=5.0)
    circ = build_timestep(model, grid, dt=264.0 / 2048.0)
    state0 = wavepacket_to_state(initial_state(model, grid))
    print(f"time-step circuit: {circ.n_qubits} qubits, {circ.gate_count()} gates, "
          f"depth {circ.depth()}")

    saved = kernels.backend()
    results = {}
    try:
        for name in ("numpy",) + (("numba",) if kernels.HAVE_NUMBA else ()):
            results[name] = run_backend(name, circ, state0, args.steps, args.repeats)
            r = results[name]
            print(f"{name:>6}: first step {r['first_step_s']*1e3:8.1f} ms, "
                  f"then {r['per_step_ms']:8.1f} ms/step "
                  f"(best of {args.repeats} x {args.steps} steps)")
    finally:
        kernels.set_backend(saved)
    if not kernels.HAVE_NUMBA:
        print(" numba: unavailable in this environment (or disabled by "
              "VIBRONIQ_DISABLE_NUMBA); only the fallback was timed")
    elif "numba" in results:
        speedup = results["numpy"]["per_step_ms"] / results["numba"]["per_step_ms"]
        print(f"steady-state speedup: {speedup:.1f}x")

    # sanity: identical final states (state preparation circuit, both backends)
    prep = prepare_wavepacket(model, grid)
    outs = []
    for name in results:
        kernels.set_backend(name)
        s = np.zeros_like(state0)
        s[0] = 1.0
        outs.append(apply(prep, s).copy())
    kernels.set_backend(saved)
    if len(outs) == 2:
        print(f"backend agreement on the prep circuit: "
              f"max |diff| = {np.max(np.abs(outs[0] - outs[1])):.2e}")


if __name__ == "__main__":
    main()
