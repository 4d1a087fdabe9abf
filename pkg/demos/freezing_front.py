"""March a freezing front through a water layer and watch the books balance.

Ice at 270 K on the left, water pinned at 290 K on the right, the front
starts 1 mm in. Each accepted step reports how well the interface sits
at the melting temperature and how closely the flux jump matches the
latent heat drain.
"""

import numpy as np

from heatlayers import stefan

HORIZON = 600.0  # seconds


def main():
    cfg = stefan.StefanConfig.table1()
    state = stefan.solve_front(cfg, HORIZON, terms=50)

    times = np.array(state.times)
    front = np.array(state.y_trace)
    print(f"{state.nsteps - 1} accepted steps to tau = {times[-1]:.0f} s")
    for target in (1.0, 10.0, 60.0, 300.0, HORIZON):
        print(f"  tau = {target:>6.1f} s   front at "
              f"{state.front_at(target):7.3f} mm")

    res = np.array(state.diagnostics["residual"])
    jump = np.array(state.diagnostics["jump"])
    want = np.array(state.diagnostics["jump_target"])
    secs = np.array(state.diagnostics["seconds"])
    print(f"\nfront grew {front[-1] - front[0]:.3f} mm, strictly monotone:",
          bool(np.all(np.diff(front) > 0)))
    print(f"worst melting-temperature residual: {res.max():.2e} K")
    print(f"worst flux-jump mismatch: "
          f"{np.max(np.abs(jump - want) / np.abs(want)):.2e} relative")
    print(f"slowest step: {secs.max() * 1e3:.1f} ms")

    # a mid-run temperature profile, wall to wall
    tau = times[len(times) // 2]
    xs = np.linspace(cfg.y_minus, cfg.y_plus, 9)
    temps = stefan.temperature(cfg, state, tau, xs)
    print(f"\nprofile at tau = {tau:.1f} s (front at "
          f"{state.front_at(tau):.3f} mm):")
    for x, t in zip(xs, temps):
        print(f"  x = {x:6.2f} mm   T = {t:8.3f} K")


if __name__ == "__main__":
    main()
