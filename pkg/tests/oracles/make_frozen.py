"""Regenerate ``frozen.json``: reference values computed without the package.

Run ``python3 tests/oracles/make_frozen.py`` from the repository root. Only
mpmath, numpy and scipy are used, so these numbers are independent of the
code under test.
"""
import json
import math
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy import integrate, optimize

mp.mp.dps = 40
OUT = Path(__file__).with_name("frozen.json")

M_, W0, V0, A3, W4, A4 = 1.0, 0.1, 1.0, 0.01, 0.4, 0.02
Q0, P0, SIG = -5.0, 1.0, 1.0 / math.sqrt(2.0)


def v1(q):
    return 0.5 * M_ * W0**2 * q**2 + V0 * np.exp(-q**2)


def v2(q):
    return 0.5 * M_ * W0**2 * q**2 - V0 * np.exp(-q**2)


def v3(q):
    return 0.5 * M_ * W0**2 * (q**2 + A3 * q**4)


def v4(q):
    return V0 + 0.5 * M_ * W4**2 * (-q**2 + A4 * q**4)


def bessel_values():
    ks = [0, 1, 10, 32, 63, 64, 80, 100, 108, 109, 118]
    return {str(k): float(mp.besselj(k, 64)) for k in ks}


def bessel_order(x, cutoff=1e-16):
    # beyond k > x the magnitudes decay monotonically; scan until far below the cutoff
    k = int(math.ceil(x))
    last = None
    while True:
        v = abs(mp.besselj(k, x))
        if v >= cutoff:
            last = k
        elif v < cutoff * 1e-6 and k > x:
            break
        k += 1
    return last


def ellipse_outside(v0=V0):
    sp = 1.0 / (2.0 * SIG)
    qe = math.sqrt(2 * v0 / (M_ * W0**2))

    def w(p, q):
        return math.exp(-(q - Q0) ** 2 / (2 * SIG**2) - 2 * SIG**2 * (p - P0) ** 2) / math.pi

    def pe(q):
        return math.sqrt(max(0.0, 2 * M_ * (v0 - 0.5 * M_ * W0**2 * q * q)))

    inside, _ = integrate.dblquad(w, -qe, qe, lambda q: -pe(q), pe, epsabs=1e-13, epsrel=1e-12)
    return 1.0 - inside


def courant_bruteforce(vfun, n, dq):
    q = (np.arange(n) - n // 2) * dq  # node n // 2 on the origin
    h = 1e-6
    s = (vfun(q + h) - vfun(q - h)) / (2 * h)
    pmax = math.pi / dq

    def excess(dt):
        disp = np.maximum(np.abs(-s * dt**2 / 2 + pmax * dt), np.abs(-s * dt**2 / 2 - pmax * dt))
        return disp.max() - dq / 2

    return optimize.brentq(excess, 1e-9, 1.0, xtol=1e-16, rtol=1e-14)


def v4_minimum():
    q = np.linspace(0.0, 10.0, 2_000_001)
    v = v4(q)
    i = int(np.argmin(v))
    return float(q[i]), float(v[i])


def v3_turning_point():
    e = P0**2 / (2 * M_) + v3(Q0)
    return optimize.brentq(lambda q: v3(q) - e, 0.0, 50.0, xtol=1e-14)


def main():
    data = {
        "bessel_J_k_64": bessel_values(),
        "bessel_order": {str(x): bessel_order(x) for x in (8.0, 64.0, 64.4, 90.4)},
        "ellipse_N_plus": {str(v): ellipse_outside(v) for v in (0.5, 1.0, 2.0)},
        "courant_dt_dq0125": {
            "barrier_1024": courant_bruteforce(v1, 1024, 0.125),
            "well_1024": courant_bruteforce(v2, 1024, 0.125),
            "quartic_512": courant_bruteforce(v3, 512, 0.125),
            "doublewell_256": courant_bruteforce(v4, 256, 0.125),
            "barrier_512": courant_bruteforce(v1, 512, 0.125),
        },
        "v4_minimum": dict(zip(("q", "value"), v4_minimum())),
        "v3_classical_turning_point": v3_turning_point(),
    }
    OUT.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    print(json.dumps(data, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
