"""Quick check of the Python bindings.

Build and install the extension first:

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import math
import sys

import pyimreg as im


def main():
    coeffs = im.canonical_coefficients(4)
    assert coeffs[0] == 2.0 and abs(coeffs[1] - 1.0) < 1e-15
    assert im.sequence_violations(coeffs) == []
    assert im.sequence_violations([1.0, 2.0])

    cfg = im.RegulatorConfig(2, sigma=2.0, mu=1.0, omega_hat=2 * math.pi)
    assert cfg.dim() == 5
    ok, report = cfg.certify()
    assert ok, report

    # resonance value 2 / (mu^2 n_zl)
    g = cfg.transfer_gain(2 * math.pi)
    assert abs(g - 2.0 / coeffs[1]) < 1e-10, g
    k0, k1 = cfg.bound_constants()
    assert k0 == 7.0 and k1 > 0

    mags = cfg.bode_magnitude([2 * math.pi, 4 * math.pi])
    assert mags == [0.0, 0.0]
    hg = im.high_gain_magnitude(2.0, [0.0])
    assert abs(hg[0] - 0.5) < 1e-15

    try:
        im.RegulatorConfig(2, sigma=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative sigma accepted")

    traj = im.simulate(cfg)
    sup, l2 = traj.norms()
    print(f"n_o=2: sup={sup:.4f} rms={math.sqrt(l2):.4f}")
    assert abs(sup - 0.0178) / 0.0178 < 0.1
    spec = traj.spectrum([2 * math.pi * k for k in range(11)])
    assert max(spec[:3]) < 1e-4 * max(spec)

    hg_traj = im.simulate(None, sigma=10.0)
    sup, _ = hg_traj.norms()
    print(f"high gain sigma=10: sup={sup:.4f}")
    assert abs(sup - 0.400) / 0.400 < 0.05
    assert len(hg_traj) == len(hg_traj.times) == 15001
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
