"""Smoke test for the kgsq_py extension.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import math
import os
import sys
import tempfile

import kgsq_py as kg


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    grid = kg.Grid(6)
    assert grid.n_phys >= 2 * (2 * grid.kmax + 1)
    assert len(grid.wavevectors()) == len(grid) == 13**3

    p = kg.randomize(grid, seed=3, amplitude=0.5, decay=1.5)
    q = kg.randomize(grid, seed=3, amplitude=0.5, decay=1.5)
    assert p.is_hermitian()
    assert p.pos == q.pos and p.vel == q.vel, "randomization is not reproducible"

    # The linear flow conserves the free energy exactly.
    h0 = kg.energy(p, "free")
    h1 = kg.energy(kg.free_evolve(p, 0.7), "free")
    assert close(h1, h0, 1e-12), (h0, h1)

    # Strang steps drift the full energy by O(dt²).
    e0 = kg.energy(p)
    _, pts = kg.evolve(p, 0.5, dt=1e-3)
    assert close(kg.energy(pts[-1]), e0, 1e-4), (e0, kg.energy(pts[-1]))

    a = kg.randomize(grid, seed=4)
    b = kg.randomize(grid, seed=5)
    w0 = kg.omega(a, b)
    _, a1, b1 = kg.tangent_evolve(p, a, b, 0.5, dt=1e-2, flow="truncated", cutoff=3.0)
    assert close(kg.omega(a1, b1), w0, 1e-10), (w0, kg.omega(a1, b1))

    times, traj = kg.evolve(p, 0.5, dt=1e-2, times=[0.1 * i for i in range(6)])
    assert len(times) == len(traj) == 6
    assert kg.strichartz_norm(times, traj, 4.0, 4.0) > 0.0
    assert close(kg.vp_norm([[0.0], [1.0], [0.0]], 2.0), math.sqrt(2.0), 1e-14)

    res = kg.witness_search(p, 1.0, [1, 0, 0], 0.5, 0.2, max_iters=50)
    assert res["escaped"] and res["functional_value"] > 0.5, res

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "p.kgsq")
        p.save(path)
        r = kg.PhasePoint.load(path)
        assert r.pos == p.pos and r.vel == p.vel
        assert kg.cli([]) == 2

    try:
        kg.evolve(p, 1.0, flow="truncated")
    except ValueError:
        pass
    else:
        raise AssertionError("truncated flow without cutoff was accepted")

    print("kgsq_py smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
