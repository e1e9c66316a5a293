#!/usr/bin/env python3
"""Smoke test for the cgc_py extension module.

Builds the cdylib if needed, loads it, and checks a few end-to-end
numbers. Run from anywhere:

    python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    lib = REPO / "target" / "debug" / "libcgc_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "cgc-py"], cwd=REPO, check=True
        )
    stage = Path(tempfile.mkdtemp(prefix="cgc_py_"))
    shutil.copy(lib, stage / "cgc_py.so")
    sys.path.insert(0, str(stage))
    import cgc_py

    return cgc_py


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    cgc_py = load_module()

    # algebraic identities
    close(cgc_py.curvature_formula(4.0), -16.0 / 9.0, 1e-12)
    close(cgc_py.curvature_formula(-4.0), 16.0 / 25.0, 1e-12)
    for mu in (4.0, -4.0, 0.1):
        close(cgc_py.scaled_curvature_formula(mu), -mu, 1e-12)

    # build a frame and project surfaces out of it
    frame = cgc_py.build_frame("revolution", n_u=51, n_v=51)
    assert frame.shape == (51, 51)
    assert frame.max_residual < 1e-10, frame.max_residual

    s = frame.project(4.0)
    assert s.target == "s3"
    assert len(s.positions()) == 51 * 51
    # points on the unit sphere
    x = s.positions()[1300]
    close(sum(c * c for c in x), 1.0, 1e-8)
    close(s.median_curvature(), -16.0 / 9.0, 0.02 * 16.0 / 9.0)
    assert s.median_harmonicity_residual() < 1e-2

    close(frame.project(-4.0).median_curvature(), 16.0 / 25.0, 0.02)

    sym = frame.sym()
    assert sym.target == "e3"
    assert all(p[0] == 0.0 for p in sym.positions())
    close(sym.median_curvature(), -1.0, 0.02)

    # scaled projection is the blow-up (2/(1-mu))(f_mu - e0)
    scaled = frame.scaled(4.0)
    f_mu = s.positions()[700]
    g = scaled.positions()[700]
    for t in range(4):
        expect = 2.0 / (1.0 - 4.0) * (f_mu[t] - (1.0 if t == 0 else 0.0))
        close(g[t], expect, 1e-12)

    flat = frame.flat_limit()
    close(flat.median_curvature(), 0.0, 1e-2)

    # associated family member projects to the same curvature
    # (s < 1 keeps lambda = 4s inside the truncation's convergence range)
    close(frame.associated(0.5).project(4.0).median_curvature(),
          -16.0 / 9.0, 0.05)

    # degenerate parameter is rejected
    try:
        frame.project(1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("mu = 1 should raise ValueError")

    # mesh export
    with tempfile.TemporaryDirectory() as d:
        out = Path(d) / "mu4.obj"
        s.write_obj(str(out))
        text = out.read_text()
        assert text.startswith("v ")
        assert " f " in text or "\nf " in text

    print("smoke test passed")


if __name__ == "__main__":
    main()
