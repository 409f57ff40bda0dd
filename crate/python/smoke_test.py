"""Builds the extension module if needed and exercises it end to end."""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_module(dest):
    subprocess.run(
        ["cargo", "build", "--release", "-p", "radiofill-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libradiofill_py.so")
    shutil.copy(lib, os.path.join(dest, "radiofill.so"))


def main():
    with tempfile.TemporaryDirectory() as tmp:
        build_module(tmp)
        sys.path.insert(0, tmp)
        import radiofill as rf

        norm = rf.RadioMap.normalize([[2.0, 4.0], [6.0, 10.0]])
        assert norm.values == [[0.0, 0.25], [0.5, 1.0]], norm.values
        assert (norm.norm_min, norm.norm_max) == (2.0, 10.0)
        assert norm.to_raw() == [[2.0, 4.0], [6.0, 10.0]]

        m, obstacles, tx = rf.generate_scene(rows=40, cols=48, tx=(-10.0, 24.0), seed=1)
        assert m.shape == (40, 48) and len(obstacles) == 40
        rect = rf.Rect(15, 20, 8, 8)

        for method in ("epc", "epd"):
            out, order = rf.reconstruct(
                m, [tx], rect=rect, obstacles=obstacles, method=method, patch_size=5,
                dict_size=20, train_patches=200, ksvd_iters=3, seed=7,
            )
            vals = out.values
            assert all(0.0 <= v <= 1.0 for row in vals for v in row)
            assert order, "fill order is empty"
            err = rf.mse(m.values, vals, rect)
            print(f"{method}: {len(order)} iterations, mse={err:.3e}, ne={rf.ne(m.values, vals, rect):.3e}")

        out, gamma = rf.mbi(m, tx, rect=rect)
        print(f"mbi: gamma={gamma:.3f}, mse={rf.mse(m.values, out.values, rect):.3e}")
        out = rf.rbf(m, rect=rect)
        print(f"rbf: mse={rf.mse(m.values, out.values, rect):.3e}")

        try:
            rf.reconstruct(m, [tx], rect=rf.Rect(35, 20, 8, 8))
        except ValueError as e:
            assert "35" in str(e)
        else:
            raise AssertionError("out-of-bounds rect accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
