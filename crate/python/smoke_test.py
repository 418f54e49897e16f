"""Smoke test for the `gpart` Python extension.

Build and install first, e.g.
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/gpart-*.whl
"""
import math
import os
import tempfile

import gpart


def main():
    pm = gpart.PartitionMap(42, 6, 3)
    assert pm.assignment() == [2, 1, 0, 1, 2, 0], pm.assignment()
    assert pm.group_sizes() == [2, 2, 2]

    # isometry on one pair
    pm = gpart.PartitionMap(7, 100, 3)
    a, b = [0.5, -1.25, 2.0], [1.0, 0.0, -3.0]
    dw = [x - y for x, y in zip(pm.project(a), pm.project(b))]
    dist = math.dist(a, b)
    assert abs(math.hypot(*dw) - dist) <= 1e-12 * dist
    assert all(abs(x - y) < 1e-14 for x, y in zip(pm.pullback(pm.project(a)), a))

    ad = gpart.GPartAdapter(7, 100, 3)
    assert ad.theta == [0.0, 0.0, 0.0]
    ad.theta = [0.5, -1.25, 2.0]
    blob = ad.to_bytes()
    assert len(blob) == 64 and blob[:4] == b"GPRT", len(blob)
    theta_sq, delta_sq, ratio = ad.weight_decay_audit()
    assert abs(ratio - 1.0) <= 1e-12

    manifest = gpart.Manifest([(10, 10)])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "a.gprt")
        ad.save(path)
        back = gpart.GPartAdapter.load(path, manifest)
        w0 = [0.1 * i for i in range(100)]
        assert back.merge(w0) == ad.merge(w0)
        try:
            gpart.GPartAdapter.load(path, gpart.Manifest([(3, 3)]))
        except ValueError:
            pass
        else:
            raise AssertionError("mismatched manifest accepted")

    lora = gpart.LoraAdapter(gpart.Manifest([(8, 8)]), 2, 0)
    assert lora.count_trainable() == 32
    assert all(x == 0.0 for x in lora.delta())

    spread = gpart.lora_distortion(8, 8, 2, pairs=200, seed=8)
    assert spread > 2.0, spread
    assert gpart.gpart_distortion(gpart.PartitionMap(8, 64, 32)) <= 1 + 1e-12

    results = gpart.verify("partition.")
    assert results and all(ok for _, ok, _ in results), results

    print(f"gpart smoke test ok ({len(gpart.property_names())} properties, LoRA spread {spread:.4f})")


if __name__ == "__main__":
    main()
