"""Nearest-subspace classification with one and several shots.

Run: python3 demos/02_subspace_metric.py
"""
import numpy as np

from freqsub.subspace import build_subspace, projection_distance

rng = np.random.default_rng(1)
D = 6

# a class that varies along two hidden directions
axes = np.linalg.qr(rng.normal(size=(D, 2)))[0]
centre = rng.normal(size=D)
support = centre + rng.normal(size=(5, 2)) @ axes.T * 3.0

sub = build_subspace(support, d_max=2, jitter=1e-5, rng=rng)
print(f"5-shot subspace rank {sub.rank}")
print(f"overlap with the true axes: {np.linalg.norm(axes.T @ sub.basis) ** 2:.3f} (2 is perfect)")

on_plane = centre + axes @ np.array([4.0, -2.0])
off_plane = centre + rng.normal(size=D) * 2.0
for name, q in (("query along the class axes", on_plane), ("random query", off_plane)):
    proto = np.sum((q - sub.mean) ** 2)
    print(f"{name:28s} prototype distance {proto:7.3f}  subspace distance {projection_distance(q, sub):7.3f}")

# a single noiseless shot has nothing to span: the metric becomes the prototype distance
one = build_subspace(support[:1], d_max=2, jitter=0.0)
print(f"1-shot rank {one.rank}, distance {projection_distance(off_plane, one):.6f}, "
      f"squared gap {np.sum((off_plane - support[0]) ** 2):.6f}")
