"""Structured low-rank denoising of a noisy output Hankel.

The iterative denoiser alternates a range-space truncation (keep what the
input Hankel explains, truncate the remainder to the model order) with the
orthogonal projection back onto block-Hankel structure.  Because the same
inputs are replayed with and without measurement noise, the clean output
Hankel is known exactly and the improvement can be measured.

Run:  python3 demos/03_hankel_denoising.py
"""

import numpy as np

from deepckit.bench import emit_svg
from deepckit.hankel import build_block_hankel
from deepckit.plants import NoiseSpec, collect_trajectory, triple_mass_spring
from deepckit.slra import iterative_slra

plant = triple_mass_spring()
box = (np.full(plant.m, -0.7), np.full(plant.m, 0.7))
DEPTH = 44

noisy = collect_trajectory(plant, 200, box, NoiseSpec(variance=0.01, seed=31))
clean = collect_trajectory(plant, 200, box, NoiseSpec(variance=0.0, seed=31))
h_u = build_block_hankel(noisy.u_d, DEPTH)
h_y = build_block_hankel(noisy.y_d, DEPTH)
h_y_clean = build_block_hankel(clean.y_d, DEPTH)

before = np.linalg.norm(h_y - h_y_clean)
print(f"output Hankel {h_y.shape}, distance to the clean matrix: {before:.3f}")

report = iterative_slra(h_y, h_u, n_order=plant.n, eps=1e-6, max_iter=500,
                        block_size=plant.p)
after = np.linalg.norm(report.h_y_star - h_y_clean)
print(f"after {report.iterations} passes (converged={report.converged}): {after:.3f}")
print(f"noise energy removed: {100 * (1 - (after / before) ** 2):.1f}%")

# the relative-change sequence shows the alternating projections settling
emit_svg(
    [("relative change per pass",
      np.arange(1, len(report.rel_changes) + 1, dtype=float),
      np.log10(np.array(report.rel_changes)))],
    "demos_out_denoising.svg",
    title="denoiser convergence",
    x_label="pass",
    y_label="log10 relative change",
)
print("wrote demos_out_denoising.svg")

# the output stays exactly block-Hankel: anti-diagonal blocks are identical
blocks = report.h_y_star.reshape(DEPTH, plant.p, -1)
gap = max(
    np.abs(blocks[i + 1, :, 0] - blocks[i, :, 1]).max() for i in range(DEPTH - 1)
)
print(f"largest anti-diagonal mismatch in the result: {gap:.1e}")
