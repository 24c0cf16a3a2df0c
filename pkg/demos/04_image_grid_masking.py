"""From a tensor to a coalition game: grid partitions and masking.

Interactions are defined over players, and for an image the players
are grid cells.  A partition maps each cell to its pixel block; a
coalition keeps the pixels of present cells and replaces absent ones
with a baseline; a scorer turns the masked tensor into the scalar the
game reports.  This script walks that pipeline with a tensor small
enough to print.
"""

import tempfile
from pathlib import Path

import numpy as np

from multiorder import (
    BaselinePolicy,
    BilinearScorer,
    Coalition,
    LinearScorer,
    apply_mask,
    load_tensor,
    make_image_game,
    multi_order_exact,
    partition,
    save_tensor,
)

# A single-channel 6x6 tensor with a visible gradient.
x = np.arange(36, dtype=np.float64).reshape(1, 6, 6) / 35.0

# g = 3 splits the 6x6 image into a 3x3 grid of 2x2 cells, so the game
# has n = 9 players.  Cell k covers rows and columns of block k.
spec = partition(x.shape, g=3)
print(f"partition: {spec.g}x{spec.g} cells over {x.shape}, n = {spec.n} players")

# Masking keeps present cells and writes the baseline into the rest.
# The per-channel-mean baseline replaces absent pixels with the mean
# of the whole channel, so a fully masked image is flat, not black.
baseline = BaselinePolicy.per_channel_mean()
keep_corner = Coalition.from_members(9, [0])
masked = apply_mask(x, keep_corner, spec, baseline)
print("\nkeeping only cell 0 (top-left 2x2 block):")
print(np.round(masked[0], 2))

# With a fixed baseline, masking is idempotent: masking a masked
# tensor with the same coalition changes nothing.  (Per-channel-mean
# is defined relative to the tensor it is given, so the game always
# masks the original input, never a masked one.)
fixed = BaselinePolicy.constant(0.5)
once = apply_mask(x, keep_corner, spec, fixed)
again = apply_mask(once, keep_corner, spec, fixed)
print(f"\nidempotent under a fixed baseline: {np.array_equal(once, again)}")
full = apply_mask(x, Coalition.full(9), spec, baseline)
print(f"full coalition is the identity: {np.array_equal(full, x)}")

# Tensors round-trip through the documented file formats: raw little
# endian float32 with a JSON sidecar, or CSV for single-channel toys.
with tempfile.TemporaryDirectory() as td:
    raw = Path(td) / "input.f32"
    save_tensor(raw, x)
    back = load_tensor(raw)
    print(f"\nraw+sidecar round trip exact at float32: "
          f"{np.array_equal(back, x.astype('<f4').astype(np.float64))}")

# A scorer plus the partition makes the tensor a coalition game.  A
# linear scorer (weighted pixel sum) is additive across cells, so all
# of its interactions vanish.
linear = LinearScorer.seeded(x.shape, seed=4)
game = make_image_game(x, linear, spec, baseline)
est = multi_order_exact(game, 0, 4, 3)
print(f"\nlinear scorer, pair (0, 4), order 3: I = {est.mean:+.2e}")

# A bilinear scorer multiplies the content of two pixel positions, so
# exactly one cell pair interacts: the pair whose blocks contain the
# two positions.  Pixel (1,1) sits in cell 0 and pixel (4,4) in cell 8
# (bottom right), so only the pair (0, 8) carries interaction.
bilinear = BilinearScorer(
    weights=np.zeros(x.shape), pos_a=(0, 1, 1), pos_b=(0, 4, 4), coef=3.0,
    target=0, score_kind="logit",
)
game = make_image_game(x, bilinear, spec, baseline)
print("\nbilinear scorer coupling pixel (1,1) in cell 0 with (4,4) in cell 8:")
for (i, j) in ((0, 8), (0, 4), (3, 8)):
    est = multi_order_exact(game, i, j, 2)
    print(f"  pair {i, j} at order 2: I = {est.mean:+.4f}")
