"""
Matching two impressions
========================

Two captures of one finger differ by a rigid motion. Neighbour codes are
relative to each minutia, so the motion drops out and most minutiae pair up.
A different finger pairs up with almost nothing.
"""
import math

import numpy as np

from ridgekit.encode import encode_fingerprint
from ridgekit.match import MatchParams, count_matrix, match_fingercodes
from ridgekit.pipeline import extract
from ridgekit.synth import impression, random_finger

finger, other = random_finger(11), random_finger(12)

first = extract(impression(finger, noise_seed=1)[0])
second = extract(impression(finger, dx=9, dy=-5, alpha=math.radians(10), noise_seed=2)[0])
stranger = extract(impression(other, noise_seed=3)[0])

###############################################################################
# Each minutia is described by its 9 nearest neighbours.
a, b, c = (encode_fingerprint(m, 9) for m in (first, second, stranger))
print(f"minutiae: {len(a)}, {len(b)}, {len(c)}")

code = a.codes[0]
print("first code (rho, theta, phi):")
for row in zip(code.rho, code.theta, code.phi):
    print("  " + "  ".join(f"{v:7.3f}" for v in row))

###############################################################################
# Count matrix: matched neighbours for every minutia pair. Pairs with at
# least t = 5 are accepted greedily, highest count first.
p = MatchParams()
counts = count_matrix(a, b, p)
print(f"pairs with >= {p.t} matched neighbours: {(counts >= p.t).sum()}")
print(f"largest count per row: {np.sort(counts.max(axis=1))[::-1][:10]}")

for name, other_code in (("same finger", b), ("different finger", c)):
    r = match_fingercodes(a, other_code, p)
    print(f"{name:17s} score {r.score:.3f}  ({r.matched_pairs} of max({r.M}, {r.N}))")
