"""Tour of the block-affine operator algebra.

Embedding vectors are stacks of 2D blocks; relations act on them with
cascades of translation, rotation, and scaling.  This script walks
through the elementary operators, their composition into a single
homogeneous matrix per block, inversion, and why the order of the
cascade matters.
"""

import numpy as np

from compound_kge.errors import SingularOperatorError
from compound_kge.transforms import (
    OperatorKind,
    TransformParams,
    apply_chain,
    apply_rotation,
    apply_scaling,
    apply_translation,
    chain_from_string,
    compound_matrix_2d,
    invert_compound_2d,
)

T, R, S = OperatorKind.TRANSLATION, OperatorKind.ROTATION, OperatorKind.SCALING

# --- elementary operators on one 2D block --------------------------------

x = np.array([1.0, 0.0])
print("x                    =", x)
print("translate by (1,-1)  =", apply_translation(x, [1.0, -1.0]))
print("rotate by 90 degrees =", apply_rotation(x, [np.pi / 2]).round(12))
print("scale by (2,3)       =", apply_scaling(x, [2.0, 3.0]))

# --- a full cascade -------------------------------------------------------
# The chain is written like a matrix product: (T, R, S) means T.R.S, so
# the scaling acts first and the translation last.

params = TransformParams(
    translation=[1.0, -1.0], angles=[np.pi / 2], scale=[2.0, 3.0]
)
print("\nchain T.R.S on x     =", apply_chain(x, (T, R, S), params).round(12))
print("steps: scale -> (2,0), rotate -> (0,2), translate -> (1,1)")

# --- the same cascade as one homogeneous 3x3 matrix -----------------------

m = compound_matrix_2d((T, R, S), (1.0, -1.0, np.pi / 2, 2.0, 3.0))
print("\ncompound matrix of T.R.S:\n", m.round(12))
hom = m @ np.array([1.0, 0.0, 1.0])
print("matrix route gives   =", hom[:2].round(12))

# --- order sensitivity -----------------------------------------------------
# Matrix products do not commute, so each of the six orderings of the
# three operators is a different model family.

print("\nsame parameters, all six orderings:")
for order in ("TRS", "TSR", "STR", "SRT", "RTS", "RST"):
    out = apply_chain(x, chain_from_string(order), params)
    print(f"  {order}: {np.round(out, 6)}")

# --- inversion and the singular regime ------------------------------------
# A compound block is invertible exactly when both scale entries are
# nonzero; the closed-form block inverse stays in the same matrix family.

inv = invert_compound_2d(m)
print("\nblock inverse:\n", inv.round(12))
print("m @ inv == I:", np.allclose(m @ inv, np.eye(3), atol=1e-12))

singular = compound_matrix_2d((T, R, S), (0.3, 0.3, 0.5, 0.0, 2.0))
try:
    invert_compound_2d(singular)
except SingularOperatorError as exc:
    print("zero scale is not invertible:", exc)
print(
    "that failure mode is a feature: collapsing a direction is how a "
    "relation maps many entities onto one image"
)
