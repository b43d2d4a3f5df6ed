"""Affine operator algebra on 2D coordinate blocks.

Embedding vectors of even dimension ``d`` are treated as ``d/2`` planar
blocks: coordinates ``(2i, 2i+1)`` form block ``i``.  Three elementary
operators act on the blocks:

* translation by a vector ``t`` (elementwise addition),
* rotation of every block by its own angle (counterclockwise),
* scaling by a vector ``s`` (elementwise product).

A chain of distinct operators, written in matrix-product order, composes
into a single affine map per block.  ``chain = (T, R, S)`` denotes the
product T.R.S, so scaling is applied first and translation last.  Each
block's compound map has a homogeneous 3x3 matrix representation with
bottom row (0, 0, 1); products and inverses of those matrices stay in
that form, which is what makes the operator family closed under
composition and (when the scaling is nonzero) inversion.

All functions are pure and broadcast over leading batch dimensions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SingularOperatorError

__all__ = [
    "OperatorKind",
    "TransformParams",
    "apply_translation",
    "apply_rotation",
    "apply_scaling",
    "apply_chain",
    "chain_from_string",
    "chain_to_string",
    "validate_chain",
    "compound_matrix_2d",
    "invert_compound_2d",
    "chain_block_matrices",
    "DET_TOLERANCE",
]

# |det A| below this is treated as singular when inverting a block.
DET_TOLERANCE = 1e-8


class OperatorKind(enum.Enum):
    """The three elementary block operators."""

    TRANSLATION = "T"
    ROTATION = "R"
    SCALING = "S"


_KIND_BY_LETTER = {k.value: k for k in OperatorKind}


def validate_chain(chain) -> tuple[OperatorKind, ...]:
    """Check a chain (sequence of OperatorKind) and return it as a tuple.

    A valid chain has length 0..3 and pairwise distinct kinds.  An empty
    chain is the identity map.
    """
    chain = tuple(chain)
    for op in chain:
        if not isinstance(op, OperatorKind):
            raise ValueError(f"chain entries must be OperatorKind, got {op!r}")
    if len(chain) > 3 or len(set(chain)) != len(chain):
        raise ValueError(
            f"chain must hold at most one of each operator kind, got {chain}"
        )
    return chain


def chain_from_string(order: str) -> tuple[OperatorKind, ...]:
    """Parse an order string like ``"SRT"`` into an operator chain.

    The string is read as a matrix product, so the last letter is the
    first operator applied.  Valid letters: T (translation), R
    (rotation), S (scaling), each at most once.
    """
    try:
        chain = tuple(_KIND_BY_LETTER[c] for c in order.upper())
    except KeyError as exc:
        raise ValueError(
            f"invalid operator letter {exc.args[0]!r} in order string {order!r}; "
            "valid tokens are T, R, S"
        ) from None
    return validate_chain(chain)


def chain_to_string(chain) -> str:
    return "".join(op.value for op in chain)


@dataclass
class TransformParams:
    """Parameters of one compound operator over all blocks.

    Attributes
    ----------
    translation : ndarray, shape (d,)
        Per-coordinate offset.
    angles : ndarray, shape (d // 2,)
        Per-block rotation angle in radians.  Stored unconstrained;
        application is periodic so no wrapping is needed.
    scale : ndarray, shape (d,)
        Per-coordinate factor.  Zeros are allowed: singular scaling is
        how many-to-one behaviour is expressed, not an error.
    """

    translation: np.ndarray
    angles: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        d = self.translation.shape[-1]
        if self.scale.shape[-1] != d:
            raise ValueError(
                f"translation ({d}) and scale ({self.scale.shape[-1]}) "
                "must share the embedding dimension"
            )
        if self.angles.shape[-1] != d // 2:
            raise ValueError(
                f"angles must have dimension d//2 = {d // 2}, "
                f"got {self.angles.shape[-1]}"
            )

    @property
    def dim(self) -> int:
        return self.translation.shape[-1]

    @classmethod
    def identity(cls, dim: int) -> "TransformParams":
        return cls(np.zeros(dim), np.zeros(dim // 2), np.ones(dim))

    def copy(self) -> "TransformParams":
        return TransformParams(
            self.translation.copy(), self.angles.copy(), self.scale.copy()
        )


def _check_same_dim(x, other, name):
    if x.shape[-1] != other.shape[-1]:
        raise ValueError(
            f"dimension mismatch: x has {x.shape[-1]}, {name} has {other.shape[-1]}"
        )


def apply_translation(x, t):
    """Return ``x + t`` elementwise."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    _check_same_dim(x, t, "translation")
    return x + t


def apply_scaling(x, s):
    """Return the elementwise product ``x * s``."""
    x = np.asarray(x, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    _check_same_dim(x, s, "scale")
    return x * s


def apply_rotation(x, angles):
    """Rotate each 2D block of ``x`` counterclockwise by its angle.

    Block ``i`` holds coordinates ``(2i, 2i+1)``; ``angles`` supplies one
    angle per block.  Each block's Euclidean norm is preserved.
    """
    x = np.asarray(x, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    d = x.shape[-1]
    if d % 2 != 0:
        raise ValueError(f"rotation needs an even dimension, got d={d}")
    if angles.shape[-1] != d // 2:
        raise ValueError(
            f"expected {d // 2} angles for dimension {d}, got {angles.shape[-1]}"
        )
    c = np.cos(angles)
    s = np.sin(angles)
    xe = x[..., 0::2]
    xo = x[..., 1::2]
    out_e = xe * c - xo * s
    out_o = xe * s + xo * c
    out = np.empty(out_e.shape[:-1] + (d,), dtype=np.float64)
    out[..., 0::2] = out_e
    out[..., 1::2] = out_o
    return out


def apply_chain(x, chain, params: TransformParams):
    """Apply an operator chain to ``x``.

    The chain is written in matrix-product order: the last operator in
    the sequence acts first.  An empty chain returns ``x`` unchanged.
    """
    chain = validate_chain(chain)
    x = np.asarray(x, dtype=np.float64)
    for op in reversed(chain):
        if op is OperatorKind.TRANSLATION:
            x = apply_translation(x, params.translation)
        elif op is OperatorKind.ROTATION:
            x = apply_rotation(x, params.angles)
        else:
            x = apply_scaling(x, params.scale)
    return x


# ---------------------------------------------------------------------------
# Homogeneous 3x3 block matrices
# ---------------------------------------------------------------------------

def _translation_matrix(v_x, v_y):
    return np.array([[1.0, 0.0, v_x], [0.0, 1.0, v_y], [0.0, 0.0, 1.0]])


def _rotation_matrix(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _scaling_matrix(s_x, s_y):
    return np.array([[s_x, 0.0, 0.0], [0.0, s_y, 0.0], [0.0, 0.0, 1.0]])


def compound_matrix_2d(chain, block_params) -> np.ndarray:
    """Homogeneous 3x3 matrix of a chain on a single block.

    Parameters
    ----------
    chain : sequence of OperatorKind
        Operator product, written order (rightmost applies first).
    block_params : tuple (v_x, v_y, theta, s_x, s_y)
        Translation offsets, rotation angle, and scale factors for the
        block.  Entries of operators absent from the chain are ignored.

    Returns
    -------
    ndarray, shape (3, 3)
        The compound map; bottom row is exactly (0, 0, 1).  For the full
        chain (T, R, S) it equals
        ``[[s_x cos(theta), -s_y sin(theta), v_x],
        [s_x sin(theta), s_y cos(theta), v_y], [0, 0, 1]]``.
    """
    chain = validate_chain(chain)
    v_x, v_y, theta, s_x, s_y = (float(p) for p in block_params)
    m = np.eye(3)
    for op in chain:
        if op is OperatorKind.TRANSLATION:
            m = m @ _translation_matrix(v_x, v_y)
        elif op is OperatorKind.ROTATION:
            m = m @ _rotation_matrix(theta)
        else:
            m = m @ _scaling_matrix(s_x, s_y)
    m[2, 0] = 0.0
    m[2, 1] = 0.0
    m[2, 2] = 1.0
    return m


def invert_compound_2d(m, det_tolerance: float = DET_TOLERANCE) -> np.ndarray:
    """Invert a homogeneous block matrix in closed block form.

    For ``m = [[A, v], [0, 1]]`` the inverse is ``[[A^-1, -A^-1 v], [0, 1]]``.

    Raises
    ------
    SingularOperatorError
        If ``|det A| < det_tolerance``.  Singular blocks are a modelling
        feature of many-to-x relations, so this error is a signal, not a
        failure of the caller's math.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    det = a * d - b * c
    if abs(det) < det_tolerance:
        raise SingularOperatorError(
            f"block determinant {det:.3e} below tolerance {det_tolerance:.1e}"
        )
    inv_a = np.array([[d, -b], [-c, a]]) / det
    out = np.eye(3)
    out[:2, :2] = inv_a
    out[:2, 2] = -inv_a @ m[:2, 2]
    return out


def chain_block_matrices(chain, params: TransformParams) -> np.ndarray:
    """Stack of per-block 3x3 matrices for a full parameter set.

    Returns an array of shape (d // 2, 3, 3); block ``i`` transforms
    coordinates ``(2i, 2i+1)``.
    """
    chain = validate_chain(chain)
    d = params.dim
    if d % 2 != 0:
        raise ValueError(f"block matrices need an even dimension, got d={d}")
    n_blocks = d // 2
    out = np.empty((n_blocks, 3, 3))
    for i in range(n_blocks):
        out[i] = compound_matrix_2d(
            chain,
            (
                params.translation[2 * i],
                params.translation[2 * i + 1],
                params.angles[i],
                params.scale[2 * i],
                params.scale[2 * i + 1],
            ),
        )
    return out


# ---------------------------------------------------------------------------
# Chain forward with tape / vector-Jacobian backward (used by scoring)
# ---------------------------------------------------------------------------

@dataclass
class ChainGrads:
    """Gradients of a scalar with respect to one chain's parameters.

    Arrays have the same leading shape as the upstream gradient; entries
    for operators absent from the chain are zero-filled.
    """

    translation: np.ndarray
    angles: np.ndarray
    scale: np.ndarray


def chain_forward_tape(x, chain, params: TransformParams):
    """Apply a chain and record each operator's input for backprop.

    Returns ``(y, tape)`` where ``tape`` is a list of (kind, input) pairs
    in application order.
    """
    chain = validate_chain(chain)
    x = np.asarray(x, dtype=np.float64)
    tape = []
    for op in reversed(chain):
        tape.append((op, x))
        if op is OperatorKind.TRANSLATION:
            x = apply_translation(x, params.translation)
        elif op is OperatorKind.ROTATION:
            x = apply_rotation(x, params.angles)
        else:
            x = apply_scaling(x, params.scale)
    return x, tape


def chain_backward(grad_out, params: TransformParams, tape):
    """Vector-Jacobian product back through a taped chain application.

    Parameters
    ----------
    grad_out : ndarray, shape (..., d)
        Gradient of the scalar objective with respect to the chain output.
    params : TransformParams
        Parameters the forward pass used.
    tape : list
        The record produced by :func:`chain_forward_tape`.

    Returns
    -------
    (grad_x, ChainGrads)
        Gradient with respect to the chain input, and per-operator
        parameter gradients (not reduced over batch dimensions).
    """
    g = np.asarray(grad_out, dtype=np.float64)
    batch_shape = g.shape[:-1]
    d = g.shape[-1]
    grads = ChainGrads(
        translation=np.zeros(batch_shape + (d,)),
        angles=np.zeros(batch_shape + (d // 2,)),
        scale=np.zeros(batch_shape + (d,)),
    )
    for op, x_in in reversed(tape):
        if op is OperatorKind.TRANSLATION:
            grads.translation = grads.translation + g
        elif op is OperatorKind.SCALING:
            grads.scale = grads.scale + g * x_in
            g = g * params.scale
        else:
            c = np.cos(params.angles)
            s = np.sin(params.angles)
            xe, xo = x_in[..., 0::2], x_in[..., 1::2]
            ge, go = g[..., 0::2], g[..., 1::2]
            # d/d theta of the rotated block, contracted with the upstream grad
            grads.angles = grads.angles + ge * (-xe * s - xo * c) + go * (
                xe * c - xo * s
            )
            ge_new = ge * c + go * s
            go_new = -ge * s + go * c
            g = np.empty(ge_new.shape[:-1] + (d,), dtype=np.float64)
            g[..., 0::2] = ge_new
            g[..., 1::2] = go_new
    return g, grads
