"""Numerical diagnostics of learned relation operators.

Every relation is a pair of per-block affine maps (M for the head
chain, M-hat for the tail chain).  Relation patterns correspond to
algebraic identities between those maps:

* symmetric:    M M^-1-hat  ==  M-hat M^-1
* inverse pair: M2-hat^-1 M2  ==  M1^-1 M1-hat
* transitive:   M3-hat^-1 M3  ==  (M2-hat^-1 M2)(M1-hat^-1 M1)
* many-to-x:    the relevant side's map is singular
* sub-relation: scales equal up to a factor gamma <= 1 with shared
  translation/rotation, which makes one score dominate the other.

Residuals measure the max-abs deviation from the identity, per block,
worst block reported.  Singular blocks cannot enter identities that
need an inverse; they are excluded and counted separately.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SingularOperatorError
from .model import KGEModel
from .scoring import CompoundSpec, RelationParams, score
from .transforms import OperatorKind, chain_block_matrices, invert_compound_2d

__all__ = [
    "relation_matrices",
    "symmetry_residual",
    "inversion_residual",
    "composition_residual",
    "subrelation_score_gap",
    "RelationDiagnostics",
    "relation_diagnostics",
    "export_relation_histograms",
    "export_entity_embeddings",
    "TRAINED_SCALE_TOLERANCE",
    "EXACT_SCALE_TOLERANCE",
]

log = logging.getLogger(__name__)

# Trained scale values cluster near zero without hitting it exactly, so
# the singularity count uses a loose threshold; analytically constructed
# cases use the strict one.
TRAINED_SCALE_TOLERANCE = 1e-2
EXACT_SCALE_TOLERANCE = 1e-8


def relation_matrices(r: RelationParams, spec: CompoundSpec):
    """Per-block homogeneous matrices (M, M_hat) of one relation."""
    m = chain_block_matrices(spec.head_chain, r.head)
    m_hat = chain_block_matrices(spec.tail_chain, r.tail)
    return m, m_hat


def _block_inverses(blocks, det_tolerance):
    """Inverses where they exist; None marks singular blocks."""
    out = []
    for b in blocks:
        try:
            out.append(invert_compound_2d(b, det_tolerance))
        except SingularOperatorError:
            out.append(None)
    return out


def _max_abs_residual(pairs):
    """Worst max-abs difference over (lhs, rhs) matrix pairs.

    NaN when no block was applicable.
    """
    worst = -1.0
    for lhs, rhs in pairs:
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst if worst >= 0 else math.nan


def symmetry_residual(m, m_hat, det_tolerance: float = EXACT_SCALE_TOLERANCE) -> float:
    """Deviation from the symmetric-relation identity M M_hat^-1 == M_hat M^-1.

    Blocks where either map is singular are excluded (and counted in
    the log); returns NaN if nothing is applicable.
    """
    inv_m = _block_inverses(m, det_tolerance)
    inv_h = _block_inverses(m_hat, det_tolerance)
    pairs = []
    skipped = 0
    for mi, hi, inv_mi, inv_hi in zip(m, m_hat, inv_m, inv_h):
        if inv_mi is None or inv_hi is None:
            skipped += 1
            continue
        pairs.append((mi @ inv_hi, hi @ inv_mi))
    if skipped:
        log.debug("symmetry_residual skipped %d singular blocks", skipped)
    return _max_abs_residual(pairs)


def inversion_residual(
    m1, m1_hat, m2, m2_hat, det_tolerance: float = EXACT_SCALE_TOLERANCE
) -> float:
    """Deviation from the inverse-relation identity
    M2_hat^-1 M2 == M1^-1 M1_hat."""
    inv_h2 = _block_inverses(m2_hat, det_tolerance)
    inv_m1 = _block_inverses(m1, det_tolerance)
    pairs = []
    skipped = 0
    for a1, h1, a2, inv1, inv2 in zip(m1, m1_hat, m2, inv_m1, inv_h2):
        if inv1 is None or inv2 is None:
            skipped += 1
            continue
        pairs.append((inv2 @ a2, inv1 @ h1))
    if skipped:
        log.debug("inversion_residual skipped %d singular blocks", skipped)
    return _max_abs_residual(pairs)


def composition_residual(
    m1, m1_hat, m2, m2_hat, m3, m3_hat, det_tolerance: float = EXACT_SCALE_TOLERANCE
) -> float:
    """Deviation from the transitivity identity
    M3_hat^-1 M3 == (M2_hat^-1 M2)(M1_hat^-1 M1)."""
    inv1 = _block_inverses(m1_hat, det_tolerance)
    inv2 = _block_inverses(m2_hat, det_tolerance)
    inv3 = _block_inverses(m3_hat, det_tolerance)
    pairs = []
    skipped = 0
    for a1, a2, a3, i1, i2, i3 in zip(m1, m2, m3, inv1, inv2, inv3):
        if i1 is None or i2 is None or i3 is None:
            skipped += 1
            continue
        pairs.append((i3 @ a3, (i2 @ a2) @ (i1 @ a1)))
    if skipped:
        log.debug("composition_residual skipped %d singular blocks", skipped)
    return _max_abs_residual(pairs)


def subrelation_score_gap(
    r1: RelationParams,
    r2: RelationParams,
    spec: CompoundSpec,
    heads,
    tails,
) -> float:
    """Largest score difference f_r1 - f_r2 over sample (h, t) pairs.

    When r1 equals r2 except for scales multiplied by a factor
    gamma <= 1 (translations zero, rotations shared), the gap cannot be
    positive: the narrower relation never scores worse.
    """
    heads = np.asarray(heads, dtype=np.float64)
    tails = np.asarray(tails, dtype=np.float64)
    f1 = score(heads, r1, tails, spec)
    f2 = score(heads, r2, tails, spec)
    return float(np.max(f1 - f2))


@dataclass
class RelationDiagnostics:
    """Per-relation operator health indicators.

    ``singularity_fraction`` is the share of scale entries (over the
    sides whose chain scales) with magnitude below the tolerance;
    ``block_det_min`` the smallest |det| over both sides' blocks;
    ``symmetry_residual`` the symmetric-identity deviation (NaN when
    every block is singular).  ``singular_blocks`` counts blocks whose
    determinant fell below the strict inversion tolerance.
    """

    relation: int
    singularity_fraction: float
    block_det_min: float
    symmetry_residual: float
    singular_blocks: int

    def row(self) -> tuple:
        return (
            self.relation,
            self.singularity_fraction,
            self.block_det_min,
            self.symmetry_residual,
            self.singular_blocks,
        )


def relation_diagnostics(
    model: KGEModel,
    rid: int,
    scale_tolerance: float = TRAINED_SCALE_TOLERANCE,
) -> RelationDiagnostics:
    spec = model.spec
    r = model.relation_params(rid)
    m, m_hat = relation_matrices(r, spec)

    scales = []
    if OperatorKind.SCALING in spec.head_chain:
        scales.append(r.head.scale)
    if OperatorKind.SCALING in spec.tail_chain:
        scales.append(r.tail.scale)
    if scales:
        entries = np.concatenate(scales)
        singularity_fraction = float(np.mean(np.abs(entries) < scale_tolerance))
    else:
        singularity_fraction = 0.0

    dets = [abs(np.linalg.det(b[:2, :2])) for b in np.concatenate([m, m_hat])]
    singular_blocks = sum(1 for det in dets if det < EXACT_SCALE_TOLERANCE)
    return RelationDiagnostics(
        relation=rid,
        singularity_fraction=singularity_fraction,
        block_det_min=float(min(dets)),
        symmetry_residual=symmetry_residual(m, m_hat),
        singular_blocks=singular_blocks,
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

HISTOGRAM_COLUMNS = ("component", "side", "bin_left", "bin_right", "count")


def _histogram_rows(values, component, side, bins):
    counts, edges = np.histogram(values, bins=bins)
    return [
        {
            "component": component,
            "side": side,
            "bin_left": float(edges[i]),
            "bin_right": float(edges[i + 1]),
            "count": int(counts[i]),
        }
        for i in range(len(counts))
    ]


def export_relation_histograms(
    model: KGEModel,
    relation: int | str,
    bins: int = 50,
    out_path=None,
    relation_names: list[str] | None = None,
) -> list[dict]:
    """Binned parameter-value counts for one relation.

    One row per (component, side, bin); counts per component sum to the
    number of exported entries.  Sides follow the chains: components an
    operator chain does not contain are not exported, and a shared
    rotation is exported once with side ``"shared"``.  Returns the rows;
    also writes them as CSV when ``out_path`` is given.
    """
    if isinstance(relation, str):
        if relation_names is None:
            raise KeyError("relation name lookup needs relation_names")
        try:
            rid = relation_names.index(relation)
        except ValueError:
            raise KeyError(f"unknown relation name {relation!r}") from None
    else:
        rid = int(relation)
        if not 0 <= rid < model.n_relations:
            raise KeyError(f"relation id {rid} out of range")

    spec = model.spec
    r = model.relation_params(rid)
    rows = []
    if OperatorKind.TRANSLATION in spec.head_chain:
        rows += _histogram_rows(r.head.translation, "translation", "head", bins)
    if OperatorKind.TRANSLATION in spec.tail_chain:
        rows += _histogram_rows(r.tail.translation, "translation", "tail", bins)
    if OperatorKind.SCALING in spec.head_chain:
        rows += _histogram_rows(r.head.scale, "scaling", "head", bins)
    if OperatorKind.SCALING in spec.tail_chain:
        rows += _histogram_rows(r.tail.scale, "scaling", "tail", bins)
    if model.shared_rotation and spec.both_rotations:
        rows += _histogram_rows(r.head.angles, "rotation", "shared", bins)
    else:
        if OperatorKind.ROTATION in spec.head_chain:
            rows += _histogram_rows(r.head.angles, "rotation", "head", bins)
        if OperatorKind.ROTATION in spec.tail_chain:
            rows += _histogram_rows(r.tail.angles, "rotation", "tail", bins)

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=HISTOGRAM_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return rows


def export_entity_embeddings(
    model: KGEModel,
    entity_names: list[str],
    out_path,
    label_path=None,
) -> int:
    """Write the entity table as CSV: ``entity_name,dim_0..dim_{d-1}[,label]``.

    An optional label file (``entity<TAB>label`` lines) adds a label
    column; entities missing from it are warned about and left blank.
    Returns the number of data rows written.
    """
    labels = None
    if label_path is not None:
        labels = {}
        with open(label_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(f"label line needs 'entity<TAB>label': {line!r}")
                labels[parts[0]] = parts[1]
        missing = [n for n in entity_names if n not in labels]
        if missing:
            log.warning(
                "%d entities have no label (e.g. %r); exported unlabeled",
                len(missing),
                missing[0],
            )

    d = model.dim
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["entity_name"] + [f"dim_{j}" for j in range(d)]
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, name in enumerate(entity_names):
            row = [name] + [f"{x:.9g}" for x in model.entities[i]]
            if labels is not None:
                row.append(labels.get(name, ""))
            writer.writerow(row)
    return len(entity_names)
