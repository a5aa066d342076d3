# segmentation_cellulaire/tiler.py
"""
Ce module découpe les grandes images en fenêtres glissantes et recolle les
champs prédits tuile par tuile.

Les fenêtres font 512x512 avec un pas de 384 par défaut ; la dernière
fenêtre de chaque axe est ramenée vers l'intérieur pour rester dans l'image.
Le recollage fait la moyenne arithmétique des tuiles qui se chevauchent ; le
décodage des instances se fait ensuite une seule fois, sur le champ recollé.
"""

import logging

import numpy as np

from .exceptions import CoverageGapError, InvalidConfigError, ShapeMismatchError
from .models import FieldTensor, TilePlan

log = logging.getLogger(__name__)


def _axis_origins(extent: int, window: int, step: int) -> list[int]:
    if extent <= window:
        return [0]
    origins = list(range(0, extent - window, step))
    origins.append(extent - window)
    return origins


def plan_tiles(height: int, width: int, window: int = 512, step: int = 384) -> TilePlan:
    """Calcule les origines des tuiles ; les images plus petites que la fenêtre forment une seule tuile."""
    if window < 1 or not 1 <= step <= window:
        raise InvalidConfigError(f"Il faut window ≥ 1 et 1 ≤ step ≤ window, reçu window={window}, step={step}.")
    if height < 1 or width < 1:
        raise InvalidConfigError(f"Dimensions d'image invalides : {height}x{width}.")
    rows = _axis_origins(height, window, step)
    cols = _axis_origins(width, window, step)
    return TilePlan(height=height, width=width, window=window, step=step, origins=[(r, c) for r in rows for c in cols])


def cut(field: FieldTensor, plan: TilePlan) -> list[tuple[tuple[int, int], FieldTensor]]:
    """Découpe un champ selon le plan, dans l'ordre des origines."""
    if (field.height, field.width) != (plan.height, plan.width):
        raise ShapeMismatchError(f"Champ {field.height}x{field.width} et plan {plan.height}x{plan.width}.")
    patches = []
    for origin in plan.origins:
        rows, cols = plan.tile_slices(origin)
        patches.append((origin, FieldTensor(field.data[:, rows, cols].copy())))
    return patches


def stitch(patches: list[tuple[tuple[int, int], FieldTensor]], plan: TilePlan, out_shape: tuple[int, int, int]) -> FieldTensor:
    """
    Recolle des tuiles en un champ complet : chaque pixel reçoit la moyenne
    des valeurs des tuiles qui le couvrent.
    """
    planes, height, width = out_shape
    if (height, width) != (plan.height, plan.width):
        raise ShapeMismatchError(f"Forme de sortie {height}x{width} incompatible avec le plan {plan.height}x{plan.width}.")
    planned = set(plan.origins)
    total = np.zeros((planes, height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int64)

    for origin, patch in patches:
        origin = (int(origin[0]), int(origin[1]))
        if origin not in planned:
            raise ShapeMismatchError(f"La tuile d'origine {origin} ne fait pas partie du plan.")
        expected = (planes, *plan.tile_shape(origin))
        if patch.shape != expected:
            raise ShapeMismatchError(f"Tuile {origin} de forme {patch.shape}, {expected} attendue.")
        rows, cols = plan.tile_slices(origin)
        total[:, rows, cols] += patch.data
        count[rows, cols] += 1

    if (count == 0).any():
        raise CoverageGapError(f"{int(np.count_nonzero(count == 0))} pixels ne sont couverts par aucune tuile.")
    log.debug(f"Recollage de {len(patches)} tuiles en {planes}x{height}x{width}.")
    return FieldTensor((total / count).astype(np.float32))
