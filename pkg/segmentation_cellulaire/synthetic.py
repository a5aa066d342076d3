# segmentation_cellulaire/synthetic.py
"""
Ce module génère des masques et des images synthétiques déterministes.

Ils servent de jeux de référence à l'autotest (`selftest`) et aux tests :
disques, disques accolés le long d'une ligne, amas convexes aléatoires
séparés par un fond d'au moins 3 pixels, formes non convexes (C, croix) et
images de démonstration couvrant les quatre catégories.
"""

import numpy as np
from scipy import ndimage as ndi
from skimage.draw import disk, ellipse

from .models import ImageCategory, InstanceMap, RasterImage


def disk_mask(shape: tuple[int, int], center: tuple[int, int], radius: float) -> InstanceMap:
    labels = np.zeros(shape, dtype=np.int32)
    labels[disk(center, radius, shape=shape)] = 1
    return InstanceMap.from_array(labels)


def touching_disks(shape: tuple[int, int], center: tuple[int, int], radius: float, separation: float, vertical: bool = False) -> InstanceMap:
    """
    Deux disques qui se chevauchent, partagés par la médiatrice de leurs
    centres : les deux instances se touchent le long d'un segment droit.
    """
    row, col = center
    half = separation / 2
    if vertical:
        first, second = (row - half, col), (row + half, col)
    else:
        first, second = (row, col - half), (row, col + half)

    union = np.zeros(shape, dtype=bool)
    union[disk(first, radius, shape=shape)] = True
    union[disk(second, radius, shape=shape)] = True
    rows, cols = np.indices(shape)
    coord = rows if vertical else cols
    split = row if vertical else col

    labels = np.zeros(shape, dtype=np.int32)
    labels[union & (coord < split)] = 1
    labels[union & (coord >= split)] = 2
    return InstanceMap.from_array(labels)


def c_shape(shape: tuple[int, int], center: tuple[int, int], outer: float = 16, inner: float = 8, opening: int = 8) -> InstanceMap:
    """Anneau ouvert sur la droite (forme en C), non étoilé par rapport à son centroïde."""
    rows, cols = np.indices(shape)
    distance = np.hypot(rows - center[0], cols - center[1])
    ring = (distance <= outer) & (distance >= inner)
    gap = (cols > center[1]) & (np.abs(rows - center[0]) < opening)
    return InstanceMap.from_array((ring & ~gap).astype(np.int32))


def cross_shape(shape: tuple[int, int], center: tuple[int, int], arm: int = 14, thickness: int = 7) -> InstanceMap:
    labels = np.zeros(shape, dtype=np.int32)
    row, col = center
    half = thickness // 2
    labels[max(row - arm, 0) : row + arm + 1, max(col - half, 0) : col + half + 1] = 1
    labels[max(row - half, 0) : row + half + 1, max(col - arm, 0) : col + arm + 1] = 1
    return InstanceMap.from_array(labels)


def combine(shape: tuple[int, int], masks: list[InstanceMap]) -> InstanceMap:
    """Superpose des masques sans chevauchement en une seule carte d'instances."""
    labels = np.zeros(shape, dtype=np.int32)
    offset = 0
    for mask in masks:
        labels[mask.foreground] = mask.labels[mask.foreground] + offset
        offset += mask.count
    return InstanceMap.from_array(labels)


def random_blobs(
    shape: tuple[int, int],
    count: int,
    rng: np.random.Generator,
    min_axis: float = 6,
    max_axis: float = 14,
    gap: int = 3,
    max_attempts: int = 2000,
) -> InstanceMap:
    """
    Ellipses aléatoires (convexes, donc étoilées) sans contact, séparées par
    au moins `gap` pixels de fond. Peut en placer moins que `count` si la
    place manque.
    """
    labels = np.zeros(shape, dtype=np.int32)
    placed = 0
    for _ in range(max_attempts):
        if placed == count:
            break
        r_radius, c_radius = rng.uniform(min_axis, max_axis, size=2)
        margin = int(np.ceil(max(r_radius, c_radius))) + 1
        if 2 * margin >= min(shape):
            continue
        center = (rng.integers(margin, shape[0] - margin), rng.integers(margin, shape[1] - margin))
        rr, cc = ellipse(center[0], center[1], r_radius, c_radius, shape=shape, rotation=rng.uniform(0, np.pi))
        occupied = ndi.binary_dilation(labels > 0, iterations=gap) if placed else np.zeros(shape, dtype=bool)
        if occupied[rr, cc].any():
            continue
        placed += 1
        labels[rr, cc] = placed
    return InstanceMap.from_array(labels)


def demo_image(category: ImageCategory, shape: tuple[int, int], rng: np.random.Generator) -> RasterImage:
    """
    Image synthétique dont les statistiques HSV correspondent à la catégorie
    demandée avec les seuils par défaut. Pour les classes 2 et 3, c'est le
    masque qui détermine la catégorie (aire maximale).
    """
    noise = rng.uniform(-0.02, 0.02, size=(*shape, 1))
    if category == ImageCategory.BINARY:
        return RasterImage(np.clip(0.5 + noise, 0, 1).astype(np.float32))
    if category == ImageCategory.GRAY:
        # S̄ ≈ 0.5 > θ et V̄ ≈ 0.4 dans (αs, αl).
        base = np.array([0.4, 0.2, 0.2])
    else:
        # S̄ ≈ 0 : image « couleur » au sens de la règle.
        base = np.array([0.8, 0.8, 0.8])
    return RasterImage(np.clip(base + noise, 0, 1).astype(np.float32))
