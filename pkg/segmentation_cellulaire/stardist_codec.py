# segmentation_cellulaire/stardist_codec.py
"""
Ce module encode les cartes d'instances en cibles Stardist et décode les
champs prédits en instances.

Encodage :
- probabilité d'objet = distance euclidienne au fond, normalisée par le
  maximum de chaque instance (chaque cellule culmine à 1) ;
- distances radiales = nombre de pas unitaires le long de chacun des R rayons
  avant d'atteindre le premier pixel hors de l'instance.

Décodage : suppression des non-maxima (NMS) gloutonne sur les polygones
étoilés des pixels candidats, avec une IoU calculée par rastérisation.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt, find_objects
from skimage.draw import polygon as draw_polygon

from .exceptions import InconsistentFieldError
from .models import FieldTensor, InstanceMap, NmsConfig, RadialField, StarPolygon

log = logging.getLogger(__name__)


def ray_directions(rays: int) -> tuple[np.ndarray, np.ndarray]:
    """Pas (ligne, colonne) de chaque rayon : angle 0 = +colonne, angles croissants vers le haut."""
    angles = 2 * np.pi * np.arange(rays) / rays
    return -np.sin(angles), np.cos(angles)


# --- Encodage ---
def encode_prob(mask: InstanceMap) -> FieldTensor:
    """Carte de probabilité d'objet (1 x H x W), nulle sur le fond."""
    prob = np.zeros((mask.height, mask.width), dtype=np.float32)
    for label_id, bbox in enumerate(find_objects(mask.labels), start=1):
        if bbox is None:
            continue
        instance = mask.labels[bbox] == label_id
        # Le bord de l'image compte comme du fond.
        edt = distance_transform_edt(np.pad(instance, 1))[1:-1, 1:-1]
        region = prob[bbox]
        region[instance] = (edt[instance] / edt.max()).astype(np.float32)
    return FieldTensor(prob[np.newaxis])


def _march(inside: np.ndarray, rows: np.ndarray, cols: np.ndarray, d_row: float, d_col: float) -> np.ndarray:
    """Avance par pas unitaires depuis chaque pixel jusqu'au premier pixel hors de `inside`."""
    height, width = inside.shape
    radii = np.zeros(rows.size, dtype=np.float32)
    active = np.arange(rows.size)
    step = 0
    while active.size:
        step += 1
        r = np.floor(rows[active] + step * d_row + 0.5).astype(np.intp)
        c = np.floor(cols[active] + step * d_col + 0.5).astype(np.intp)
        valid = (r >= 0) & (r < height) & (c >= 0) & (c < width)
        still_inside = np.zeros(active.size, dtype=bool)
        still_inside[valid] = inside[r[valid], c[valid]]
        radii[active[~still_inside]] = step
        active = active[still_inside]
    return radii


def encode_radial(mask: InstanceMap, rays: int = 32) -> FieldTensor:
    """Distances radiales (R x H x W) ; le fond vaut 0 dans tous les plans."""
    if rays < 3:
        raise InconsistentFieldError(f"Il faut au moins 3 rayons, reçu {rays}.")
    d_rows, d_cols = ray_directions(rays)
    dist = np.zeros((rays, mask.height, mask.width), dtype=np.float32)
    for label_id, bbox in enumerate(find_objects(mask.labels), start=1):
        if bbox is None:
            continue
        inside = np.pad(mask.labels[bbox] == label_id, 1)
        rows, cols = np.nonzero(inside)
        image_rows = rows - 1 + bbox[0].start
        image_cols = cols - 1 + bbox[1].start
        for k in range(rays):
            dist[k, image_rows, image_cols] = _march(inside, rows, cols, d_rows[k], d_cols[k])
    return FieldTensor(dist)


def encode_stardist(mask: InstanceMap, rays: int = 32) -> RadialField:
    """Cible Stardist complète : probabilité d'objet et distances radiales."""
    return RadialField(prob=encode_prob(mask).data[0], dist=encode_radial(mask, rays).data)


# --- Polygones et IoU rastérisée ---
@dataclass(frozen=True, eq=False)
class _Raster:
    """Pixels d'un polygone rastérisé, stockés dans leur boîte englobante."""

    row0: int
    col0: int
    mask: np.ndarray
    area: int

    @classmethod
    def from_coords(cls, rows: np.ndarray, cols: np.ndarray) -> "_Raster":
        row0, col0 = int(rows.min()), int(cols.min())
        mask = np.zeros((int(rows.max()) - row0 + 1, int(cols.max()) - col0 + 1), dtype=bool)
        mask[rows - row0, cols - col0] = True
        return cls(row0=row0, col0=col0, mask=mask, area=int(rows.size))

    @property
    def row1(self) -> int:
        return self.row0 + self.mask.shape[0]

    @property
    def col1(self) -> int:
        return self.col0 + self.mask.shape[1]


def _raster_iou(a: _Raster, b: _Raster) -> float:
    top, bottom = max(a.row0, b.row0), min(a.row1, b.row1)
    left, right = max(a.col0, b.col0), min(a.col1, b.col1)
    if top >= bottom or left >= right:
        return 0.0
    window_a = a.mask[top - a.row0 : bottom - a.row0, left - a.col0 : right - a.col0]
    window_b = b.mask[top - b.row0 : bottom - b.row0, left - b.col0 : right - b.col0]
    intersection = int(np.count_nonzero(window_a & window_b))
    return intersection / (a.area + b.area - intersection)


def rasterize_polygon(poly: StarPolygon, shape: tuple[int, int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pixels (lignes, colonnes) dont le centre est à l'intérieur du polygone."""
    vertex_rows, vertex_cols = poly.vertices()
    return draw_polygon(vertex_rows, vertex_cols, shape=shape)


def polygon_iou(a: StarPolygon, b: StarPolygon) -> float:
    """IoU rastérisée de deux polygones étoilés ; 0 si les deux rasters sont vides."""
    if a.rays != b.rays:
        raise InconsistentFieldError(f"Polygones à {a.rays} et {b.rays} rayons.")
    rows_a, cols_a = a.vertices()
    rows_b, cols_b = b.vertices()
    # Boîtes englobantes disjointes : aucun pixel commun possible.
    if rows_a.max() < rows_b.min() or rows_b.max() < rows_a.min() or cols_a.max() < cols_b.min() or cols_b.max() < cols_a.min():
        return 0.0
    raster_a = rasterize_polygon(a)
    raster_b = rasterize_polygon(b)
    if not raster_a[0].size or not raster_b[0].size:
        return 0.0
    return _raster_iou(_Raster.from_coords(*raster_a), _Raster.from_coords(*raster_b))


# --- Décodage ---
def decode_nms(field: RadialField, cfg: NmsConfig | None = None, rays: int | None = None) -> InstanceMap:
    """
    Décode un champ Stardist par NMS gloutonne.

    Les candidats sont les pixels de probabilité > seuil, triés par score
    décroissant ; un candidat est supprimé si son IoU avec un polygone déjà
    retenu dépasse le seuil. Les polygones retenus sont peints par score
    croissant (les meilleurs en dernier).
    """
    cfg = cfg or NmsConfig()
    if rays is not None and rays != field.rays:
        raise InconsistentFieldError(f"Le champ contient {field.rays} plans de distance, {rays} rayons attendus.")
    height, width = field.prob.shape

    candidates = field.prob > cfg.prob_threshold
    if height * width > cfg.candidate_stride_pixels:
        grid = np.zeros_like(candidates)
        grid[::2, ::2] = True
        candidates &= grid
    rows, cols = np.nonzero(candidates)
    scores = field.prob[rows, cols]
    order = np.argsort(-scores, kind="stable")

    d_rows, d_cols = ray_directions(field.rays)
    radii = field.dist[:, rows, cols].T.astype(np.float64)
    vertex_rows = rows[:, np.newaxis] + radii * d_rows
    vertex_cols = cols[:, np.newaxis] + radii * d_cols

    kept: list[_Raster] = []
    kept_boxes = np.empty((len(order), 4), dtype=np.int64)
    for idx in order:
        pixel_rows, pixel_cols = draw_polygon(vertex_rows[idx], vertex_cols[idx], shape=(height, width))
        if not pixel_rows.size:
            continue
        raster = _Raster.from_coords(pixel_rows, pixel_cols)
        n_kept = len(kept)
        if n_kept:
            boxes = kept_boxes[:n_kept]
            overlapping = np.flatnonzero((boxes[:, 0] < raster.row1) & (boxes[:, 1] > raster.row0) & (boxes[:, 2] < raster.col1) & (boxes[:, 3] > raster.col0))
            if any(_raster_iou(raster, kept[j]) > cfg.iou_threshold for j in overlapping):
                continue
        kept_boxes[n_kept] = (raster.row0, raster.row1, raster.col0, raster.col1)
        kept.append(raster)

    labels = np.zeros((height, width), dtype=np.int32)
    for rank in range(len(kept) - 1, -1, -1):
        raster = kept[rank]
        window = labels[raster.row0 : raster.row1, raster.col0 : raster.col1]
        window[raster.mask] = rank + 1
    log.debug(f"NMS : {rows.size} candidats, {len(kept)} polygones retenus.")
    return InstanceMap.from_array(labels)
