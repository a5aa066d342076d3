# segmentation_cellulaire/hover_codec.py
"""
Ce module encode les cartes d'instances en cibles HoverNet et décode les
champs prédits par watershed contrôlé par marqueurs.

C'est la voie utilisée pour les images grises (classe 1), dont les cellules
irrégulières ou peu convexes ne se décrivent pas par un polygone étoilé.
"""

import logging

import numpy as np
from scipy import ndimage as ndi
from skimage.segmentation import relabel_sequential, watershed

from .exceptions import InconsistentFieldError
from .models import FieldTensor, HoverField, InstanceMap, WatershedConfig
from .utils import hv_gradients

log = logging.getLogger(__name__)


def _rescale_offsets(offsets: np.ndarray) -> np.ndarray:
    """Ramène les décalages dans [-1, 1], côtés négatif et positif mis à l'échelle séparément."""
    scaled = offsets.copy()
    negative = offsets < 0
    positive = offsets > 0
    if negative.any():
        scaled[negative] /= -offsets.min()
    if positive.any():
        scaled[positive] /= offsets.max()
    return scaled


def encode_hover(mask: InstanceMap) -> HoverField:
    """
    Cible HoverNet : carte CP (fond, cellule) et cartes HV.

    Le centre d'une cellule est son centroïde ; la valeur horizontale d'un
    pixel est (colonne - colonne du centroïde) remise à l'échelle par instance,
    la valeur verticale est l'analogue sur les lignes. Le fond vaut 0.
    """
    foreground = mask.foreground.astype(np.float32)
    cp = np.stack([1.0 - foreground, foreground]).astype(np.float32)
    hv = np.zeros((2, mask.height, mask.width), dtype=np.float32)

    for label_id, bbox in enumerate(ndi.find_objects(mask.labels), start=1):
        if bbox is None:
            continue
        instance = mask.labels[bbox] == label_id
        rows, cols = np.nonzero(instance)
        hv[0][bbox][instance] = _rescale_offsets(cols - cols.mean())
        hv[1][bbox][instance] = _rescale_offsets(rows - rows.mean())
    return HoverField(cp=cp, hv=hv)


def hv_gradient_energy(hv: FieldTensor) -> FieldTensor:
    """
    Énergie de gradient max(|∇x h|, |∇y v|), normalisée min-max dans [0,1].

    Un champ constant donne une énergie identiquement nulle.
    """
    if hv.planes != 2:
        raise InconsistentFieldError(f"Les cartes HV doivent contenir 2 plans, {hv.planes} reçus.")
    grad_x, grad_y = hv_gradients(hv.data)
    energy = np.maximum(np.abs(grad_x), np.abs(grad_y))
    if not energy.size or energy.max() - energy.min() <= 0:
        return FieldTensor(np.zeros((1, hv.height, hv.width), dtype=np.float32))
    low, high = energy.min(), energy.max()
    return FieldTensor(((energy - low) / (high - low))[np.newaxis].astype(np.float32))


def extract_markers(foreground: np.ndarray, energy: np.ndarray, cfg: WatershedConfig) -> np.ndarray:
    """
    Marqueurs = composantes 4-connexes du premier plan privé des pixels
    d'énergie élevée ; les composantes trop petites sont écartées.
    """
    seeds = foreground & ~(energy > cfg.marker_energy_threshold)
    markers, _ = ndi.label(seeds)
    sizes = np.bincount(markers.ravel())
    too_small = sizes < cfg.min_marker_size
    too_small[0] = False
    markers[too_small[markers]] = 0
    markers, _, _ = relabel_sequential(markers)
    return markers


def decode_watershed(field: HoverField, cfg: WatershedConfig | None = None) -> InstanceMap:
    """
    Décode un champ HoverNet par watershed contrôlé par marqueurs.

    Le relief est l'énergie de gradient des cartes HV, l'inondation est
    restreinte au premier plan seuillé de la carte CP ; chaque bassin devient
    une instance.
    """
    cfg = cfg or WatershedConfig()
    height, width = field.cp.shape[1:]
    foreground = field.cp[1] > cfg.cp_threshold
    if not foreground.any():
        return InstanceMap.empty(height, width)

    energy = hv_gradient_energy(FieldTensor(field.hv)).data[0].astype(np.float64)
    markers = extract_markers(foreground, energy, cfg)
    if not markers.any():
        log.warning("Watershed : premier plan détecté mais aucun marqueur retenu.")
        return InstanceMap.empty(height, width)

    # Inondation par priorité (file FIFO à énergie égale), 4-connexité.
    labels = watershed(energy, markers=markers, mask=foreground, connectivity=1)
    log.debug(f"Watershed : {int(markers.max())} marqueurs.")
    return InstanceMap.from_array(labels)
