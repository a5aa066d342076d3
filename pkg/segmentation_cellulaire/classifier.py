# segmentation_cellulaire/classifier.py
"""
Ce module contient le classificateur non supervisé à règles.

Chaque image est rangée dans l'une des quatre catégories à partir de son
nombre de canaux, de ses statistiques HSV moyennes et de l'aire de sa plus
grande cellule. Par défaut, la règle « image grise » exige une
saturation moyenne SUPÉRIEURE à θ ; `ClassifierConfig.invert_saturation_test`
permet d'expérimenter la comparaison inverse.
"""

import logging
from collections import Counter
from collections.abc import Iterable

import numpy as np
from skimage.color import rgb2hsv

from .exceptions import DimensionMismatchError, WrongChannelCountError
from .models import ClassificationReport, ClassifierConfig, ImageCategory, InstanceMap, RasterImage

log = logging.getLogger(__name__)


def rgb_to_hsv_stats(image: RasterImage) -> tuple[float, float]:
    """Retourne (saturation moyenne, valeur moyenne) d'une image 3 canaux."""
    if image.channels != 3:
        raise WrongChannelCountError(f"Les statistiques HSV exigent 3 canaux, l'image en a {image.channels}.")
    hsv = rgb2hsv(image.data.astype(np.float64))
    return float(hsv[..., 1].mean()), float(hsv[..., 2].mean())


def max_instance_area(mask: InstanceMap) -> int:
    """Aire (en pixels) de la plus grande instance ; 0 s'il n'y en a aucune."""
    counts = np.bincount(mask.labels.ravel())
    return int(counts[1:].max()) if counts.size > 1 else 0


def _is_gray(mean_saturation: float, mean_value: float, cfg: ClassifierConfig) -> bool:
    if cfg.invert_saturation_test:
        saturation_ok = mean_saturation < cfg.theta
    else:
        saturation_ok = mean_saturation > cfg.theta
    return saturation_ok and cfg.alpha_s < mean_value < cfg.alpha_l


def categorize(image: RasterImage, mask: InstanceMap, cfg: ClassifierConfig | None = None) -> ImageCategory:
    """
    Applique les règles de classement :
    1 canal → classe 0 ; S̄ > θ et αs < V̄ < αl → classe 1 ;
    sinon aire maximale > σ → classe 2, sinon classe 3.
    """
    cfg = cfg or ClassifierConfig()
    if (image.height, image.width) != (mask.height, mask.width):
        raise DimensionMismatchError(f"Image {image.height}x{image.width} et masque {mask.height}x{mask.width} de tailles différentes.")

    if image.channels == 1:
        return ImageCategory.BINARY

    mean_saturation, mean_value = rgb_to_hsv_stats(image)
    if _is_gray(mean_saturation, mean_value, cfg):
        category = ImageCategory.GRAY
    elif max_instance_area(mask) > cfg.sigma:
        category = ImageCategory.LARGE_CELL
    else:
        category = ImageCategory.SMALL_CELL
    log.debug(f"Classement : S̄={mean_saturation:.4f}, V̄={mean_value:.4f} → classe {int(category)}.")
    return category


def classification_report(pairs: Iterable[tuple[ImageCategory, ImageCategory]]) -> ClassificationReport:
    """
    Compare des paires (prédite, référence).

    L'exactitude globale est le nombre d'images bien classées sur le nombre
    total d'images, et non la moyenne des exactitudes par classe.
    """
    totals: Counter[ImageCategory] = Counter()
    corrects: Counter[ImageCategory] = Counter()
    for predicted, reference in pairs:
        totals[reference] += 1
        if predicted == reference:
            corrects[reference] += 1

    total = sum(totals.values())
    per_class = {category: corrects[category] / totals[category] for category in ImageCategory if totals[category]}
    overall = sum(corrects.values()) / total if total else 0.0
    return ClassificationReport(per_class=per_class, overall=overall, total=total)
