# segmentation_cellulaire/metrics.py
"""
Ce module contient les métriques d'évaluation du challenge.

- Appariement d'instances : une instance prédite est un vrai positif si sa
  meilleure IoU avec une cellule de vérité terrain est STRICTEMENT supérieure
  à 0.5. Au-delà de 0.5 les paires sont forcément uniques, aucune affectation
  explicite n'est nécessaire.
- F1 moyen : moyenne non pondérée des F1 par image (deux cartes vides
  donnent F1 = 0, par application littérale de la formule).
- Tolérance de temps : 10 s jusqu'à 1 000 000 pixels, sinon
  arrondi(pixels x 1e-5) s.
"""

import math
from collections.abc import Iterable

import numpy as np

from .exceptions import DimensionMismatchError, EmptyInputError
from .models import ImageCategory, InstanceMap, MatchReport, TimingRecord

IOU_MATCH_THRESHOLD = 0.5
TOLERANCE_PIXEL_LIMIT = 1_000_000
TOLERANCE_MIN_SECONDS = 10
TOLERANCE_SECONDS_PER_PIXEL = 1e-5


def _check_dims(pred: InstanceMap, gt: InstanceMap) -> None:
    if pred.labels.shape != gt.labels.shape:
        raise DimensionMismatchError(f"Prédiction {pred.labels.shape} et vérité terrain {gt.labels.shape} de tailles différentes.")


def instance_iou_matrix(pred: InstanceMap, gt: InstanceMap) -> np.ndarray:
    """Matrice Kpred x Kgt des IoU, calculée en une seule passe de comptage."""
    _check_dims(pred, gt)
    k_pred, k_gt = pred.count, gt.count
    pairs = pred.labels.ravel().astype(np.int64) * (k_gt + 1) + gt.labels.ravel()
    confusion = np.bincount(pairs, minlength=(k_pred + 1) * (k_gt + 1)).reshape(k_pred + 1, k_gt + 1)

    intersection = confusion[1:, 1:].astype(np.float64)
    area_pred = confusion[1:, :].sum(axis=1).astype(np.float64)
    area_gt = confusion[:, 1:].sum(axis=0).astype(np.float64)
    union = area_pred[:, np.newaxis] + area_gt[np.newaxis, :] - intersection
    return np.divide(intersection, union, out=np.zeros_like(intersection), where=union > 0)


def match_f1(pred: InstanceMap, gt: InstanceMap) -> MatchReport:
    """Compte TP/FP/FN et calcule précision, rappel et F1 pour une image."""
    iou = instance_iou_matrix(pred, gt)
    k_pred, k_gt = iou.shape
    tp = int(np.count_nonzero(iou.max(axis=1) > IOU_MATCH_THRESHOLD)) if k_pred and k_gt else 0
    return MatchReport.from_counts(tp=tp, fp=k_pred - tp, fn_=k_gt - tp)


def mean_f1(reports: Iterable[MatchReport]) -> float:
    """Moyenne arithmétique des F1 par image."""
    scores = [report.f1 for report in reports]
    if not scores:
        raise EmptyInputError("Impossible de calculer un F1 moyen sans image.")
    return float(np.mean(scores))


def classwise_mean_f1(reports: Iterable[tuple[ImageCategory, MatchReport]]) -> dict[ImageCategory, float]:
    """F1 moyen par catégorie ; les catégories sans image sont absentes du résultat."""
    by_class: dict[ImageCategory, list[MatchReport]] = {}
    for category, report in reports:
        by_class.setdefault(ImageCategory(category), []).append(report)
    return {category: mean_f1(by_class[category]) for category in sorted(by_class)}


def time_tolerance(height: int, width: int) -> int:
    """Tolérance de temps (secondes) pour une image H x W."""
    pixels = height * width
    if pixels <= TOLERANCE_PIXEL_LIMIT:
        return TOLERANCE_MIN_SECONDS
    # Arrondi au plus proche (et non l'arrondi bancaire de round()).
    return int(math.floor(pixels * TOLERANCE_SECONDS_PER_PIXEL + 0.5))


def timing_record(height: int, width: int, real_time: float) -> TimingRecord:
    tolerance = time_tolerance(height, width)
    return TimingRecord(
        image_pixels=height * width,
        tolerance=float(tolerance),
        real_time=real_time,
        out_of_tolerance=max(0.0, real_time - tolerance),
    )


def total_out_of_tolerance(records: Iterable[TimingRecord]) -> float:
    """Somme des temps hors tolérance sur un ensemble d'images."""
    return float(sum(record.out_of_tolerance for record in records))
