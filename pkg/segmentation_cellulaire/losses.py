# segmentation_cellulaire/losses.py
"""
Ce module contient les noyaux numériques des pertes d'entraînement.

Ce sont des fonctions d'évaluation pures (aucune différentiation
automatique) : elles servent à vérifier des champs prédits contre des
cibles et à contrôler les identités analytiques des pertes. Les sommes sont
accumulées en float64 par NumPy (sommation par paires, ordre fixe), ce qui
rend les résultats reproductibles d'une exécution à l'autre.
"""

import numpy as np

from .exceptions import ShapeMismatchError
from .models import FieldTensor, HoverLossWeights, InstanceMap, LossWeights
from .utils import hv_gradients

LOG_CLAMP = 1e-7
DICE_EPSILON = 1e-6


def _check_shapes(pred: FieldTensor, target: FieldTensor) -> None:
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"Prédiction {pred.shape} et cible {target.shape} de formes différentes.")


def ce_loss(pred: FieldTensor, target: FieldTensor) -> float:
    """Entropie croisée moyenne -(1/N) Σ cible·log(prédiction), prédiction bornée à [1e-7, 1-1e-7]."""
    _check_shapes(pred, target)
    p = np.clip(pred.data.astype(np.float64), LOG_CLAMP, 1.0 - LOG_CLAMP)
    t = target.data.astype(np.float64)
    return float(-np.mean(t * np.log(p)))


def dice_loss(pred: FieldTensor, target: FieldTensor, epsilon: float = DICE_EPSILON) -> float:
    """Perte Dice à dénominateur linéaire : 1 - (2Σ(t·p) + ε) / (Σt + Σp + ε)."""
    _check_shapes(pred, target)
    p = pred.data.astype(np.float64)
    t = target.data.astype(np.float64)
    return float(1.0 - (2.0 * np.sum(t * p) + epsilon) / (np.sum(t) + np.sum(p) + epsilon))


def mae_loss(pred: FieldTensor, target: FieldTensor) -> float:
    _check_shapes(pred, target)
    return float(np.mean(np.abs(target.data.astype(np.float64) - pred.data.astype(np.float64))))


def mse_loss(pred: FieldTensor, target: FieldTensor) -> float:
    _check_shapes(pred, target)
    return float(np.mean((pred.data.astype(np.float64) - target.data.astype(np.float64)) ** 2))


def msge_loss(pred_hv: FieldTensor, target_hv: FieldTensor, nuclei_mask: InstanceMap) -> float:
    """
    Erreur quadratique moyenne des gradients HV, restreinte aux pixels de
    cellules M : (1/m) Σ_M (∇x h_p - ∇x h_t)² + (1/m) Σ_M (∇y v_p - ∇y v_t)².
    Vaut 0 lorsque M est vide.
    """
    _check_shapes(pred_hv, target_hv)
    if pred_hv.planes != 2:
        raise ShapeMismatchError(f"Les cartes HV doivent contenir 2 plans, {pred_hv.planes} reçus.")
    if (nuclei_mask.height, nuclei_mask.width) != (pred_hv.height, pred_hv.width):
        raise ShapeMismatchError(f"Masque {nuclei_mask.height}x{nuclei_mask.width} et cartes HV {pred_hv.height}x{pred_hv.width}.")

    nuclei = nuclei_mask.foreground
    m = int(np.count_nonzero(nuclei))
    if m == 0:
        return 0.0
    pred_gx, pred_gy = hv_gradients(pred_hv.data)
    target_gx, target_gy = hv_gradients(target_hv.data)
    term_x = np.sum((pred_gx[nuclei] - target_gx[nuclei]) ** 2) / m
    term_y = np.sum((pred_gy[nuclei] - target_gy[nuclei]) ** 2) / m
    return float(term_x + term_y)


# --- Totaux pondérés ---
def stardist_total(ce: float, dice: float, mae: float, weights: LossWeights | None = None) -> float:
    weights = weights or LossWeights()
    return weights.w_ce * ce + weights.w_dice * dice + weights.w_mae * mae


def hover_total(ce: float, dice: float, mse: float, msge: float, weights: HoverLossWeights | None = None) -> float:
    weights = weights or HoverLossWeights()
    return weights.w_ce * ce + weights.w_dice * dice + weights.w_mse * mse + weights.w_msge * msge


def _planes(tensor: FieldTensor, start: int, stop: int | None = None) -> FieldTensor:
    return FieldTensor(tensor.data[start:stop])


def stardist_loss(pred: FieldTensor, target: FieldTensor, weights: LossWeights | None = None) -> float:
    """
    Perte Stardist complète sur des champs 1 + R plans : entropie croisée sur
    la probabilité d'objet, Dice et MAE sur les distances radiales.
    """
    _check_shapes(pred, target)
    weights = weights or LossWeights()
    ce = ce_loss(_planes(pred, 0, 1), _planes(target, 0, 1))
    dice = dice_loss(_planes(pred, 1), _planes(target, 1), weights.dice_epsilon)
    mae = mae_loss(_planes(pred, 1), _planes(target, 1))
    return stardist_total(ce, dice, mae, weights)


def hover_loss(pred: FieldTensor, target: FieldTensor, nuclei_mask: InstanceMap | None = None, weights: HoverLossWeights | None = None) -> float:
    """
    Perte HoverNet complète sur des champs à 4 plans : entropie croisée et Dice
    sur la carte CP, MSE et MSGE sur les cartes HV. Sans masque, M est le
    premier plan de la carte CP cible (> 0.5).
    """
    _check_shapes(pred, target)
    if pred.planes != 4:
        raise ShapeMismatchError(f"Un champ HoverNet doit contenir 4 plans, {pred.planes} reçus.")
    if nuclei_mask is None:
        nuclei_mask = InstanceMap((target.data[1] > 0.5).astype(np.int32))
    ce = ce_loss(_planes(pred, 0, 2), _planes(target, 0, 2))
    dice = dice_loss(_planes(pred, 0, 2), _planes(target, 0, 2))
    mse = mse_loss(_planes(pred, 2), _planes(target, 2))
    msge = msge_loss(_planes(pred, 2), _planes(target, 2), nuclei_mask)
    return hover_total(ce, dice, mse, msge, weights)
