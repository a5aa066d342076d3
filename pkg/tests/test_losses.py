# tests/test_losses.py
"""
Tests pour les noyaux de pertes, comparés à des boucles scalaires naïves.
"""

import math

import numpy as np
import pytest

from segmentation_cellulaire.exceptions import ShapeMismatchError
from segmentation_cellulaire.hover_codec import encode_hover
from segmentation_cellulaire.losses import (
    ce_loss,
    dice_loss,
    hover_loss,
    hover_total,
    mae_loss,
    msge_loss,
    mse_loss,
    stardist_loss,
    stardist_total,
)
from segmentation_cellulaire.models import FieldTensor, HoverLossWeights, InstanceMap, LossWeights
from segmentation_cellulaire.stardist_codec import encode_stardist
from segmentation_cellulaire.synthetic import random_blobs


# --- Oracles scalaires ---
def _naive_ce(pred, target):
    total = 0.0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist(), strict=True):
        p = min(max(p, 1e-7), 1 - 1e-7)
        total += t * math.log(p)
    return -total / pred.size


def _naive_dice(pred, target, eps=1e-6):
    inter = sum_t = sum_p = 0.0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist(), strict=True):
        inter += t * p
        sum_t += t
        sum_p += p
    return 1 - (2 * inter + eps) / (sum_t + sum_p + eps)


def _naive_mean(pred, target, power):
    total = 0.0
    for p, t in zip(pred.ravel().tolist(), target.ravel().tolist(), strict=True):
        total += abs(t - p) ** power
    return total / pred.size


def _naive_derivative(plane, row, col, axis):
    """Différence centrale, ou décentrée au bord, le long d'un axe."""
    size = plane.shape[axis]

    def at(index):
        return float(plane[row, index] if axis == 1 else plane[index, col])

    i = col if axis == 1 else row
    if i == 0:
        return at(1) - at(0)
    if i == size - 1:
        return at(size - 1) - at(size - 2)
    return (at(i + 1) - at(i - 1)) / 2


def _naive_msge(pred, target, nuclei):
    m = 0
    term_x = term_y = 0.0
    height, width = nuclei.shape
    for row in range(height):
        for col in range(width):
            if not nuclei[row, col]:
                continue
            m += 1
            term_x += (_naive_derivative(pred[0], row, col, 1) - _naive_derivative(target[0], row, col, 1)) ** 2
            term_y += (_naive_derivative(pred[1], row, col, 0) - _naive_derivative(target[1], row, col, 0)) ** 2
    return 0.0 if m == 0 else term_x / m + term_y / m


INSTANCES = 100


def _random_shape(rng, planes: int) -> tuple[int, int, int]:
    height, width = (int(v) for v in rng.integers(2, 16, size=2))
    return planes, height, width


def _random_pairs(rng, low: float = 0.0):
    """100 paires (prédiction, cible) de formes aléatoires ; prédictions dans [low, 1 - low]."""
    for _ in range(INSTANCES):
        shape = _random_shape(rng, int(rng.integers(1, 4)))
        yield rng.uniform(low, 1 - low, size=shape).astype(np.float32), rng.uniform(0.0, 1.0, size=shape).astype(np.float32)


# --- Conformité aux oracles ---
def test_ce_loss_conforme_a_l_oracle(rng):
    for pred, target in _random_pairs(rng, low=0.01):
        assert ce_loss(FieldTensor(pred), FieldTensor(target)) == pytest.approx(_naive_ce(pred, target), rel=1e-6)


def test_dice_loss_conforme_a_l_oracle(rng):
    for pred, target in _random_pairs(rng):
        binary = (target > 0.5).astype(np.float32)
        assert dice_loss(FieldTensor(pred), FieldTensor(binary)) == pytest.approx(_naive_dice(pred, binary), rel=1e-6)


def test_mae_et_mse_conformes_a_l_oracle(rng):
    for pred, target in _random_pairs(rng):
        assert mae_loss(FieldTensor(pred), FieldTensor(target)) == pytest.approx(_naive_mean(pred, target, 1), rel=1e-6)
        assert mse_loss(FieldTensor(pred), FieldTensor(target)) == pytest.approx(_naive_mean(pred, target, 2), rel=1e-6)


def test_msge_loss_conforme_a_l_oracle(rng):
    for _ in range(INSTANCES):
        # --- Arrange ---
        shape = _random_shape(rng, 2)
        pred = rng.uniform(-1, 1, size=shape).astype(np.float32)
        target = rng.uniform(-1, 1, size=shape).astype(np.float32)
        nuclei = rng.uniform(size=shape[1:]) > 0.6

        # --- Act ---
        value = msge_loss(FieldTensor(pred), FieldTensor(target), InstanceMap(nuclei.astype(np.int32)))

        # --- Assert ---
        assert value == pytest.approx(_naive_msge(pred, target, nuclei), rel=1e-6)


# --- Propriétés ---
def test_pertes_nulles_a_l_identite(rng):
    binary = (rng.uniform(size=(2, 8, 8)) > 0.5).astype(np.float32)
    values = rng.uniform(-1, 1, size=(2, 8, 8)).astype(np.float32)
    field = FieldTensor(binary)

    assert ce_loss(field, field) == pytest.approx(0.0, abs=1e-5)
    assert dice_loss(field, field) == pytest.approx(0.0, abs=1e-9)
    assert mae_loss(FieldTensor(values), FieldTensor(values)) == 0.0
    assert mse_loss(FieldTensor(values), FieldTensor(values)) == 0.0
    assert msge_loss(FieldTensor(values), FieldTensor(values), InstanceMap(np.ones((8, 8), dtype=np.int32))) == 0.0


def test_dice_loss_dans_l_intervalle_unite(rng):
    for _ in range(20):
        pred = FieldTensor(rng.uniform(0, 1, size=(1, 6, 6)))
        target = FieldTensor(rng.uniform(0, 1, size=(1, 6, 6)))
        assert 0.0 <= dice_loss(pred, target) <= 1.0


def test_ce_loss_forme_fermee():
    """Cible 1 et prédiction 0.5 partout : ln 2."""
    assert ce_loss(FieldTensor(np.full((1, 3, 3), 0.5)), FieldTensor(np.ones((1, 3, 3)))) == pytest.approx(math.log(2))


def test_ce_loss_prediction_saturee_reste_finie():
    pred = FieldTensor(np.zeros((1, 2, 2)))
    target = FieldTensor(np.ones((1, 2, 2)))

    assert ce_loss(pred, target) == pytest.approx(-math.log(1e-7))


def test_msge_loss_masque_vide():
    pred = FieldTensor(np.random.default_rng(1).uniform(size=(2, 5, 5)))

    assert msge_loss(pred, FieldTensor(np.zeros((2, 5, 5))), InstanceMap.empty(5, 5)) == 0.0


def test_msge_loss_insensible_aux_pixels_eloignes_du_masque(rng):
    """Perturber des pixels à distance ≥ 2 de M ne change pas la perte."""
    # --- Arrange ---
    pred = rng.uniform(-1, 1, size=(2, 20, 20))
    target = rng.uniform(-1, 1, size=(2, 20, 20))
    nuclei = np.zeros((20, 20), dtype=np.int32)
    nuclei[5:9, 6:10] = 1
    reference = msge_loss(FieldTensor(pred), FieldTensor(target), InstanceMap(nuclei))

    # --- Act ---
    perturbed = pred.copy()
    far = np.ones((20, 20), dtype=bool)
    far[3:11, 4:12] = False
    perturbed[:, far] += rng.uniform(-5, 5, size=(2, int(far.sum())))

    # --- Assert ---
    assert msge_loss(FieldTensor(perturbed), FieldTensor(target), InstanceMap(nuclei)) == reference


def test_pertes_formes_differentes():
    with pytest.raises(ShapeMismatchError):
        mse_loss(FieldTensor(np.zeros((2, 4, 4))), FieldTensor(np.zeros((2, 4, 5))))
    with pytest.raises(ShapeMismatchError):
        msge_loss(FieldTensor(np.zeros((2, 4, 4))), FieldTensor(np.zeros((2, 4, 4))), InstanceMap.empty(3, 3))
    with pytest.raises(ShapeMismatchError):
        msge_loss(FieldTensor(np.zeros((3, 4, 4))), FieldTensor(np.zeros((3, 4, 4))), InstanceMap.empty(4, 4))


# --- Totaux ---
def test_totaux_ponderes():
    assert stardist_total(1.0, 1.0, 1.0) == pytest.approx(2.3)
    assert stardist_total(0.0, 0.0, 0.0) == 0.0
    assert hover_total(0.5, 0.2, 0.1, 0.3) == pytest.approx(1.1)
    assert stardist_total(1.0, 1.0, 1.0, LossWeights(w_mae=1.0)) == pytest.approx(3.0)
    assert hover_total(1.0, 1.0, 1.0, 1.0, HoverLossWeights(w_msge=0.0)) == pytest.approx(3.0)


def test_stardist_loss_et_hover_loss_sur_des_cibles_encodees(rng):
    """Une prédiction identique à la cible donne une perte totale quasi nulle ; une prédiction bruitée, une perte positive."""
    # --- Arrange ---
    mask = random_blobs((48, 48), 3, rng)
    star = encode_stardist(mask, 8).to_field()
    hover = encode_hover(mask).to_field()
    noisy_hover = FieldTensor(hover.data + rng.normal(0, 0.1, size=hover.shape).astype(np.float32))

    # --- Act & Assert ---
    # Les distances radiales ne sont pas binaires : seul le terme MAE est nul à l'identité.
    dist = FieldTensor(star.data[1:])
    expected = stardist_total(ce_loss(FieldTensor(star.data[:1]), FieldTensor(star.data[:1])), dice_loss(dist, dist), 0.0)
    assert stardist_loss(star, star) == pytest.approx(expected)
    assert hover_loss(hover, hover) == pytest.approx(0.0, abs=1e-5)
    assert hover_loss(noisy_hover, hover) > 0.0
    with pytest.raises(ShapeMismatchError):
        hover_loss(star, star)
