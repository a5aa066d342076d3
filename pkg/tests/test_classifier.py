# tests/test_classifier.py
"""
Tests pour le classificateur à règles (canaux, statistiques HSV, aire maximale).
"""

import numpy as np
import pytest

from segmentation_cellulaire.classifier import (
    categorize,
    classification_report,
    max_instance_area,
    rgb_to_hsv_stats,
)
from segmentation_cellulaire.exceptions import DimensionMismatchError, InvalidConfigError, WrongChannelCountError
from segmentation_cellulaire.models import ClassifierConfig, ImageCategory, InstanceMap, RasterImage


def _uniform_image(pixel, shape=(10, 10)) -> RasterImage:
    return RasterImage(np.broadcast_to(np.asarray(pixel, dtype=np.float32), (*shape, len(pixel))).copy())


def _rectangle_mask(shape, height, width) -> InstanceMap:
    labels = np.zeros(shape, dtype=np.int32)
    labels[:height, :width] = 1
    return InstanceMap.from_array(labels)


def _rule_oracle(channels, s, v, area, cfg: ClassifierConfig) -> ImageCategory:
    """Application directe de la règle, indépendante de l'implémentation."""
    if channels == 1:
        return ImageCategory.BINARY
    if s > cfg.theta and cfg.alpha_s < v < cfg.alpha_l:
        return ImageCategory.GRAY
    return ImageCategory.LARGE_CELL if area > cfg.sigma else ImageCategory.SMALL_CELL


@pytest.mark.parametrize(
    "pixel, expected",
    [
        ((0.3, 0.3, 0.3), (0.0, 0.3)),
        ((1.0, 0.0, 0.0), (1.0, 1.0)),
    ],
)
def test_rgb_to_hsv_stats_pixels_uniformes(pixel, expected):
    s, v = rgb_to_hsv_stats(_uniform_image(pixel))

    assert s == pytest.approx(expected[0], abs=1e-6)
    assert v == pytest.approx(expected[1], abs=1e-6)


def test_rgb_to_hsv_stats_moyenne_de_deux_moities():
    """Moitié (0.5, 0.5, 0.5), moitié (1, 0, 0) : S̄ = 0.5 et V̄ = 0.75."""
    data = np.zeros((4, 4, 3), dtype=np.float32)
    data[:2] = 0.5
    data[2:] = (1.0, 0.0, 0.0)

    s, v = rgb_to_hsv_stats(RasterImage(data))

    assert s == pytest.approx(0.5)
    assert v == pytest.approx(0.75)


def test_rgb_to_hsv_stats_exige_3_canaux():
    with pytest.raises(WrongChannelCountError):
        rgb_to_hsv_stats(RasterImage(np.zeros((4, 4, 1), dtype=np.float32)))


def test_max_instance_area():
    labels = np.zeros((120, 120), dtype=np.int32)
    labels[0, :5] = 1
    labels[2, :12] = 2

    assert max_instance_area(InstanceMap.from_array(labels)) == 12
    assert max_instance_area(InstanceMap.empty(5, 5)) == 0
    assert max_instance_area(_rectangle_mask((120, 120), 90, 100)) == 9000


def test_categorize_mono_canal_toujours_classe_0(rng):
    image = RasterImage(rng.uniform(size=(20, 20, 1)).astype(np.float32))

    assert categorize(image, InstanceMap.empty(20, 20)) == ImageCategory.BINARY
    assert categorize(image, _rectangle_mask((20, 20), 20, 20)) == ImageCategory.BINARY


def test_categorize_image_grise():
    """S̄ = 0.5 > θ et V̄ = 0.3 dans (0.1, 0.6) : classe 1."""
    image = _uniform_image((0.3, 0.15, 0.15))

    assert categorize(image, InstanceMap.empty(10, 10)) == ImageCategory.GRAY


def test_categorize_grandes_et_petites_cellules():
    """S̄ = 0 : l'aire maximale décide, avec σ = 8000."""
    image = _uniform_image((0.5, 0.5, 0.5), shape=(120, 120))

    assert categorize(image, _rectangle_mask((120, 120), 90, 100)) == ImageCategory.LARGE_CELL
    assert categorize(image, _rectangle_mask((120, 120), 10, 10)) == ImageCategory.SMALL_CELL


def test_categorize_bornes_strictes():
    """V̄ égal à αs n'est pas dans l'intervalle ouvert ; aire égale à σ n'est pas « plus grande »."""
    cfg = ClassifierConfig(alpha_s=0.25, sigma=100)
    image = _uniform_image((0.25, 0.125, 0.125), shape=(20, 20))

    assert categorize(image, _rectangle_mask((20, 20), 10, 10), cfg) == ImageCategory.SMALL_CELL


def test_categorize_test_de_saturation_inverse():
    """Avec le test inversé, une image peu saturée de valeur moyenne devient grise."""
    image = _uniform_image((0.3, 0.3, 0.3))
    mask = InstanceMap.empty(10, 10)

    assert categorize(image, mask) == ImageCategory.SMALL_CELL
    assert categorize(image, mask, ClassifierConfig(invert_saturation_test=True)) == ImageCategory.GRAY


def test_categorize_dimensions_differentes():
    with pytest.raises(DimensionMismatchError):
        categorize(_uniform_image((0.3, 0.3, 0.3)), InstanceMap.empty(5, 5))


def test_categorize_conforme_a_la_regle_sur_200_images():
    """
    Génère 200 images couvrant les quatre branches de la règle et vérifie
    l'accord total avec l'application directe de la règle.
    """
    # --- Arrange ---
    rng = np.random.default_rng(7)
    cfg = ClassifierConfig()
    shape = (100, 100)

    # --- Act & Assert ---
    for index in range(200):
        channels = 1 if index % 4 == 0 else 3
        pixel = rng.uniform(0, 1, size=channels)
        image = _uniform_image(pixel, shape)
        area = int(rng.integers(0, 10000))
        mask = _rectangle_mask(shape, area // 100, 100) if area >= 100 else InstanceMap.empty(*shape)
        true_area = max_instance_area(mask)

        if channels == 3:
            s, v = rgb_to_hsv_stats(image)
        else:
            s, v = 0.0, 0.0
        assert categorize(image, mask, cfg) == _rule_oracle(channels, s, v, true_area, cfg)


def test_categorize_monotonie_de_l_aire():
    """Agrandir la plus grande cellule d'une image couleur ne la fait jamais passer de la classe 2 à la classe 3."""
    image = _uniform_image((0.8, 0.8, 0.8), shape=(100, 100))
    categories = [categorize(image, _rectangle_mask((100, 100), rows, 100)) for rows in range(1, 101)]

    first_large = categories.index(ImageCategory.LARGE_CELL)
    assert all(category == ImageCategory.LARGE_CELL for category in categories[first_large:])


def test_classifier_config_invalide():
    with pytest.raises(InvalidConfigError):
        ClassifierConfig(alpha_s=0.6, alpha_l=0.1)
    with pytest.raises(InvalidConfigError):
        ClassifierConfig(sigma=0)


def test_classification_report_exactitude_globale():
    """L'exactitude globale compte les images, elle ne moyenne pas les exactitudes par classe."""
    pairs = [
        (ImageCategory.BINARY, ImageCategory.BINARY),
        (ImageCategory.BINARY, ImageCategory.BINARY),
        (ImageCategory.BINARY, ImageCategory.BINARY),
        (ImageCategory.SMALL_CELL, ImageCategory.GRAY),
    ]

    report = classification_report(pairs)

    assert report.total == 4
    assert report.overall == pytest.approx(0.75)
    assert report.per_class == {ImageCategory.BINARY: 1.0, ImageCategory.GRAY: 0.0}
