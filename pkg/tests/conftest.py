# tests/conftest.py
"""
Ce fichier contient les fixtures pytest partagées pour la suite de tests.
Les jeux de données sont synthétiques et déterministes (graines fixes) ; les
fichiers sont écrits dans le dossier temporaire de chaque test.
"""

import csv
import logging

import numpy as np
import pytest
from PIL import Image

from segmentation_cellulaire import CONFIG_ENV_VAR, create_config
from segmentation_cellulaire.hover_codec import encode_hover
from segmentation_cellulaire.models import ImageCategory, InstanceMap
from segmentation_cellulaire.services import save_tiled_field
from segmentation_cellulaire.stardist_codec import encode_stardist
from segmentation_cellulaire.synthetic import c_shape, combine, demo_image, disk_mask, random_blobs, touching_disks
from segmentation_cellulaire.tensor_io import save_field, save_instance_map

# Configuration du logging pour voir les messages de diagnostic
logging.basicConfig(level=logging.INFO)
log = logging.getLogger(__name__)

DEMO_SHAPE = (128, 128)


def _write_png(path, array: np.ndarray) -> None:
    """Écrit un tableau uint8 ou uint16 (H, W) ou (H, W, 3) en PNG."""
    Image.fromarray(array).save(path, format="PNG")


def _write_manifest(path, rows: list[dict]) -> None:
    columns = ["name", "image", "mask", "category"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({column: row.get(column, "") for column in columns})


@pytest.fixture
def write_png():
    """Fonction d'écriture PNG pour les tests."""
    return _write_png


@pytest.fixture
def write_manifest():
    return _write_manifest


@pytest.fixture(autouse=True)
def no_config_env(monkeypatch):
    """Isole chaque test d'un éventuel fichier de configuration désigné par l'environnement."""
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config():
    """Configuration de test : un seul worker, petites tuiles pour exercer le recollage."""
    return create_config({"WORKERS": 1, "WINDOW": 64, "STEP": 48})


@pytest.fixture
def square_mask():
    """Un carré 5x5 (lignes et colonnes 2 à 6) dans une image 9x9."""
    labels = np.zeros((9, 9), dtype=np.int32)
    labels[2:7, 2:7] = 1
    return InstanceMap.from_array(labels)


@pytest.fixture
def touching_pair():
    """Deux disques accolés le long de la colonne 32."""
    return touching_disks((64, 64), (32, 32), radius=12, separation=16)


@pytest.fixture
def demo_dataset(tmp_path):
    """
    Crée un jeu de 4 images (une par catégorie) avec masques, champs oracle et
    manifeste sans colonne category. Les champs sont encodés selon le routage
    par défaut : HoverNet pour la classe 1, Stardist sinon. L'image de
    grandes cellules est fournie en tuiles 64/48.
    """
    rng = np.random.default_rng(2024)
    data_dir = tmp_path / "donnees"
    fields_dir = tmp_path / "champs"
    data_dir.mkdir()
    fields_dir.mkdir()

    masks = {
        "binaire": (ImageCategory.BINARY, random_blobs(DEMO_SHAPE, 8, rng)),
        "gris": (
            ImageCategory.GRAY,
            combine(DEMO_SHAPE, [touching_disks(DEMO_SHAPE, (40, 40), radius=12, separation=16), c_shape(DEMO_SHAPE, (88, 88))]),
        ),
        "grandes": (ImageCategory.LARGE_CELL, disk_mask(DEMO_SHAPE, (64, 64), 55)),
        "petites": (ImageCategory.SMALL_CELL, random_blobs(DEMO_SHAPE, 10, rng)),
    }

    rows = []
    for name, (category, mask) in masks.items():
        image = demo_image(category, DEMO_SHAPE, rng)
        pixels = np.round(image.data * 255).astype(np.uint8)
        _write_png(data_dir / f"{name}.png", pixels[:, :, 0] if image.channels == 1 else pixels)
        save_instance_map(mask, data_dir / f"{name}_masque.png")

        if category == ImageCategory.GRAY:
            field = encode_hover(mask).to_field()
        else:
            field = encode_stardist(mask, 32).to_field()
        if name == "grandes":
            save_tiled_field(field, fields_dir / name, window=64, step=48)
        else:
            save_field(field, fields_dir / f"{name}.csf")
        rows.append({"name": name, "image": f"donnees/{name}.png", "mask": f"donnees/{name}_masque.png"})

    manifest = tmp_path / "manifeste.csv"
    _write_manifest(manifest, rows)
    log.info(f"Jeu de démonstration créé dans {tmp_path}")
    return {"root": tmp_path, "manifest": manifest, "fields": fields_dir, "masks": {name: mask for name, (_, mask) in masks.items()}, "rows": rows}
