# tests/test_tensor_io.py
"""
Tests pour la lecture et l'écriture des images, cartes d'instances et champs CSF1.
"""

import struct
import zlib

import numpy as np
import pytest
import tifffile

from segmentation_cellulaire.exceptions import IoFailureError, UnsupportedFormatError
from segmentation_cellulaire.models import FieldTensor, InstanceMap
from segmentation_cellulaire.tensor_io import (
    CSF_MAGIC,
    load_field,
    load_image,
    load_instance_map,
    save_field,
    save_instance_map,
)


def test_load_image_png_8_bits_rgb(tmp_path, write_png):
    """Vérifie qu'un pixel (255, 0, 0) 8 bits est normalisé en (1, 0, 0)."""
    pixels = np.zeros((4, 5, 3), dtype=np.uint8)
    pixels[..., 0] = 255
    write_png(tmp_path / "rouge.png", pixels)

    image = load_image(tmp_path / "rouge.png")

    assert image.channels == 3
    assert (image.height, image.width) == (4, 5)
    np.testing.assert_array_equal(image.data[0, 0], [1.0, 0.0, 0.0])


def _png_rgb_16_bits(pixels: list[tuple[int, int, int]]) -> bytes:
    """Construit octet par octet un PNG 16 bits RVB d'une ligne (profondeur 16, type de couleur 2)."""

    def chunk(kind: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data))

    header = struct.pack(">IIBBBBB", len(pixels), 1, 16, 2, 0, 0, 0)
    scanline = b"\x00" + b"".join(struct.pack(">3H", *pixel) for pixel in pixels)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", zlib.compress(scanline)) + chunk(b"IEND", b"")


def test_load_image_png_16_bits_rgb_garde_la_precision(tmp_path):
    """Un canal à 300 (non multiple de 257) vaut 300/65535, pas une valeur tronquée à 8 bits."""
    path = tmp_path / "rvb16.png"
    path.write_bytes(_png_rgb_16_bits([(65535, 300, 32768), (0, 1, 257)]))

    image = load_image(path)

    assert image.channels == 3
    assert (image.height, image.width) == (1, 2)
    np.testing.assert_allclose(image.data[0, 0], [1.0, 300 / 65535, 32768 / 65535], rtol=1e-6)
    np.testing.assert_allclose(image.data[0, 1], [0.0, 1 / 65535, 257 / 65535], rtol=1e-6)


def test_load_image_png_16_bits_mono_canal(tmp_path, write_png):
    write_png(tmp_path / "gris16.png", np.array([[0, 300], [40000, 65535]], dtype=np.uint16))

    image = load_image(tmp_path / "gris16.png")

    assert image.channels == 1
    np.testing.assert_allclose(image.data[..., 0], np.array([[0, 300], [40000, 65535]]) / 65535, rtol=1e-6)


def test_load_image_png_rgba_refuse(tmp_path, write_png):
    write_png(tmp_path / "rgba.png", np.zeros((3, 3, 4), dtype=np.uint8))

    with pytest.raises(UnsupportedFormatError):
        load_image(tmp_path / "rgba.png")


def test_load_image_tiff_16_bits_mono_canal(tmp_path):
    """Vérifie qu'un pixel 65535 d'un TIFF 16 bits mono-canal vaut 1.0."""
    tifffile.imwrite(tmp_path / "blanc.tif", np.full((3, 3), 65535, dtype=np.uint16))

    image = load_image(tmp_path / "blanc.tif")

    assert image.channels == 1
    assert image.data.dtype == np.float32
    assert np.all(image.data == 1.0)


def test_load_image_fichier_tronque(tmp_path, write_png):
    """Vérifie qu'un PNG tronqué lève IoFailureError."""
    path = tmp_path / "tronque.png"
    write_png(path, np.random.default_rng(0).integers(0, 255, size=(64, 64, 3), dtype=np.uint8))
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])

    with pytest.raises(IoFailureError):
        load_image(path)


def test_load_image_extension_non_prise_en_charge(tmp_path):
    path = tmp_path / "image.bmp"
    path.write_bytes(b"BM")

    with pytest.raises(UnsupportedFormatError):
        load_image(path)


def test_load_image_profondeur_non_prise_en_charge(tmp_path):
    """Un TIFF en réels 32 bits n'est ni 8 ni 16 bits."""
    tifffile.imwrite(tmp_path / "reel.tif", np.zeros((3, 3), dtype=np.float32))

    with pytest.raises(UnsupportedFormatError):
        load_image(tmp_path / "reel.tif")


def test_load_instance_map_canonicalise(tmp_path, write_png):
    """Vérifie que les étiquettes {0, 5, 9} deviennent {0, 1, 2} en gardant la même partition."""
    labels = np.zeros((6, 6), dtype=np.uint16)
    labels[0:2, 0:2] = 5
    labels[3:6, 3:6] = 9
    write_png(tmp_path / "masque.png", labels)

    mask = load_instance_map(tmp_path / "masque.png")

    assert set(np.unique(mask.labels)) == {0, 1, 2}
    assert mask.count == 2
    # Même partition : deux pixels partagent une étiquette avant si et seulement si après.
    before = labels.ravel()
    after = mask.labels.ravel()
    assert np.array_equal(before[:, None] == before[None, :], after[:, None] == after[None, :])


def test_load_instance_map_vide_et_deja_canonique(tmp_path, write_png):
    write_png(tmp_path / "vide.png", np.zeros((4, 4), dtype=np.uint16))
    canonical = np.array([[0, 1], [2, 2]], dtype=np.uint16)
    write_png(tmp_path / "canonique.png", canonical)

    assert load_instance_map(tmp_path / "vide.png").count == 0
    np.testing.assert_array_equal(load_instance_map(tmp_path / "canonique.png").labels, canonical)


def test_load_instance_map_tiff_entiers(tmp_path):
    labels = np.array([[0, 300], [300, 70000]], dtype=np.uint32)
    tifffile.imwrite(tmp_path / "masque.tif", labels)

    mask = load_instance_map(tmp_path / "masque.tif")

    np.testing.assert_array_equal(mask.labels, [[0, 1], [1, 2]])


def test_load_instance_map_rejette_rgb(tmp_path, write_png):
    write_png(tmp_path / "rgb.png", np.zeros((4, 4, 3), dtype=np.uint8))

    with pytest.raises(UnsupportedFormatError):
        load_instance_map(tmp_path / "rgb.png")


def test_save_instance_map_relecture(tmp_path):
    labels = np.zeros((20, 30), dtype=np.int32)
    labels[1:5, 1:5] = 1
    labels[10:15, 20:28] = 2
    mask = InstanceMap.from_array(labels)

    save_instance_map(mask, tmp_path / "sortie.png")

    np.testing.assert_array_equal(load_instance_map(tmp_path / "sortie.png").labels, labels)


@pytest.mark.parametrize("shape", [(1, 2, 2), (32, 64, 48), (3, 1, 7)])
def test_save_field_relecture_bit_a_bit(tmp_path, rng, shape):
    """Vérifie que load_field(save_field(f)) est identique bit à bit à f."""
    field = FieldTensor(rng.standard_normal(shape).astype(np.float32))
    path = tmp_path / "champ.csf"

    save_field(field, path)
    loaded = load_field(path)

    assert loaded.shape == shape
    assert loaded.data.tobytes() == field.data.tobytes()


def test_save_field_exemple_1x2x2(tmp_path):
    field = FieldTensor(np.array([0.25, 0.5, 0.75, 1.0], dtype=np.float32).reshape(1, 2, 2))
    path = tmp_path / "champ.csf"

    save_field(field, path)

    raw = path.read_bytes()
    assert raw[:4] == CSF_MAGIC
    assert np.frombuffer(raw, dtype="<u8", count=3, offset=4).tolist() == [1, 2, 2]
    np.testing.assert_array_equal(load_field(path).data.ravel(), [0.25, 0.5, 0.75, 1.0])


def test_load_field_entete_incoherent(tmp_path):
    """Vérifie qu'un en-tête annonçant plus de données que le contenu lève IoFailureError."""
    path = tmp_path / "faux.csf"
    path.write_bytes(CSF_MAGIC + np.array([2, 4, 4], dtype="<u8").tobytes() + np.zeros(16, dtype="<f4").tobytes())

    with pytest.raises(IoFailureError):
        load_field(path)


def test_load_field_magique_invalide(tmp_path):
    path = tmp_path / "faux.csf"
    path.write_bytes(b"XXXX" + bytes(24))

    with pytest.raises(IoFailureError):
        load_field(path)


def test_load_field_fichier_absent(tmp_path):
    with pytest.raises(IoFailureError):
        load_field(tmp_path / "absent.csf")
