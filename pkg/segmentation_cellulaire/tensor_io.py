# segmentation_cellulaire/tensor_io.py
"""
Ce module gère la lecture et l'écriture des images, cartes d'instances et
champs de prédiction.

Formats pris en charge :
- images PNG (OpenCV) et TIFF (tifffile), 8 ou 16 bits, 1 ou 3 canaux,
  normalisées dans [0,1] (÷ 255 ou ÷ 65535) ;
- cartes d'instances PNG 16 bits mono-canal (ou TIFF d'entiers), écrites avec Pillow ;
- champs de prédiction au format conteneur « CSF1 » : octets magiques
  `CSF1`, puis plans/hauteur/largeur en entiers non signés 64 bits petit-boutiste,
  puis les réels IEEE-754 32 bits petit-boutiste, plan par plan.
"""

import logging
from pathlib import Path

import cv2
import numpy as np
import tifffile
from PIL import Image

from .exceptions import IoFailureError, UnsupportedFormatError
from .models import FieldTensor, InstanceMap, RasterImage

log = logging.getLogger(__name__)

CSF_MAGIC = b"CSF1"
CSF_HEADER_SIZE = len(CSF_MAGIC) + 3 * 8

_PNG_SUFFIXES = {".png"}
_TIFF_SUFFIXES = {".tif", ".tiff"}
_DIVISEURS = {np.dtype(np.uint8): 255.0, np.dtype(np.uint16): 65535.0}


def _read_png(path: Path) -> np.ndarray:
    """
    Décode un PNG en conservant sa profondeur (uint8 ou uint16). Les images
    couleur sont remises dans l'ordre RVB.
    """
    try:
        buffer = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    except OSError as e:
        raise IoFailureError(f"Impossible de lire '{path}' : {e}") from e
    if not buffer.size:
        raise IoFailureError(f"'{path}' est vide.")
    try:
        array = cv2.imdecode(buffer, cv2.IMREAD_UNCHANGED)
    except cv2.error as e:
        raise IoFailureError(f"Impossible de décoder '{path}' : {e}") from e
    if array is None:
        raise IoFailureError(f"Impossible de décoder '{path}' : PNG invalide ou tronqué.")
    if array.ndim == 3:
        if array.shape[2] != 3:
            raise UnsupportedFormatError(f"PNG à {array.shape[2]} canaux non pris en charge pour '{path}' (1 ou 3 attendus).")
        # OpenCV décode en BVR.
        array = cv2.cvtColor(array, cv2.COLOR_BGR2RGB)
    return array


def _read_raw(path: Path) -> np.ndarray:
    """Lit le tableau brut d'un fichier PNG ou TIFF, sans normalisation."""
    suffix = path.suffix.lower()
    if suffix in _PNG_SUFFIXES:
        return _read_png(path)
    if suffix in _TIFF_SUFFIXES:
        try:
            return tifffile.imread(path)
        except (OSError, ValueError) as e:
            raise IoFailureError(f"Impossible de lire '{path}' : {e}") from e
    raise UnsupportedFormatError(f"Extension '{path.suffix}' non prise en charge (PNG ou TIFF attendu).")


def _to_channels_last(array: np.ndarray, path: Path) -> np.ndarray:
    if array.ndim == 2:
        return array[:, :, np.newaxis]
    if array.ndim == 3:
        if array.shape[2] in (1, 3):
            return array
        if array.shape[0] in (1, 3):
            # TIFF enregistré canaux en premier (C, H, W).
            return np.moveaxis(array, 0, -1)
    raise UnsupportedFormatError(f"Forme {array.shape} non prise en charge pour '{path}' (1 ou 3 canaux attendus).")


def load_image(path: str | Path) -> RasterImage:
    """Charge une image PNG/TIFF 8 ou 16 bits et la normalise dans [0,1]."""
    path = Path(path)
    array = _to_channels_last(_read_raw(path), path)
    divisor = _DIVISEURS.get(array.dtype)
    if divisor is None:
        raise UnsupportedFormatError(f"Profondeur '{array.dtype}' non prise en charge pour '{path}' (8 ou 16 bits attendus).")
    data = (array.astype(np.float32) / np.float32(divisor)).astype(np.float32)
    log.debug(f"Image '{path.name}' chargée : {data.shape[0]}x{data.shape[1]}, {data.shape[2]} canal(aux).")
    return RasterImage(data)


def load_instance_map(path: str | Path) -> InstanceMap:
    """Charge une carte d'instances mono-canal et canonicalise ses étiquettes en {1..K}."""
    path = Path(path)
    array = _read_raw(path)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    elif array.ndim == 3 and array.shape[0] == 1:
        array = array[0]
    if array.ndim != 2:
        raise UnsupportedFormatError(f"Une carte d'instances doit être mono-canal : forme {array.shape} pour '{path}'.")
    if not np.issubdtype(array.dtype, np.integer):
        raise UnsupportedFormatError(f"Une carte d'instances doit contenir des entiers : type '{array.dtype}' pour '{path}'.")
    return InstanceMap.from_array(array)


def save_instance_map(mask: InstanceMap, path: str | Path) -> None:
    """Enregistre une carte d'instances en PNG 16 bits mono-canal."""
    path = Path(path)
    if mask.count > 65535:
        raise UnsupportedFormatError(f"{mask.count} instances : trop pour un PNG 16 bits.")
    try:
        Image.fromarray(mask.labels.astype(np.uint16)).save(path, format="PNG")
    except OSError as e:
        raise IoFailureError(f"Impossible d'écrire '{path}' : {e}") from e


def save_field(field: FieldTensor, path: str | Path) -> None:
    """Enregistre un champ au format CSF1 (bit à bit identique à la relecture)."""
    path = Path(path)
    header = CSF_MAGIC + np.array(field.shape, dtype="<u8").tobytes()
    payload = np.ascontiguousarray(field.data, dtype="<f4").tobytes()
    try:
        path.write_bytes(header + payload)
    except OSError as e:
        raise IoFailureError(f"Impossible d'écrire '{path}' : {e}") from e


def load_field(path: str | Path) -> FieldTensor:
    """Relit un champ CSF1 ; lève IoFailureError si l'en-tête ne correspond pas au contenu."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoFailureError(f"Impossible de lire '{path}' : {e}") from e

    if len(raw) < CSF_HEADER_SIZE or raw[: len(CSF_MAGIC)] != CSF_MAGIC:
        raise IoFailureError(f"'{path}' n'est pas un fichier CSF1 valide.")
    planes, height, width = (int(v) for v in np.frombuffer(raw, dtype="<u8", count=3, offset=len(CSF_MAGIC)))
    expected = planes * height * width * 4
    if len(raw) - CSF_HEADER_SIZE != expected:
        raise IoFailureError(f"'{path}' : l'en-tête annonce {planes}x{height}x{width} mais le contenu fait {len(raw) - CSF_HEADER_SIZE} octets.")
    if expected == 0:
        return FieldTensor(np.zeros((planes, height, width), dtype=np.float32))
    data = np.frombuffer(raw, dtype="<f4", offset=CSF_HEADER_SIZE).reshape(planes, height, width)
    return FieldTensor(data.astype(np.float32))
