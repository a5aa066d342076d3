# segmentation_cellulaire/__init__.py
"""
Ce module est le cœur du paquet.
Il contient la factory de configuration `create_config`.

La configuration est un dictionnaire plat de clés en MAJUSCULES : les
valeurs par défaut sont mises à jour par un fichier de configuration
(grammaire « CLÉ=VALEUR » des fichiers .env, lue par python-dotenv), puis par
les surcharges explicites (options de la ligne de commande, tests).
Les options de la ligne de commande ont toujours le dernier mot.
"""

import os
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from .exceptions import ConfigError, InvalidConfigError
from .models import (
    ClassifierConfig,
    Decoder,
    ImageCategory,
    LossWeights,
    NmsConfig,
    PipelineConfig,
    WatershedConfig,
)

__version__ = "0.1.0"

CONFIG_ENV_VAR = "SEGCELL_CONFIG"

DEFAULT_CONFIG: dict[str, Any] = {
    # Classificateur
    "THETA": 0.1,
    "ALPHA_S": 0.1,
    "ALPHA_L": 0.6,
    "SIGMA": 8000.0,
    "INVERT_SATURATION_TEST": False,
    # Stardist
    "RAYS": 32,
    "PROB_THRESHOLD": 0.5,
    "IOU_THRESHOLD": 0.4,
    "CANDIDATE_STRIDE_PIXELS": 1024 * 1024,
    # HoverNet
    "CP_THRESHOLD": 0.6,
    "MARKER_ENERGY_THRESHOLD": 0.5,
    "MIN_MARKER_SIZE": 3,
    # Tuilage et exécution
    "WINDOW": 512,
    "STEP": 384,
    "WORKERS": os.cpu_count() or 1,
    # Routage classe -> décodeur
    "CLASS0_DECODER": "stardist",
    "CLASS1_DECODER": "hover",
    "CLASS2_DECODER": "stardist",
    "CLASS3_DECODER": "stardist",
    # Pertes
    "W_CE": 1.0,
    "W_DICE": 1.0,
    "W_MAE": 0.3,
    "DICE_EPSILON": 1e-6,
}


def _convert(key: str, value: Any) -> Any:
    """Convertit une valeur (souvent une chaîne lue dans un fichier) au type de la valeur par défaut."""
    if key not in DEFAULT_CONFIG:
        raise ConfigError(f"Clé de configuration inconnue : '{key}'.")
    default = DEFAULT_CONFIG[key]
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            return str(value).strip().upper() in ("VRAI", "TRUE", "OUI", "YES", "1")
        if isinstance(default, int):
            return int(str(value).strip())
        if isinstance(default, float):
            return float(str(value).strip().replace(",", "."))
        return str(value).strip().lower()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Valeur invalide pour '{key}' : {value!r}.") from e


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Lit un fichier CLÉ=VALEUR et convertit chaque valeur."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Fichier de configuration introuvable : '{path}'.")
    values = dotenv_values(path)
    return {key.upper(): _convert(key.upper(), value) for key, value in values.items() if value is not None}


def create_config(test_config: dict[str, Any] | None = None, config_file: str | Path | None = None) -> PipelineConfig:
    """Crée la configuration du pipeline (factory)."""
    config = dict(DEFAULT_CONFIG)

    config_file = config_file or os.environ.get(CONFIG_ENV_VAR)
    if config_file:
        config.update(load_config_file(config_file))

    if test_config:
        config.update({key.upper(): _convert(key.upper(), value) for key, value in test_config.items() if value is not None})

    decoders = {}
    for category in ImageCategory:
        name = config[f"CLASS{int(category)}_DECODER"]
        if name not in tuple(Decoder):
            raise ConfigError(f"Décodeur inconnu pour la classe {int(category)} : '{name}' (stardist ou hover).")
        decoders[category] = Decoder(name)

    try:
        return PipelineConfig(
            classifier=ClassifierConfig(
                theta=config["THETA"],
                alpha_s=config["ALPHA_S"],
                alpha_l=config["ALPHA_L"],
                sigma=config["SIGMA"],
                invert_saturation_test=config["INVERT_SATURATION_TEST"],
            ),
            nms=NmsConfig(
                prob_threshold=config["PROB_THRESHOLD"],
                iou_threshold=config["IOU_THRESHOLD"],
                candidate_stride_pixels=config["CANDIDATE_STRIDE_PIXELS"],
            ),
            watershed=WatershedConfig(
                cp_threshold=config["CP_THRESHOLD"],
                marker_energy_threshold=config["MARKER_ENERGY_THRESHOLD"],
                min_marker_size=config["MIN_MARKER_SIZE"],
            ),
            loss_weights=LossWeights(
                w_ce=config["W_CE"],
                w_dice=config["W_DICE"],
                w_mae=config["W_MAE"],
                dice_epsilon=config["DICE_EPSILON"],
            ),
            class_decoder_map=decoders,
            rays=config["RAYS"],
            window=config["WINDOW"],
            step=config["STEP"],
            workers=config["WORKERS"],
        )
    except ConfigError:
        raise
    except InvalidConfigError as e:
        raise ConfigError(e.message) from e
