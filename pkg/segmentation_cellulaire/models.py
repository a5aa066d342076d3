# segmentation_cellulaire/models.py
"""
Ce module définit les types de données du paquet.

Chaque classe correspond à un objet manipulé par les codecs, les métriques ou
la ligne de commande : images normalisées, cartes d'instances, champs de
prédiction, configurations et rapports. Les tableaux NumPy ne sont pas copiés et
ne doivent pas être modifiés après la construction : tous les objets sont
traités comme immuables.
"""

from dataclasses import dataclass, field
from enum import Enum, IntEnum

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11 : équivalent de enum.StrEnum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from pathlib import Path

import numpy as np
from skimage.segmentation import relabel_sequential

from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    InconsistentFieldError,
    InvalidConfigError,
)


# --- Images et cartes ---
@dataclass(frozen=True, eq=False)
class RasterImage:
    """Image normalisée dans [0,1], de forme (H, W, C) avec C = 1 ou 3."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[2] not in (1, 3):
            raise InvalidConfigError(f"Une image doit être de forme (H, W, 1|3), reçu {self.data.shape}.")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """
    Carte d'instances 2-D : 0 pour le fond, 1..K pour les cellules.

    Utiliser `InstanceMap.from_array` pour construire une carte à partir
    d'étiquettes arbitraires ; le constructeur direct suppose des
    étiquettes déjà canoniques.
    """

    labels: np.ndarray

    @classmethod
    def from_array(cls, labels: np.ndarray) -> "InstanceMap":
        """Canonicalise les étiquettes en {1..K} en préservant la partition des pixels."""
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise DimensionMismatchError(f"Une carte d'instances doit être 2-D, reçu {labels.shape}.")
        if labels.size and labels.min() < 0:
            raise InvalidConfigError("Les étiquettes d'instances doivent être positives ou nulles.")
        relabeled, _, _ = relabel_sequential(labels.astype(np.int64))
        return cls(relabeled.astype(np.int32))

    @classmethod
    def empty(cls, height: int, width: int) -> "InstanceMap":
        return cls(np.zeros((height, width), dtype=np.int32))

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def count(self) -> int:
        """Nombre d'instances K."""
        return int(self.labels.max()) if self.labels.size else 0

    @property
    def foreground(self) -> np.ndarray:
        return self.labels > 0


@dataclass(frozen=True, eq=False)
class FieldTensor:
    """Tenseur de réels 32 bits de forme (plans, H, W), stocké plan par plan."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise InconsistentFieldError(f"Un champ doit être de forme (plans, H, W), reçu {self.data.shape}.")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))

    @property
    def planes(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.planes, self.height, self.width)


# --- Champs Stardist ---
@dataclass(frozen=True, eq=False)
class RadialField:
    """
    Paire cible/prédiction Stardist.

    `prob` est de forme (H, W) et `dist` de forme (R, H, W) ; le rayon k pointe
    à l'angle 2πk/R, l'angle 0 étant l'axe +colonne, sens trigonométrique.
    Sur disque, le plan 0 du fichier est `prob`, les plans 1..R sont `dist`.
    """

    prob: np.ndarray
    dist: np.ndarray

    def __post_init__(self) -> None:
        if self.dist.ndim != 3 or self.prob.shape != self.dist.shape[1:]:
            raise InconsistentFieldError(f"Plans incohérents : prob {self.prob.shape}, dist {self.dist.shape}.")

    @property
    def rays(self) -> int:
        return int(self.dist.shape[0])

    @classmethod
    def from_field(cls, tensor: FieldTensor, rays: int | None = None) -> "RadialField":
        expected_rays = tensor.planes - 1
        if tensor.planes < 4 or (rays is not None and rays != expected_rays):
            raise InconsistentFieldError(f"Un champ Stardist doit contenir 1 + R plans (R ≥ 3) : {tensor.planes} plans reçus pour R={rays}.")
        return cls(prob=tensor.data[0], dist=tensor.data[1:])

    def to_field(self) -> FieldTensor:
        return FieldTensor(np.concatenate([self.prob[np.newaxis], self.dist]).astype(np.float32))


@dataclass(frozen=True, eq=False)
class StarPolygon:
    """Polygone étoilé défini par R longueurs de rayons autour d'un centre (ligne, colonne)."""

    center: tuple[float, float]
    radii: np.ndarray
    score: float

    @property
    def rays(self) -> int:
        return int(self.radii.shape[0])

    def vertices(self) -> tuple[np.ndarray, np.ndarray]:
        """Retourne les sommets (lignes, colonnes) aux angles 2πk/R."""
        angles = 2 * np.pi * np.arange(self.rays) / self.rays
        rows = self.center[0] - self.radii * np.sin(angles)
        cols = self.center[1] + self.radii * np.cos(angles)
        return rows, cols


# --- Champs HoverNet ---
@dataclass(frozen=True, eq=False)
class HoverField:
    """
    Paire cible/prédiction HoverNet.

    `cp` : (2, H, W), plans fond / cellule dont la somme vaut 1 par pixel.
    `hv` : (2, H, W), plans horizontal / vertical dans [-1, 1].
    Sur disque, les 4 plans sont enregistrés dans l'ordre cp_fond, cp_cellule, h, v.
    """

    cp: np.ndarray
    hv: np.ndarray

    def __post_init__(self) -> None:
        if self.cp.shape != self.hv.shape or self.cp.ndim != 3 or self.cp.shape[0] != 2:
            raise InconsistentFieldError(f"Plans incohérents : cp {self.cp.shape}, hv {self.hv.shape}.")
        if not np.allclose(self.cp.sum(axis=0), 1.0, atol=1e-5):
            raise InconsistentFieldError("Les plans de la carte CP doivent sommer à 1 pour chaque pixel.")

    @classmethod
    def from_field(cls, tensor: FieldTensor) -> "HoverField":
        if tensor.planes != 4:
            raise InconsistentFieldError(f"Un champ HoverNet doit contenir 4 plans, {tensor.planes} reçus.")
        return cls(cp=tensor.data[:2], hv=tensor.data[2:])

    def to_field(self) -> FieldTensor:
        return FieldTensor(np.concatenate([self.cp, self.hv]).astype(np.float32))


# --- Configurations ---
class ImageCategory(IntEnum):
    """Les quatre catégories d'images du classificateur à règles."""

    BINARY = 0
    GRAY = 1
    LARGE_CELL = 2
    SMALL_CELL = 3


class Decoder(StrEnum):
    STARDIST = "stardist"
    HOVER = "hover"


@dataclass(frozen=True)
class ClassifierConfig:
    """Seuils du classificateur : saturation θ, plage de valeur (αs, αl) et aire σ."""

    theta: float = 0.1
    alpha_s: float = 0.1
    alpha_l: float = 0.6
    sigma: float = 8000
    # Teste S̄ < θ au lieu de S̄ > θ pour la classe grise.
    invert_saturation_test: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.theta <= 1:
            raise InvalidConfigError(f"theta doit être dans [0,1], reçu {self.theta}.")
        if not 0 <= self.alpha_s < self.alpha_l <= 1:
            raise InvalidConfigError(f"Il faut 0 ≤ alpha_s < alpha_l ≤ 1, reçu ({self.alpha_s}, {self.alpha_l}).")
        if not self.sigma > 0:
            raise InvalidConfigError(f"sigma doit être strictement positif, reçu {self.sigma}.")


@dataclass(frozen=True)
class NmsConfig:
    prob_threshold: float = 0.5
    iou_threshold: float = 0.4
    # Au-delà de ce nombre de pixels, les candidats sont pris sur une grille de pas 2.
    candidate_stride_pixels: int = 1024 * 1024

    def __post_init__(self) -> None:
        for name in ("prob_threshold", "iou_threshold"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InvalidConfigError(f"{name} doit être dans [0,1], reçu {value}.")


@dataclass(frozen=True)
class WatershedConfig:
    cp_threshold: float = 0.6
    marker_energy_threshold: float = 0.5
    min_marker_size: int = 3

    def __post_init__(self) -> None:
        for name in ("cp_threshold", "marker_energy_threshold"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InvalidConfigError(f"{name} doit être dans [0,1], reçu {value}.")
        if self.min_marker_size < 1:
            raise InvalidConfigError(f"min_marker_size doit être ≥ 1, reçu {self.min_marker_size}.")


@dataclass(frozen=True)
class LossWeights:
    """Poids de la perte Stardist (CE, Dice, MAE) et epsilon de la perte Dice."""

    w_ce: float = 1.0
    w_dice: float = 1.0
    w_mae: float = 0.3
    dice_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if min(self.w_ce, self.w_dice, self.w_mae) < 0:
            raise InvalidConfigError("Les poids de perte doivent être positifs ou nuls.")


@dataclass(frozen=True)
class HoverLossWeights:
    w_ce: float = 1.0
    w_dice: float = 1.0
    w_mse: float = 1.0
    w_msge: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_ce, self.w_dice, self.w_mse, self.w_msge) < 0:
            raise InvalidConfigError("Les poids de perte doivent être positifs ou nuls.")


@dataclass(frozen=True)
class TilePlan:
    """Plan de fenêtres glissantes : origines (ligne, colonne) des tuiles."""

    height: int
    width: int
    window: int
    step: int
    origins: list[tuple[int, int]]

    def tile_shape(self, origin: tuple[int, int]) -> tuple[int, int]:
        """Taille réelle de la tuile (rognée au bord pour les images plus petites que la fenêtre)."""
        row, col = origin
        return (min(self.window, self.height - row), min(self.window, self.width - col))

    def tile_slices(self, origin: tuple[int, int]) -> tuple[slice, slice]:
        tile_h, tile_w = self.tile_shape(origin)
        return (slice(origin[0], origin[0] + tile_h), slice(origin[1], origin[1] + tile_w))


# --- Rapports ---
@dataclass(frozen=True)
class MatchReport:
    tp: int
    fp: int
    fn_: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn_: int) -> "MatchReport":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn_) if tp + fn_ else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp=tp, fp=fp, fn_=fn_, precision=precision, recall=recall, f1=f1)


@dataclass(frozen=True)
class TimingRecord:
    image_pixels: int
    tolerance: float
    real_time: float
    out_of_tolerance: float


@dataclass(frozen=True)
class ClassificationReport:
    """Exactitude par classe et exactitude globale (images correctes / toutes les images)."""

    per_class: dict[ImageCategory, float]
    overall: float
    total: int


def _default_decoder_map() -> dict[ImageCategory, Decoder]:
    return {
        ImageCategory.BINARY: Decoder.STARDIST,
        ImageCategory.GRAY: Decoder.HOVER,
        ImageCategory.LARGE_CELL: Decoder.STARDIST,
        ImageCategory.SMALL_CELL: Decoder.STARDIST,
    }


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration complète du pipeline, construite par `create_config`."""

    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    nms: NmsConfig = field(default_factory=NmsConfig)
    watershed: WatershedConfig = field(default_factory=WatershedConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    class_decoder_map: dict[ImageCategory, Decoder] = field(default_factory=_default_decoder_map)
    rays: int = 32
    window: int = 512
    step: int = 384
    workers: int = 1

    def __post_init__(self) -> None:
        missing = [category.name for category in ImageCategory if category not in self.class_decoder_map]
        if missing:
            raise ConfigError(f"Aucun décodeur associé aux catégories : {', '.join(missing)}.")
        for category, decoder in self.class_decoder_map.items():
            if decoder not in tuple(Decoder):
                raise ConfigError(f"Décodeur inconnu pour la classe {int(category)} : '{decoder}'.")
        if self.rays < 3:
            raise ConfigError(f"Le nombre de rayons doit être ≥ 3, reçu {self.rays}.")
        if not 1 <= self.step <= self.window:
            raise ConfigError(f"Il faut 1 ≤ step ≤ window, reçu step={self.step}, window={self.window}.")
        if self.workers < 1:
            raise ConfigError(f"Le nombre de workers doit être ≥ 1, reçu {self.workers}.")


# --- Pipeline ---
@dataclass(frozen=True)
class ManifestEntry:
    """Une ligne du manifeste : l'image, son masque de vérité terrain et, éventuellement, sa catégorie de référence."""

    name: str
    image: Path
    mask: Path | None = None
    category: ImageCategory | None = None


@dataclass(frozen=True)
class EvaluationRow:
    """Une ligne du CSV d'évaluation ; les colonnes absentes restent à None."""

    name: str
    category: ImageCategory | None = None
    decoder: Decoder | None = None
    report: MatchReport | None = None
    timing: TimingRecord | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class EvaluationSummary:
    images: int
    evaluated: int
    failed: int
    mean_f1: float | None
    classwise_f1: dict[ImageCategory, float]
    total_out_of_tolerance: float
    classification: ClassificationReport | None = None


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
