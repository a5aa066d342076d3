# segmentation_cellulaire/services.py
"""
Ce module contient la logique d'orchestration du paquet (couche de services).

Il a pour but de découpler les traitements complets de la ligne de commande :
lecture du manifeste, routage de chaque image vers son décodeur selon sa
catégorie, recollage des champs tuilés, décodage, évaluation, ainsi que
l'autotest embarqué. Les commandes click ne font qu'appeler ces fonctions.
"""

import csv
import logging
import re
import tempfile
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import exports, metrics
from .classifier import categorize, classification_report
from .exceptions import (
    CoverageGapError,
    DimensionMismatchError,
    InconsistentFieldError,
    IoFailureError,
    SegmentationException,
    UnsupportedFormatError,
)
from .hover_codec import decode_watershed, encode_hover
from .losses import ce_loss, dice_loss, hover_total, mae_loss, mse_loss, msge_loss, stardist_total
from .models import (
    CheckResult,
    Decoder,
    EvaluationRow,
    EvaluationSummary,
    FieldTensor,
    HoverField,
    ImageCategory,
    InstanceMap,
    ManifestEntry,
    PipelineConfig,
    RadialField,
    RasterImage,
)
from .stardist_codec import decode_nms, encode_stardist
from .synthetic import c_shape, combine, cross_shape, demo_image, disk_mask, random_blobs, touching_disks
from .tensor_io import load_field, load_image, load_instance_map, save_field, save_instance_map
from .tiler import cut, plan_tiles, stitch

log = logging.getLogger(__name__)

EVALUATION_CSV = "evaluation.csv"
TILE_PATTERN = re.compile(r"^r(\d+)_c(\d+)\.csf$")
MASK_SUFFIXES = (".png", ".tif", ".tiff")


# --- Manifeste ---
def _parse_category(value: str, name: str) -> ImageCategory | None:
    value = (value or "").strip()
    if not value:
        return None
    try:
        return ImageCategory(int(value))
    except ValueError as e:
        raise UnsupportedFormatError(f"Catégorie invalide '{value}' pour '{name}' (0 à 3 attendu).") from e


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """
    Lit un manifeste CSV (colonnes name, image, mask et category optionnelle).

    Les chemins sont relatifs au dossier du manifeste. La colonne category
    est une référence pour le rapport de classement, elle ne change jamais le
    routage.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            columns = set(reader.fieldnames or [])
            rows = list(reader)
    except OSError as e:
        raise IoFailureError(f"Impossible de lire le manifeste '{path}' : {e}") from e

    if rows and not {"name", "image"} <= columns:
        raise UnsupportedFormatError(f"Le manifeste '{path}' doit contenir au moins les colonnes name et image.")

    base = path.parent
    entries = []
    for row in rows:
        name = (row.get("name") or "").strip()
        image = (row.get("image") or "").strip()
        mask = (row.get("mask") or "").strip()
        if not name or not image:
            raise UnsupportedFormatError(f"Ligne de manifeste incomplète : {row}.")
        category = _parse_category(row.get("category") or "", name)
        entries.append(ManifestEntry(name=name, image=base / image, mask=base / mask if mask else None, category=category))
    log.info(f"Manifeste '{path}' : {len(entries)} images.")
    return entries


# --- Champs de prédiction ---
def save_tiled_field(field: FieldTensor, directory: str | Path, window: int = 512, step: int = 384) -> int:
    """Découpe un champ selon le plan de tuilage et écrit une tuile r<ligne>_c<colonne>.csf par origine."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    patches = cut(field, plan_tiles(field.height, field.width, window, step))
    for (row, col), patch in patches:
        save_field(patch, directory / f"r{row}_c{col}.csf")
    return len(patches)


def load_prediction_field(fields_dir: Path, name: str, height: int, width: int, cfg: PipelineConfig) -> FieldTensor:
    """
    Charge le champ prédit d'une image : `<name>.csf` s'il existe, sinon les
    tuiles du dossier `<name>/`, recollées selon le plan de tuilage de l'image.
    """
    whole = fields_dir / f"{name}.csf"
    if whole.is_file():
        return load_field(whole)

    tiles_dir = fields_dir / name
    if not tiles_dir.is_dir():
        raise IoFailureError(f"Aucun champ trouvé pour '{name}' dans '{fields_dir}'.")

    plan = plan_tiles(height, width, cfg.window, cfg.step)
    patches = []
    for tile_path in sorted(tiles_dir.iterdir()):
        match = TILE_PATTERN.match(tile_path.name)
        if match:
            patches.append(((int(match.group(1)), int(match.group(2))), load_field(tile_path)))
    if not patches:
        raise CoverageGapError(f"Le dossier '{tiles_dir}' ne contient aucune tuile.")
    planes = patches[0][1].planes
    log.debug(f"{name} : recollage de {len(patches)} tuiles.")
    return stitch(patches, plan, (planes, height, width))


def decode_field(field: FieldTensor, decoder: Decoder, cfg: PipelineConfig) -> InstanceMap:
    if decoder == Decoder.HOVER:
        return decode_watershed(HoverField.from_field(field), cfg.watershed)
    return decode_nms(RadialField.from_field(field, cfg.rays), cfg.nms)


def field_decoder(field: FieldTensor, cfg: PipelineConfig) -> Decoder:
    """Décodeur que la forme du champ permet : 1 + R plans pour Stardist, 4 plans pour HoverNet."""
    if field.planes == 1 + cfg.rays:
        return Decoder.STARDIST
    if field.planes == 4:
        return Decoder.HOVER
    raise InconsistentFieldError(f"Champ à {field.planes} plans : ni Stardist (1 + {cfg.rays}) ni HoverNet (4).")


# --- Pipeline ---
def process_image(entry: ManifestEntry, fields_dir: Path, out_dir: Path, cfg: PipelineConfig) -> EvaluationRow:
    """
    Traite une image : classement, choix du décodeur, décodage, sauvegarde et
    évaluation. La catégorie de la ligne est celle produite par les règles.

    Le classement se fait sur le masque du manifeste ; sans masque, sur un
    pseudo-masque obtenu en décodant le champ de l'image avec le décodeur
    que sa forme permet. Le décodeur final est toujours celui de la classe.
    """
    start = time.perf_counter()
    image = load_image(entry.image)
    ground_truth = load_instance_map(entry.mask) if entry.mask else None

    field = load_prediction_field(fields_dir, entry.name, image.height, image.width, cfg)
    if (field.height, field.width) != (image.height, image.width):
        raise DimensionMismatchError(f"{entry.name} : champ {field.height}x{field.width} pour une image {image.height}x{image.width}.")

    pseudo_decoder, pseudo_mask = None, None
    if ground_truth is None:
        pseudo_decoder = field_decoder(field, cfg)
        pseudo_mask = decode_field(field, pseudo_decoder, cfg)
        log.info(f"{entry.name} : pas de masque, classement sur le pseudo-masque ({pseudo_decoder}, {pseudo_mask.count} instances).")
    category = categorize(image, ground_truth if ground_truth is not None else pseudo_mask, cfg.classifier)
    decoder = cfg.class_decoder_map[category]
    log.info(f"{entry.name} : classe {int(category)}, decodeur={decoder}")

    instances = pseudo_mask if decoder == pseudo_decoder else decode_field(field, decoder, cfg)
    save_instance_map(instances, out_dir / f"{entry.name}.png")

    timing = metrics.timing_record(image.height, image.width, time.perf_counter() - start)
    report = metrics.match_f1(instances, ground_truth) if ground_truth is not None else None
    log.info(f"{entry.name} : {instances.count} instances en {timing.real_time:.2f} s (tolérance {timing.tolerance:.0f} s).")
    return EvaluationRow(name=entry.name, category=category, decoder=decoder, report=report, timing=timing)


def _process_safely(entry: ManifestEntry, fields_dir: Path, out_dir: Path, cfg: PipelineConfig) -> EvaluationRow:
    try:
        return process_image(entry, fields_dir, out_dir, cfg)
    except SegmentationException as e:
        log.error(f"{entry.name} : {e.message}", exc_info=True)
        return EvaluationRow(name=entry.name, error=e.message)
    except Exception as e:
        log.error(f"{entry.name} : erreur imprévue : {e}", exc_info=True)
        return EvaluationRow(name=entry.name, error=f"Erreur inattendue : {e}")


def summarize(rows: list[EvaluationRow], categories: list[tuple[ImageCategory, ImageCategory]] | None = None) -> EvaluationSummary:
    """Agrège les lignes d'évaluation : F1 moyen, F1 par classe, temps hors tolérance."""
    evaluated = [row for row in rows if row.report is not None]
    by_class = [(row.category, row.report) for row in evaluated if row.category is not None]
    return EvaluationSummary(
        images=len(rows),
        evaluated=len(evaluated),
        failed=sum(1 for row in rows if row.failed),
        mean_f1=metrics.mean_f1(row.report for row in evaluated) if evaluated else None,
        classwise_f1=metrics.classwise_mean_f1(by_class),
        total_out_of_tolerance=metrics.total_out_of_tolerance(row.timing for row in rows if row.timing is not None),
        classification=classification_report(categories) if categories else None,
    )


def run_pipeline(manifest: str | Path, fields_dir: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> tuple[list[EvaluationRow], EvaluationSummary]:
    """
    Exécute le pipeline complet sur un manifeste.

    Les images sont traitées en parallèle par un pool de `cfg.workers`
    threads ; chaque image écrit son propre PNG, le CSV d'évaluation est écrit
    une seule fois à la fin, dans l'ordre du manifeste. Les erreurs d'une image
    sont consignées dans sa ligne et n'interrompent pas le traitement.
    """
    fields_dir, out_dir = Path(fields_dir), Path(out_dir)
    entries = read_manifest(manifest)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailureError(f"Impossible de créer le dossier de sortie '{out_dir}' : {e}") from e

    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        rows = list(executor.map(lambda entry: _process_safely(entry, fields_dir, out_dir, cfg), entries))

    # La colonne category du manifeste sert de référence au rapport de classement.
    categories = [(row.category, entry.category) for entry, row in zip(entries, rows, strict=True) if row.category is not None and entry.category is not None]
    exports.write_evaluation_csv(rows, out_dir / EVALUATION_CSV)

    summary = summarize(rows, categories)
    if summary.failed:
        log.warning(f"Pipeline : {summary.failed} image(s) en échec sur {summary.images}.")
    return rows, summary


# --- Évaluation de dossiers ---
def _find_prediction(pred_dir: Path, name: str) -> Path | None:
    for suffix in MASK_SUFFIXES:
        candidate = pred_dir / f"{name}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def read_timings(path: str | Path) -> dict[str, float]:
    """Lit un CSV de temps d'exécution (colonnes name, seconds)."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            return {row["name"].strip(): float(row["seconds"]) for row in csv.DictReader(f)}
    except OSError as e:
        raise IoFailureError(f"Impossible de lire '{path}' : {e}") from e
    except (KeyError, ValueError) as e:
        raise UnsupportedFormatError(f"'{path}' doit contenir les colonnes name et seconds numériques.") from e


def evaluate_directories(
    pred_dir: str | Path,
    gt_dir: str | Path,
    per_class: str | Path | None = None,
    timings: str | Path | None = None,
    cfg: PipelineConfig | None = None,
) -> tuple[list[EvaluationRow], EvaluationSummary]:
    """
    Évalue un dossier de cartes prédites contre un dossier de vérités terrain
    (appariement par nom de fichier sans extension).

    `per_class` est un manifeste donnant la catégorie de chaque image (colonne
    category, ou à défaut catégorie calculée par les règles) ; `timings` un CSV
    de temps réels qui remplit les colonnes de tolérance.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    cfg = cfg or PipelineConfig()
    entries = {entry.name: entry for entry in read_manifest(per_class)} if per_class else {}
    seconds = read_timings(timings) if timings else {}

    gt_paths = sorted(p for p in gt_dir.iterdir() if p.suffix.lower() in MASK_SUFFIXES)
    rows = []
    for gt_path in gt_paths:
        name = gt_path.stem
        entry = entries.get(name)
        category = entry.category if entry else None
        try:
            gt = load_instance_map(gt_path)
            pred_path = _find_prediction(pred_dir, name)
            if pred_path is None:
                raise IoFailureError(f"Aucune prédiction pour '{name}' dans '{pred_dir}'.")
            report = metrics.match_f1(load_instance_map(pred_path), gt)
            if entry and category is None:
                category = categorize(load_image(entry.image), gt, cfg.classifier)
            timing = metrics.timing_record(gt.height, gt.width, seconds[name]) if name in seconds else None
            rows.append(EvaluationRow(name=name, category=category, report=report, timing=timing))
        except SegmentationException as e:
            log.error(f"{name} : {e.message}")
            rows.append(EvaluationRow(name=name, category=category, error=e.message))
    return rows, summarize(rows)


# --- Autotest ---
TOLERANCE_TABLE = [((640, 480), 10), ((1266, 944), 12), ((2048, 2048), 42), ((3000, 3000), 90), ((10496, 8415), 883)]


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(message)


def _check_stardist_round_trip() -> str:
    shape = (256, 256)
    mask = random_blobs(shape, 15, np.random.default_rng(0))
    decoded = decode_nms(encode_stardist(mask, 32))
    f1 = metrics.match_f1(decoded, mask).f1
    _expect(f1 >= 0.95, f"F1 = {f1:.3f} < 0.95")
    return f"{mask.count} instances, F1 = {f1:.3f}"


def _check_hover_touching_disks() -> str:
    mask = touching_disks((64, 64), (32, 32), radius=12, separation=16)
    decoded = decode_watershed(encode_hover(mask))
    _expect(decoded.count == 2, f"{decoded.count} instances au lieu de 2")
    f1 = metrics.match_f1(decoded, mask).f1
    _expect(f1 >= 0.9, f"F1 = {f1:.3f} < 0.9")
    return f"2 instances, F1 = {f1:.3f}"


def _check_hover_non_convex() -> str:
    shape = (96, 96)
    mask = combine(shape, [c_shape(shape, (30, 30)), cross_shape(shape, (66, 66))])
    f1 = metrics.match_f1(decode_watershed(encode_hover(mask)), mask).f1
    _expect(f1 >= 0.9, f"F1 = {f1:.3f} < 0.9")
    return f"F1 = {f1:.3f}"


def _check_loss_identities() -> str:
    rng = np.random.default_rng(1)
    mask = disk_mask((32, 32), (16, 16), 8)
    cp = encode_hover(mask).cp
    target = FieldTensor(rng.uniform(0, 1, size=(3, 32, 32)))
    hv = FieldTensor(rng.uniform(-1, 1, size=(2, 32, 32)))
    _expect(ce_loss(FieldTensor(cp), FieldTensor(cp)) < 1e-5, "CE non nulle pour prédiction = cible")
    _expect(dice_loss(FieldTensor(cp), FieldTensor(cp)) < 1e-9, "Dice non nulle pour prédiction = cible")
    _expect(mae_loss(target, target) == 0.0, "MAE non nulle")
    _expect(mse_loss(target, target) == 0.0, "MSE non nulle")
    _expect(msge_loss(hv, hv, mask) == 0.0, "MSGE non nulle")
    _expect(abs(stardist_total(1.0, 1.0, 1.0) - 2.3) < 1e-12, "pondération Stardist différente de 1/1/0.3")
    _expect(abs(hover_total(0.5, 0.2, 0.1, 0.3) - 1.1) < 1e-12, "pondération HoverNet différente de 1/1/1/1")
    return "pertes nulles à l'identité, pondérations conformes"


def _check_time_tolerance() -> str:
    for (height, width), expected in TOLERANCE_TABLE:
        got = metrics.time_tolerance(height, width)
        _expect(got == expected, f"{height}x{width} : {got} s au lieu de {expected} s")
    return f"{len(TOLERANCE_TABLE)} lignes conformes"


def _check_tiling() -> str:
    plan = plan_tiles(1024, 1024, 512, 384)
    _expect(len(plan.origins) == 9, f"{len(plan.origins)} tuiles au lieu de 9")
    _expect({row for row, _ in plan.origins} == {0, 384, 512}, "origines inattendues")
    field = FieldTensor(np.random.default_rng(2).uniform(size=(2, 700, 900)))
    big_plan = plan_tiles(700, 900, 512, 384)
    stitched = stitch(cut(field, big_plan), big_plan, field.shape)
    _expect(np.array_equal(stitched.data, field.data), "découpage puis recollage non identique")
    return "9 tuiles, recollage exact"


def _check_field_file() -> str:
    field = FieldTensor(np.random.default_rng(3).standard_normal((3, 17, 11)))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "champ.csf"
        save_field(field, path)
        loaded = load_field(path)
    _expect(loaded.data.tobytes() == field.data.tobytes(), "relecture CSF1 non identique bit à bit")
    return "aller-retour CSF1 exact"


def _check_classifier() -> str:
    rng = np.random.default_rng(4)
    shape = (128, 128)
    cases = [
        (ImageCategory.BINARY, random_blobs(shape, 5, rng)),
        (ImageCategory.GRAY, random_blobs(shape, 5, rng)),
        (ImageCategory.LARGE_CELL, disk_mask(shape, (64, 64), 55)),
        (ImageCategory.SMALL_CELL, random_blobs(shape, 5, rng)),
    ]
    for expected, mask in cases:
        image: RasterImage = demo_image(expected, shape, rng)
        got = categorize(image, mask)
        _expect(got == expected, f"classe {int(got)} au lieu de {int(expected)}")
    return "4 catégories conformes"


SELFTEST_CHECKS: dict[str, Callable[[], str]] = {
    "stardist_aller_retour": _check_stardist_round_trip,
    "hover_disques_accoles": _check_hover_touching_disks,
    "hover_formes_non_convexes": _check_hover_non_convex,
    "pertes_identites": _check_loss_identities,
    "tolerance_temps": _check_time_tolerance,
    "tuilage": _check_tiling,
    "fichier_csf": _check_field_file,
    "classificateur": _check_classifier,
}


def selftest(checks: Mapping[str, Callable[[], str]] | None = None) -> list[CheckResult]:
    """
    Exécute les vérifications embarquées. Une vérification qui échoue ou lève
    une exception devient une entrée en échec du rapport, jamais une erreur.
    """
    results = []
    for name, check in (checks if checks is not None else SELFTEST_CHECKS).items():
        try:
            detail = check()
            results.append(CheckResult(name=name, passed=True, detail=detail))
        except AssertionError as e:
            results.append(CheckResult(name=name, passed=False, detail=str(e)))
        except SegmentationException as e:
            results.append(CheckResult(name=name, passed=False, detail=e.message))
        except Exception as e:
            log.error(f"Autotest '{name}' : erreur imprévue : {e}", exc_info=True)
            results.append(CheckResult(name=name, passed=False, detail=f"Erreur inattendue : {e}"))
    return results
