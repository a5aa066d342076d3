# segmentation_cellulaire/commands.py
"""
Ce module définit les commandes CLI du paquet (`segcell`).

Chaque opération est exposée comme sous-commande ; la commande `pipeline`
enchaîne classement, choix du décodeur par classe, recollage des tuiles,
décodage et évaluation. La journalisation va sur la sortie d'erreur, les
résultats (classe, valeurs, CSV) sur la sortie standard ou dans des fichiers.

Codes de sortie : 0 succès, 1 erreur de traitement (ou image en échec),
2 erreur d'utilisation ou de configuration.

Pour utiliser les commandes définies ici, exécutez depuis le terminal :
`segcell <nom_de_la_commande> --help`
Par exemple : `segcell tile-plan --height 1024 --width 1024`
"""

import logging
import sys
from pathlib import Path
from typing import Any

import click

from . import __version__, create_config, exports, services
from .classifier import categorize
from .exceptions import ConfigError
from .hover_codec import decode_watershed, encode_hover
from .losses import ce_loss, dice_loss, hover_loss, mae_loss, mse_loss, msge_loss, stardist_loss
from .models import EvaluationSummary, FieldTensor, HoverField, PipelineConfig, RadialField
from .stardist_codec import decode_nms, encode_stardist
from .tensor_io import load_field, load_image, load_instance_map, save_field, save_instance_map
from .tiler import plan_tiles
from .utils import handle_domain_errors

log = logging.getLogger(__name__)

FILE = click.Path(dir_okay=False, path_type=Path)
DIRECTORY = click.Path(file_okay=False, path_type=Path)
LOSS_KINDS = ["ce", "dice", "mae", "mse", "msge", "stardist", "hover"]


def _build_config(ctx: click.Context, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Construit la configuration : défauts, puis fichier --config, puis options de la commande."""
    return create_config(overrides, config_file=ctx.obj.get("config_file"))


def _parse_decoder_overrides(values: tuple[str, ...]) -> dict[str, str]:
    overrides = {}
    for value in values:
        category, _, decoder = value.partition("=")
        if not category.strip().isdigit() or not decoder.strip():
            raise ConfigError(f"Option --decoder invalide : '{value}' (forme attendue : 1=hover).")
        overrides[f"CLASS{int(category)}_DECODER"] = decoder.strip()
    return overrides


@click.group()
@click.option("--config", "config_file", type=FILE, default=None, help="Fichier de configuration CLÉ=VALEUR.")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
)
@click.version_option(__version__)
@click.pass_context
def cli(ctx: click.Context, config_file: Path | None, log_level: str) -> None:
    """Segmentation d'instances cellulaires : codecs, décodeurs, tuilage et évaluation."""
    logging.basicConfig(level=log_level.upper(), stream=sys.stderr, format="%(levelname)s %(name)s : %(message)s", force=True)
    ctx.ensure_object(dict)
    ctx.obj["config_file"] = config_file


# --- Classificateur ---
@cli.command("classify")
@click.option("--image", "image_path", type=FILE, required=True)
@click.option("--mask", "mask_path", type=FILE, required=True)
@click.option("--theta", type=float, default=None)
@click.option("--alpha-s", type=float, default=None)
@click.option("--alpha-l", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--invert-saturation-test", is_flag=True, default=None, help="Teste S̄ < θ au lieu de S̄ > θ.")
@click.pass_context
@handle_domain_errors
def classify_command(ctx: click.Context, image_path: Path, mask_path: Path, theta, alpha_s, alpha_l, sigma, invert_saturation_test) -> None:
    """Affiche la catégorie (0 à 3) d'une image."""
    cfg = _build_config(
        ctx,
        {"THETA": theta, "ALPHA_S": alpha_s, "ALPHA_L": alpha_l, "SIGMA": sigma, "INVERT_SATURATION_TEST": invert_saturation_test},
    )
    category = categorize(load_image(image_path), load_instance_map(mask_path), cfg.classifier)
    click.echo(int(category))


# --- Stardist ---
def _save_encoded(field: FieldTensor, out_path: Path, tiles_dir: Path | None, cfg: PipelineConfig) -> None:
    save_field(field, out_path)
    if tiles_dir is not None:
        count = services.save_tiled_field(field, tiles_dir, cfg.window, cfg.step)
        log.info(f"{count} tuiles écrites dans '{tiles_dir}'.")
    click.echo(f"{field.planes}x{field.height}x{field.width}")


@cli.command("encode-stardist")
@click.option("--mask", "mask_path", type=FILE, required=True)
@click.option("--rays", type=int, default=None)
@click.option("--out", "out_path", type=FILE, required=True)
@click.option("--tiles-dir", type=DIRECTORY, default=None, help="Écrit aussi le champ en tuiles r<ligne>_c<colonne>.csf.")
@click.pass_context
@handle_domain_errors
def encode_stardist_command(ctx: click.Context, mask_path: Path, rays: int | None, out_path: Path, tiles_dir: Path | None) -> None:
    """Encode une carte d'instances en champ Stardist (1 + R plans)."""
    cfg = _build_config(ctx, {"RAYS": rays})
    field = encode_stardist(load_instance_map(mask_path), cfg.rays).to_field()
    _save_encoded(field, out_path, tiles_dir, cfg)


@cli.command("decode-stardist")
@click.option("--field", "field_path", type=FILE, required=True)
@click.option("--prob-th", type=float, default=None)
@click.option("--iou-th", type=float, default=None)
@click.option("--rays", type=int, default=None, help="Nombre de rayons attendu (vérifié contre le fichier).")
@click.option("--out", "out_path", type=FILE, required=True)
@click.pass_context
@handle_domain_errors
def decode_stardist_command(ctx: click.Context, field_path: Path, prob_th, iou_th, rays: int | None, out_path: Path) -> None:
    """Décode un champ Stardist par NMS et écrit la carte d'instances (PNG 16 bits)."""
    cfg = _build_config(ctx, {"PROB_THRESHOLD": prob_th, "IOU_THRESHOLD": iou_th})
    instances = decode_nms(RadialField.from_field(load_field(field_path), rays), cfg.nms)
    save_instance_map(instances, out_path)
    click.echo(instances.count)


# --- HoverNet ---
@cli.command("encode-hover")
@click.option("--mask", "mask_path", type=FILE, required=True)
@click.option("--out", "out_path", type=FILE, required=True)
@click.option("--tiles-dir", type=DIRECTORY, default=None, help="Écrit aussi le champ en tuiles r<ligne>_c<colonne>.csf.")
@click.pass_context
@handle_domain_errors
def encode_hover_command(ctx: click.Context, mask_path: Path, out_path: Path, tiles_dir: Path | None) -> None:
    """Encode une carte d'instances en champ HoverNet (4 plans)."""
    cfg = _build_config(ctx)
    field = encode_hover(load_instance_map(mask_path)).to_field()
    _save_encoded(field, out_path, tiles_dir, cfg)


@cli.command("decode-hover")
@click.option("--field", "field_path", type=FILE, required=True)
@click.option("--cp-th", type=float, default=None)
@click.option("--energy-th", type=float, default=None, help="Seuil d'énergie au-dessus duquel un pixel n'est pas un marqueur.")
@click.option("--min-marker-size", type=int, default=None)
@click.option("--out", "out_path", type=FILE, required=True)
@click.pass_context
@handle_domain_errors
def decode_hover_command(ctx: click.Context, field_path: Path, cp_th, energy_th, min_marker_size, out_path: Path) -> None:
    """Décode un champ HoverNet par watershed contrôlé par marqueurs."""
    cfg = _build_config(ctx, {"CP_THRESHOLD": cp_th, "MARKER_ENERGY_THRESHOLD": energy_th, "MIN_MARKER_SIZE": min_marker_size})
    instances = decode_watershed(HoverField.from_field(load_field(field_path)), cfg.watershed)
    save_instance_map(instances, out_path)
    click.echo(instances.count)


# --- Pertes ---
@cli.command("loss")
@click.option("--kind", type=click.Choice(LOSS_KINDS), required=True)
@click.option("--pred", "pred_path", type=FILE, required=True)
@click.option("--target", "target_path", type=FILE, required=True)
@click.option("--mask", "mask_path", type=FILE, default=None, help="Carte d'instances M (obligatoire pour msge).")
@click.pass_context
@handle_domain_errors
def loss_command(ctx: click.Context, kind: str, pred_path: Path, target_path: Path, mask_path: Path | None) -> None:
    """Affiche la valeur d'une perte entre deux champs."""
    cfg = _build_config(ctx)
    pred, target = load_field(pred_path), load_field(target_path)
    mask = load_instance_map(mask_path) if mask_path else None

    if kind == "msge" and mask is None:
        raise click.UsageError("--mask est obligatoire pour --kind msge.")
    if kind == "ce":
        value = ce_loss(pred, target)
    elif kind == "dice":
        value = dice_loss(pred, target, cfg.loss_weights.dice_epsilon)
    elif kind == "mae":
        value = mae_loss(pred, target)
    elif kind == "mse":
        value = mse_loss(pred, target)
    elif kind == "msge":
        value = msge_loss(pred, target, mask)
    elif kind == "stardist":
        value = stardist_loss(pred, target, cfg.loss_weights)
    else:
        value = hover_loss(pred, target, mask)
    click.echo(f"{value:.10g}")


# --- Tuilage ---
@cli.command("tile-plan")
@click.option("--height", type=int, required=True)
@click.option("--width", type=int, required=True)
@click.option("--window", type=int, default=None)
@click.option("--step", type=int, default=None)
@click.pass_context
@handle_domain_errors
def tile_plan_command(ctx: click.Context, height: int, width: int, window: int | None, step: int | None) -> None:
    """Affiche les origines des tuiles, une par ligne (ligne,colonne)."""
    cfg = _build_config(ctx)
    plan = plan_tiles(height, width, window if window is not None else cfg.window, step if step is not None else cfg.step)
    for row, col in plan.origins:
        click.echo(f"{row},{col}")


# --- Évaluation ---
def _echo_summary(summary: EvaluationSummary) -> None:
    mean = f"{summary.mean_f1:.4f}" if summary.mean_f1 is not None else "n/a"
    click.echo(f"F1 moyen : {mean} ({summary.evaluated} images évaluées, {summary.failed} en échec)")
    for category, value in summary.classwise_f1.items():
        click.echo(f"F1 moyen classe {int(category)} : {value:.4f}")
    click.echo(f"Temps total hors tolérance : {summary.total_out_of_tolerance:.2f} s")
    if summary.classification is not None:
        click.echo(f"Exactitude du classement : {summary.classification.overall:.4f} ({summary.classification.total} images)")


@cli.command("evaluate")
@click.option("--pred-dir", type=DIRECTORY, required=True)
@click.option("--gt-dir", type=DIRECTORY, required=True)
@click.option("--per-class", "per_class", type=FILE, default=None, help="Manifeste donnant la catégorie de chaque image.")
@click.option("--timings", type=FILE, default=None, help="CSV name,seconds des temps réels.")
@click.option("--out", "out_path", type=FILE, default=None, help="CSV de sortie (sortie standard par défaut).")
@click.option("--xlsx", "xlsx_path", type=FILE, default=None, help="Classeur Excel de sortie.")
@click.pass_context
@handle_domain_errors
def evaluate_command(ctx: click.Context, pred_dir: Path, gt_dir: Path, per_class, timings, out_path, xlsx_path) -> None:
    """Évalue des cartes prédites contre la vérité terrain (F1 à IoU > 0.5)."""
    cfg = _build_config(ctx)
    rows, summary = services.evaluate_directories(pred_dir, gt_dir, per_class, timings, cfg)
    exports.write_evaluation_csv(rows, out_path or click.get_text_stream("stdout"))
    if xlsx_path:
        exports.save_evaluation_workbook(rows, summary, xlsx_path)
    _echo_summary(summary)
    if summary.failed:
        sys.exit(1)


# --- Pipeline ---
@cli.command("pipeline")
@click.option("--manifest", type=FILE, required=True)
@click.option("--fields", "fields_dir", type=DIRECTORY, required=True)
@click.option("--out", "out_dir", type=DIRECTORY, required=True)
@click.option("--workers", type=int, default=None)
@click.option("--decoder", "decoders", multiple=True, help="Routage classe=décodeur, par exemple 2=hover (répétable).")
@click.option("--window", type=int, default=None)
@click.option("--step", type=int, default=None)
@click.option("--xlsx", "xlsx_path", type=FILE, default=None, help="Classeur Excel de sortie.")
@click.pass_context
@handle_domain_errors
def pipeline_command(ctx: click.Context, manifest: Path, fields_dir: Path, out_dir: Path, workers, decoders, window, step, xlsx_path) -> None:
    """Classe, route, recolle, décode et évalue chaque image du manifeste."""
    cfg = _build_config(ctx, {"WORKERS": workers, "WINDOW": window, "STEP": step, **_parse_decoder_overrides(decoders)})
    rows, summary = services.run_pipeline(manifest, fields_dir, out_dir, cfg)
    if xlsx_path:
        exports.save_evaluation_workbook(rows, summary, xlsx_path)
    _echo_summary(summary)
    if summary.failed:
        sys.exit(1)


# --- Autotest ---
@cli.command("selftest")
@click.option("--check", "names", multiple=True, type=click.Choice(list(services.SELFTEST_CHECKS)), help="Limite l'autotest à ces vérifications.")
def selftest_command(names: tuple[str, ...]) -> None:
    """Exécute les vérifications embarquées et affiche le résultat de chacune."""
    checks = {name: services.SELFTEST_CHECKS[name] for name in names} if names else None
    results = services.selftest(checks)
    for result in results:
        if result.passed:
            click.secho(f"OK     {result.name} : {result.detail}", fg="green")
        else:
            click.secho(f"ÉCHEC  {result.name} : {result.detail}", fg="red")
    failed = sum(1 for result in results if not result.passed)
    click.echo(f"{len(results) - failed}/{len(results)} vérifications réussies.")
    if failed:
        sys.exit(1)
