# segmentation_cellulaire/utils.py
"""
Ce module contient des fonctions et décorateurs utilitaires partagés par le paquet.

Le fait de les placer dans un module séparé évite les importations circulaires
entre les codecs, les pertes et la ligne de commande, qui dépendent tous de
l'opérateur de gradient et de la gestion d'erreurs définis ici.
"""

import sys
from collections.abc import Callable
from functools import wraps
from typing import Any

import click
import numpy as np

from .exceptions import InvalidConfigError, SegmentationException


def hv_gradients(hv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradients des cartes HV par différences centrales (décentrées aux bords).

    Retourne ∇x du plan horizontal (le long des colonnes) et ∇y du plan
    vertical (le long des lignes). Le même opérateur sert à l'énergie du
    watershed et à la perte MSGE.
    """
    horizontal = hv[0].astype(np.float64)
    vertical = hv[1].astype(np.float64)
    # np.gradient exige au moins 2 échantillons sur l'axe dérivé.
    grad_x = np.gradient(horizontal, axis=1) if horizontal.shape[1] > 1 else np.zeros_like(horizontal)
    grad_y = np.gradient(vertical, axis=0) if vertical.shape[0] > 1 else np.zeros_like(vertical)
    return grad_x, grad_y


def handle_domain_errors(f: Callable[..., Any]) -> Callable[..., Any]:
    """
    Décorateur pour les commandes CLI.

    Convertit les exceptions du paquet en message d'erreur sur la sortie
    d'erreur et en code de sortie : 2 pour une configuration invalide,
    1 pour toute autre erreur de traitement.
    """

    @wraps(f)
    def decorated_function(*args: Any, **kwargs: Any) -> Any:
        try:
            return f(*args, **kwargs)
        except InvalidConfigError as e:
            click.secho(f"Erreur de configuration : {e.message}", fg="red", err=True)
            sys.exit(2)
        except SegmentationException as e:
            click.secho(f"Erreur : {e.message}", fg="red", err=True)
            sys.exit(1)

    return decorated_function
