# segmentation_cellulaire/exceptions.py
"""
Ce module regroupe les exceptions personnalisées du paquet.

Elles sont placées dans un module séparé pour que les modules de calcul
(codecs, métriques, tuilage) et la couche de services puissent les lever
sans importations circulaires. Chaque exception porte un attribut `message`
lisible, affiché tel quel par la ligne de commande.
"""


class SegmentationException(Exception):
    """Exception de base pour toutes les erreurs du paquet."""

    def __init__(self, message="Une erreur est survenue."):
        self.message = message
        super().__init__(self.message)


class UnsupportedFormatError(SegmentationException):
    """Levée lorsqu'un fichier a une profondeur de bits ou un nombre de canaux non pris en charge."""

    def __init__(self, message="Format de fichier non pris en charge."):
        super().__init__(message)


class IoFailureError(SegmentationException):
    """Levée lorsqu'un fichier est illisible, tronqué ou impossible à écrire."""

    def __init__(self, message="Erreur de lecture ou d'écriture de fichier."):
        super().__init__(message)


class WrongChannelCountError(SegmentationException):
    """Levée lorsqu'une opération reçoit une image au mauvais nombre de canaux."""

    def __init__(self, message="Nombre de canaux incorrect."):
        super().__init__(message)


class DimensionMismatchError(SegmentationException):
    """Levée lorsque deux cartes 2-D n'ont pas les mêmes dimensions."""

    def __init__(self, message="Les dimensions ne correspondent pas."):
        super().__init__(message)


class InconsistentFieldError(SegmentationException):
    """Levée lorsqu'un champ de prédiction n'a pas le nombre de plans attendu."""

    def __init__(self, message="Champ de prédiction incohérent."):
        super().__init__(message)


class ShapeMismatchError(SegmentationException):
    """Levée lorsque deux tenseurs (ou une tuile et son plan) n'ont pas la même forme."""

    def __init__(self, message="Les formes des tenseurs ne correspondent pas."):
        super().__init__(message)


class InvalidConfigError(SegmentationException):
    """Levée lorsqu'un paramètre viole les invariants de sa configuration."""

    def __init__(self, message="Configuration invalide."):
        super().__init__(message)


class ConfigError(InvalidConfigError):
    """Levée pour un fichier de configuration ou une table de routage incohérents."""

    def __init__(self, message="Erreur de configuration."):
        super().__init__(message)


class CoverageGapError(SegmentationException):
    """Levée lorsqu'au moins un pixel n'est couvert par aucune tuile lors du recollage."""

    def __init__(self, message="Des pixels ne sont couverts par aucune tuile."):
        super().__init__(message)


class EmptyInputError(SegmentationException):
    """Levée lorsqu'une agrégation reçoit une liste vide."""

    def __init__(self, message="Aucune donnée à agréger."):
        super().__init__(message)
