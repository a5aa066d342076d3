# run.py
"""
Point d'entrée pour l'exécution de la ligne de commande sans installation.

Ce script importe le groupe de commandes `cli` depuis le paquet
`segmentation_cellulaire` et le lance ; il équivaut à la commande `segcell`
installée par pyproject.toml.

Par exemple : `python run.py selftest`
"""

from segmentation_cellulaire.commands import cli

if __name__ == "__main__":
    # prog_name fixe le nom affiché dans l'aide.
    cli(prog_name="segcell")
