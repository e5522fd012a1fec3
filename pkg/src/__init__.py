"""treeirs - invariant random subgroups of finitary tree automorphism groups."""

__version__ = "0.1.0"
