"""BRICS fragmentation and Murcko scaffolds."""

from .brics import FragmentMap, brics_partition, cleavable_bonds, components, environments, load_rules
from .scaffold import murcko_scaffold, scaffold_atoms

__all__ = ["FragmentMap", "brics_partition", "cleavable_bonds", "components", "environments", "load_rules",
           "murcko_scaffold", "scaffold_atoms"]
