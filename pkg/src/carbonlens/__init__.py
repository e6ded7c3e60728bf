"""Per-pixel road-transport CO2 regression from overhead imagery and road maps."""

__version__ = "0.1.0"
