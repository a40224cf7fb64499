"""capcheck - capability viewpoint toolkit for automated-vehicle safety"""

__version__ = "1.0.0"
__author__ = "capcheck developers"

from .cli import cli  # noqa: E402

__all__ = ["cli"]
