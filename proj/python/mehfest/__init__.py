"""MEH-FEST detector workbench: STFT band-energy detector, theory, attack and defense."""

from ._core import *  # noqa: F401,F403
