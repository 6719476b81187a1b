"""Two-mode Raman laser with movable mirrors: gain, bistability, mirror entanglement."""

__version__ = "0.1.0"
