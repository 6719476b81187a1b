"""Physical constants (CODATA values, as shipped with scipy)."""

from scipy import constants as _c

HBAR = _c.hbar
K_B = _c.k
C_LIGHT = _c.c
TWO_PI = 2.0 * _c.pi
