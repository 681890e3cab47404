"""Small numeric helpers.

Thresholds in this package are real-valued expressions like (1 - 1/r + gamma) * n
whose exact values are often representable-adjacent (e.g. 0.8 * 40). Applying
ceil/floor straight to the float can be off by one, so these helpers round away
float dust first.
"""

import math

_DUST = 9  # decimal places considered meaningful for threshold arithmetic


def fceil(x: float) -> int:
    """Ceiling of x after discarding float representation noise."""
    return math.ceil(round(x, _DUST))


def ffloor(x: float) -> int:
    """Floor of x after discarding float representation noise."""
    return math.floor(round(x, _DUST))


def bit_indices(mask: int):
    """Yield the set-bit positions of a nonnegative int, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
