import math

FACTOR = 3
_HIDDEN = 7


def scale(value):
    """Multiply by the module factor."""
    return value * FACTOR


def offset(value):
    return value + _HIDDEN


class Point:
    """A 2D point."""

    def __init__(self, x, y):
        self.x = x
        self.y = y

    def norm(self):
        return math.hypot(self.x, self.y)
