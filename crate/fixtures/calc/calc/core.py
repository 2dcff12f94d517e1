import os


class Pair:
    """Two values."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __eq__(self, other):
        return isinstance(other, Pair) and (self.a, self.b) == (other.a, other.b)


def double(x):
    """Return twice x."""
    if not isinstance(x, int):
        raise TypeError("int expected")
    return x * 2


def make_pair(a, b):
    """Build a Pair."""
    return Pair(a, b)


def ticket():
    """Next number from a counter kept in the working directory."""
    path = os.path.join(os.getcwd(), ".ticket")
    n = int(open(path).read()) if os.path.exists(path) else 0
    with open(path, "w") as f:
        f.write(str(n + 1))
    return n


def spin(x):
    """Loops forever on negative input."""
    while x < 0:
        pass
    return x
