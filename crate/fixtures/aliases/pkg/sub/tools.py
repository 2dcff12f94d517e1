from typing import List, Optional

from .. import helpers as h
from ..helpers import *
from ..helpers import offset as shift
from pkg import rescale
import pkg.helpers
import os.path as osp
from ...outside import nothing


def combine(values: List[int], limit: Optional[int] = None) -> int:
    """Combine values through every helper."""
    total = 0
    for v in values:
        total += h.scale(v) + shift(v) + rescale(v)
    p = Point(total, FACTOR)
    q: Point = p
    helper = pkg.helpers.offset
    return int(p.norm()) + len(osp.sep) + helper(total)


def annotated(p: Point) -> Point:
    """Uses Point only as a type."""
    return p


def recursive(n):
    """Counts down."""
    if n <= 0:
        return 0
    return recursive(n - 1)


def shadowing(values):
    """Locals and comprehension variables shadow module names."""
    FACTOR = 2
    scaled = [scale for scale in values]
    fn = lambda shift: shift * FACTOR
    from .. import helpers
    return [fn(s) for s in scaled] + [helpers.offset(0)]
