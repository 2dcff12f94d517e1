from .helpers import scale as rescale
