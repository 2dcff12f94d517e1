raise RuntimeError("import-time failure")


def f():
    """Never reachable."""
    return 1
