def helper():
    """Help."""
    return 1
