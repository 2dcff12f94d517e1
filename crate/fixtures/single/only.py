import json


def dump(obj):
    """Serialize to JSON."""
    return json.dumps(obj, sort_keys=True)
