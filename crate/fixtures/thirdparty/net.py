import json
import requests
import yaml
from .local import helper


def fetch(url):
    """Fetch a URL."""
    return requests.get(url).json()
