"""Shared output handling for the experiment scripts."""
import os
import sys

RESULTS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "results")


def out_path(default_name):
    """First command-line argument, or ``results/<default_name>``."""
    if len(sys.argv) > 1:
        return sys.argv[1]
    os.makedirs(RESULTS, exist_ok=True)
    return os.path.join(RESULTS, default_name)
