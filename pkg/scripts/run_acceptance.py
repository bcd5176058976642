"""Run the acceptance suite and print one pass/fail line per criterion.

    python3 scripts/run_acceptance.py
"""
import os
import sys

import pytest

if __name__ == "__main__":
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    sys.exit(pytest.main(["-q", "-p", "no:cacheprovider", os.path.join(root, "tests", "test_acceptance.py")]))
