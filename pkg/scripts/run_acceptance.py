#!/usr/bin/env python3
"""Run the acceptance suite and print one PASS/FAIL line per criterion."""
import sys
from pathlib import Path

import pytest

if __name__ == "__main__":
    tests = Path(__file__).resolve().parents[1] / "tests"
    sys.exit(pytest.main([str(tests / "test_acceptance.py"), "-q", "-p", "no:cacheprovider",
                          "--rootdir", str(tests.parent)]))
