#!/usr/bin/env python3
"""
hiergap - Startup Script

Runs the command-line driver from a source checkout.
"""

import os
import sys

# Add the package directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from hiergap.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
