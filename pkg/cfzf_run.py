#!/usr/bin/env python3
"""
cfzf - Command Line Interface

Entry point for the cell-free ZF simulator.
"""

import sys
from pathlib import Path

# Add the current directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent))

from cfzf.cli import main

if __name__ == '__main__':
    main()
