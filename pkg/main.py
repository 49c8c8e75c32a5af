#!/usr/bin/env python3
"""
Secure-by-design consensus toolkit

Command-line entry point: analyze scenarios against codeword-tampering
certificates, simulate the consensus dynamics and reproduce the embedded
six-agent benchmark.
"""

import sys
import os
import logging
import traceback

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout)
    ]
)

# Add current directory to path for imports
current_dir = os.path.dirname(os.path.abspath(__file__))
if current_dir not in sys.path:
    sys.path.insert(0, current_dir)

try:
    from sbdc.app import main
except Exception as e:
    print(f"Error importing modules: {e}")
    traceback.print_exc()
    sys.exit(1)

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nRun interrupted by user.")
        sys.exit(1)
