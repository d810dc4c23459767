#!/usr/bin/env python3
"""
Qubit Emission Simulator
"""

import sys

from cli import main

sys.exit(main())
