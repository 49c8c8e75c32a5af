"""
Utility modules for the sbdc toolkit.
"""

from utils.config import *
from utils.logger import Logger, logger
