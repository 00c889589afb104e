"""
ACRNN 환경음 분류 툴킷 패키지
"""

from .config import Config

__version__ = "1.0.0"
__all__ = ["Config", "__version__"]
