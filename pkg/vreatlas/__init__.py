"""VreAtlas"""

__version__ = "0.1.0"
__description__ = "VreAtlas: gridded onshore wind and solar resource assessment under landscape and land-use scenarios"
