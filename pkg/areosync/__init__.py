""":mod:`areosync` -- Distributed coordination of areostationary constellations"""

from . import metadata
__version__ = metadata.version
__author__ = metadata.authors[0]
__license__ = metadata.license
__copyright__ = metadata.copyright
