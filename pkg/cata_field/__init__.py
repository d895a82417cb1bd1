"""
cata_field - neural radiance fields from a single catadioptric image of a
spherical mirror array.

The pipeline simulates or ingests a capture, calibrates the camera against
the array board, restores one reflected world ray per mirror pixel and fits
a radiance field with a per-mirror warping field that absorbs misplaced
mirrors. Novel views are rendered from the unwarped reference space.
"""

__version__ = "0.1.0"
__author__ = "cata_field developers"
