"""
polyvem: conforming virtual elements for polyharmonic problems
"""
__version__ = "0.1.0"
__description__ = "Conforming virtual element method for (-Δ)^p1 u = f on polygonal meshes"
__license__ = "MIT"
