# Spectral: polynomials, pencils, curves, series recurrences, measures, support geometry
__version__ = "0.4.0"
