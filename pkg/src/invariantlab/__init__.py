"""Invariant compact sets for holomorphic self-maps of C^k.

The package is organised one module per subsystem:

``geometry``   complex vectors/matrices, 2x2 spectra, singular values, rank
``maps``       sparse polynomial maps and automorphism chains (Henon flagship)
``compact``    point-cloud compacta, Hausdorff metric, domains, invariance defects
``escape``     escape-time sets K+, K-, K and the attraction toward K
``hull``       degree-bounded polynomially convex hull tests
``birkhoff``   the scaled-map / inverse-basin construction of forward-invariant compacta
``classify``   recurrence detection and the rank trichotomy of limit maps
``cli``        command line driver
"""

__version__ = "0.1.0"

REPORT_SCHEMA_VERSION = 1
