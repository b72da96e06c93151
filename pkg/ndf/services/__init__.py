"""
Pipeline services: field training, extraction, geometry tasks, scalar
compression, sampling and packaging.
"""
