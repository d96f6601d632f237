"""urban3d: deterministic 3D urban analytics.

Builds synthetic city scenes, simulates rooftop solar irradiance against the
full 3D scene, extracts tiered spatial feature tables, and fits/evaluates
spatially aware predictive models, all reproducible bit-for-bit from seeds.
"""

__version__ = "0.1.0"
