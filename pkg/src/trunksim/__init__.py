"""Design and simulation toolkit for soft lattice grippers.

Subpackages cover lattice geometry generation, tagged tet meshing, a
corotational FEM with pressure regimes, virtual compression testing,
2D waveguide ray optics, and sensor-placement rules.
"""

__version__ = "0.1.0"
