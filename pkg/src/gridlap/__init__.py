"""Graph Laplacians on structured grids, their symbols and multigrid solvers."""

__version__ = "0.1.0"
