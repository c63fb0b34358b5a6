from .grid import make_grid
