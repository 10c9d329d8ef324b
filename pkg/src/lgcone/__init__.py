"""Exact computations on the Lagrangian cone of Fermat Landau-Ginzburg models."""

from .lgmodel import FermatModel, build_model, load_model_file

__version__ = "0.1.0"
