"""Partial Dirichlet-to-Neumann maps, their residuals, and reconstruction of the Dirichlet operator."""
