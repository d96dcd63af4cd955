"""Principal eigenvalues and KPP steady states on 2D grid domains."""
