"""Exact transfer-matrix engine for the Potts model on generalized Petersen graphs."""
