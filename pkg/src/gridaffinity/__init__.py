"""Voxel-grid 3D CNN scoring of protein-ligand complexes."""
