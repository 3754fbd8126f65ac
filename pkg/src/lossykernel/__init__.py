"""Lossy kernelization for vertex deletion to minor-closed classes."""
