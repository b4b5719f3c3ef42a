"""gradedcavity: eigenmodes and vacuum observables of a graded-dielectric cavity."""

__version__ = "0.1.0"
