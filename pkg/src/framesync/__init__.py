"""Synchronization of pairwise linear, orthogonal, affine and Euclidean transforms between frames."""
from .direct import (FrameSolution, GapCertificate, SyncReport, gap_bound, gap_certificate,
                     metrics, polar, project_orthogonal, reference_baseline, solve_h,
                     solve_orthogonal, solve_p3, solve_z)
from .errors import (ConvergenceError, DisconnectedGraph, FrameSyncError, MissingTransform,
                     NonQSCGraph, SingularBlock, SingularEdgeMatrix)
from .graph import FrameGraph
from .instances import InstanceSpec, ProblemInstance, make_instance

__all__ = [
    "ConvergenceError", "DisconnectedGraph", "FrameGraph", "FrameSolution", "FrameSyncError",
    "GapCertificate", "InstanceSpec", "MissingTransform", "NonQSCGraph", "ProblemInstance",
    "SingularBlock", "SingularEdgeMatrix", "SyncReport", "gap_bound", "gap_certificate",
    "make_instance", "metrics", "polar", "project_orthogonal", "reference_baseline", "solve_h",
    "solve_orthogonal", "solve_p3", "solve_z",
]
__version__ = "0.1.0"
