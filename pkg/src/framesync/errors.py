"""Exception types raised by the synchronization solvers."""


class FrameSyncError(Exception):
    """Base class for all errors raised by framesync."""


class NonQSCGraph(FrameSyncError):
    """The graph has no center, so a method requiring quasi-strong connectivity cannot run."""


class DisconnectedGraph(FrameSyncError):
    """The undirected version of the graph has more than one component."""


class SingularBlock(FrameSyncError):
    """An extracted d x d block is numerically singular.

    Raised when the input is too far from transitive consistency for the
    spectral solution to be read off as invertible frames.
    """


class SingularEdgeMatrix(FrameSyncError):
    """A pairwise transform that must be inverted is numerically singular."""


class ConvergenceError(FrameSyncError):
    """An iterative routine hit its iteration cap before meeting its tolerance."""


class MissingTransform(FrameSyncError, KeyError):
    """An edge of the graph has no associated transform."""
