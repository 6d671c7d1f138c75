"""Exception hierarchy shared by all dpmseg modules.

Every domain error derives from DpmError so the CLI can map failures to a
single exit code. NonConvergence is special-cased (exit 3) and carries the
partial trajectory.
"""


class DpmError(Exception):
    """Base class for all domain errors."""


# --- masks / fields ---------------------------------------------------------

class AllForeground(DpmError):
    """Mask contains no background pixels; boundary undefined."""


class AllBackground(DpmError):
    """Mask contains no foreground pixels; boundary undefined."""


class OutOfBounds(DpmError):
    """Continuous position outside the pixel grid."""


# --- patches / dataset ------------------------------------------------------

class DegenerateDirection(DpmError):
    """Interpolated field magnitude too small to define a patch orientation."""


class EmptyBand(DpmError):
    """No non-singular pixels inside the sampling band."""


# --- model ------------------------------------------------------------------

class BadArchitecture(DpmError):
    """Architecture descriptor is malformed or output width is not 2."""


class ShapeMismatch(DpmError):
    """Tensor shapes inconsistent with the model or file header."""


class EmptyDataset(DpmError):
    """Training requested on a dataset with zero samples."""


# --- agent ------------------------------------------------------------------

class TooCloseToBorder(DpmError):
    """Seed position leaves no room for a full patch."""


class DegenerateStep(DpmError):
    """Policy produced a (near-)zero displacement."""


class Stalled(DpmError):
    """Agent pinned at the border margin for too many consecutive steps."""


class NonConvergence(DpmError):
    """Rollout hit max_steps before the stopping criterion fired.

    Carries the partial trajectory so callers can still inspect or dump it.
    """

    def __init__(self, max_steps, trajectory=None):
        super().__init__(f"no convergence within {max_steps} steps")
        self.max_steps = max_steps
        self.trajectory = trajectory


# --- poincare ---------------------------------------------------------------

class InsufficientPrefix(DpmError):
    """Trajectory shorter than the warmup window."""


class DegenerateCycle(DpmError):
    """Extracted loop has too few distinct points or too little arclength."""


# --- metrics ----------------------------------------------------------------

class DegenerateContour(DpmError):
    """Contour has fewer than 3 vertices or zero area."""


class DimensionMismatch(DpmError):
    """Two rasters do not share the same width/height."""


class EmptyList(DpmError):
    """Aggregate requested over zero reports."""


# --- synth ------------------------------------------------------------------

class SpecInfeasible(DpmError):
    """Shape spec cannot satisfy the margin rule inside the image."""


# --- file formats -----------------------------------------------------------

class BadMagic(DpmError):
    """File does not start with the expected magic string."""


class BadMaxval(DpmError):
    """PGM maxval is not 255."""


class NonBinaryMask(DpmError):
    """PGM read as a mask contains values other than 0 and 255."""


class TruncatedFile(DpmError):
    """File ends before the payload announced by its header."""


class NothingToRender(DpmError):
    """SVG rendering called with no layers."""


class BadConfig(DpmError):
    """Run configuration contains unknown keys or out-of-domain values."""
