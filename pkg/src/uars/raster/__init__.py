from .project import LOWPASS, NEAR_PLANE, SplatProjection, project
from .render import RenderGradients, RenderOutput, render, render_backward, render_bruteforce

__all__ = [
    "LOWPASS",
    "NEAR_PLANE",
    "RenderGradients",
    "RenderOutput",
    "SplatProjection",
    "project",
    "render",
    "render_backward",
    "render_bruteforce",
]
