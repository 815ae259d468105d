"""Joint inpainting of time-varying graph signals and graph learning through
an unrolled CG / projected-gradient network."""
from .core import (
    AlphaParams,
    GraphLaplacian,
    Hyperparams,
    TemporalKernel,
    build_kernel,
    difference_operator,
    graph_variation,
    temporal_difference,
    validate_laplacian,
)
from .graphlearn import (
    ProjectionMask,
    covariance_init,
    gl,
    gl_gradient,
    knn_graph,
    project_to_laplacian,
)
from .inpaint import direct_solve_oracle, emd, inpaint_gradient, inpaint_objective
from .metrics import (
    EdgeSet,
    binarize,
    f_score,
    normalized_error,
    sensing_ratio,
    stability_score,
)
from .synth import SynthConfig, add_noise, er_graph, gsd, sample_mask
from .unroll import TrainTrace, UnrollState, forward, loss, train_alpha

__version__ = "0.1.0"
