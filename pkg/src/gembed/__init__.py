"""Compressive graph embedding.

Embed a small, graph-sampled sketch of a dataset with any algorithm and spread
the result to every point with graph filters.
"""

from ._backend import NAME as BACKEND
from ._config import get_num_threads, set_num_threads
from .errors import (
    BridgeError,
    ConvergenceError,
    DegenerateClass,
    DegenerateInput,
    DegenerateKernel,
    GembedError,
    GuardExceeded,
    InvalidInput,
    InvalidKernel,
    InvalidParameter,
    UnsupportedDimension,
)
from .graph import (
    LaplacianOperator,
    PointCloud,
    SparseGraph,
    build_knn_graph,
    knn_search,
    laplacian,
    read_points_csv,
)
from .metrics import kdd, kdd_matrix, lkd
from .pipeline import PipelineConfig, SketchResult, choose_sample_count, compressive_embed
from .quality import LabeledEmbedding, acc_exact, acc_randomized, aci, cheeger_score
from .sampling import adapted_distribution, draw_samples, uniform_distribution
from .spectral import (
    ChebyshevFilter,
    ExpWindowKernel,
    HeatKernel,
    RectangleKernel,
    estimate_atom_norms,
    filter_signal,
    localize,
    make_filter,
    parse_kernel,
)
from .synth import SyntheticSpec, generate
from .transduction import ObservedSignal, apply_diffusion, chd_operator, rkhs_fit, tikhonov_diffuse

__version__ = "0.1.0"
