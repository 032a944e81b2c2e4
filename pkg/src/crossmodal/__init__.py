"""Cross-modal visuo-tactile object recognition.

Train on visual point clouds, recognize tactile queries: cloud equalization
(moving-least-squares resampling + voxel filtering), global shape descriptors
(esf / shot / concat / clue), geodesic-flow-kernel domain adaptation, and
kNN / SVM classification, plus a synthetic data generator and benchmark
harness standing in for the capture hardware.
"""

from .adapt import (
    FeatureSet,
    GfkModel,
    SubspacePair,
    geodesic_point,
    gfk_distance,
    gfk_fit,
    gfk_similarity,
    pca_basis,
    pca_transfer,
    principal_angles,
)
from .classify import (
    ConfusionMatrix,
    KernelSpec,
    KnnModel,
    MetricSpec,
    SvmModel,
    evaluate,
    fit_knn,
    kfold_cv,
    knn_classify,
    svm_predict,
    svm_train,
)
from .cloud import (
    EqualizationParams,
    LocalPlane,
    Point,
    PointCloud,
    equalize,
    fit_local_plane,
    mls_resample,
    radius_neighbors,
    voxel_filter,
)
from .descriptors import (
    Descriptor,
    NormalField,
    SvdFusion,
    compute_clue,
    compute_esf,
    compute_shot,
    concat_descriptor,
    estimate_normals,
    svd_fusion,
)
from .pipeline import (
    ClassifierSpec,
    DescriptorSpec,
    PipelineConfig,
    cmr_train,
    recognize,
    run_benchmark,
    tlcmr_train,
)
from .synth import (
    ExplorationGrid,
    ObjectModel,
    SensorSpec,
    grid_covering,
    make_object,
    plane_removal,
    sample_tactile,
    sample_visual,
)

__version__ = "0.1.0"
