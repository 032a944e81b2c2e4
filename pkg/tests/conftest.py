import pytest

from crossmodal import pipeline
from crossmodal.cloud import EqualizationParams


FAST_EQ = EqualizationParams(upsample_step=0.004, search_radius=0.03, voxel_edge=0.008)


def fast_config(**overrides):
    base = dict(
        equalization=FAST_EQ,
        preprocessing=True,
        descriptor=pipeline.DescriptorSpec("clue", esf_samples=1500, esf_seed=0, normals_k=6),
        adaptation="none",
        subspace_dim=4,
        classifier=pipeline.ClassifierSpec("knn", k=1),
        seed=0,
    )
    base.update(overrides)
    return pipeline.PipelineConfig(**base)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """3 classes x 4 visual x 2 tactile, generated once per session."""
    root = tmp_path_factory.mktemp("dataset")
    manifest = pipeline.generate_dataset(
        root,
        class_ids=["cup_mat", "ruler", "tape"],
        visual_per_class=4,
        tactile_per_class=2,
        seed=77,
        density=40000.0,
    )
    return manifest
