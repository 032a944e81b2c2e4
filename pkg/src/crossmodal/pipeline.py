"""Training and recognition pipelines plus the synthetic benchmark harness.

Two training procedures are provided: plain cross-modal training (labeled
visual clouds only) and its transfer-learning variant (adds unlabeled tactile
clouds for the unsupervised adaptation step). Recognition runs the frozen
chain equalize -> shot -> esf -> fused descriptor -> classify against the
stored model. The benchmark trains on all visual examples of a manifest,
tests on all tactile examples, and writes CSV tables, confusion matrices,
and figures.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from pathlib import Path

import numpy as np
import yaml

from . import cloudio, report
from .adapt import FeatureSet, GfkModel, PcaTransfer, gfk_fit, pca_transfer
from .classify import (
    CvResult,
    KernelSpec,
    KnnModel,
    MetricSpec,
    SvmModel,
    evaluate,
    fit_knn,
    kfold_cv,
    predict_batch,
    svm_train,
)
from .cloud import EqualizationParams, PointCloud, equalize
from .descriptors import (
    CLUE,
    CONCAT,
    ESF,
    SHOT,
    compute_clue,
    compute_esf,
    compute_shot,
    concat_descriptor,
    estimate_normals,
)
from .errors import CrossModalError, EmptyCloud, MissingTargetData, SingleClass

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class DescriptorSpec:
    kind: str = CLUE
    esf_samples: int = 20000
    esf_seed: int = 0
    normals_k: int = 10

    def __post_init__(self):
        if self.kind not in (ESF, SHOT, CONCAT, CLUE):
            raise ValueError(f"unknown descriptor kind {self.kind!r}")


@dataclasses.dataclass(frozen=True)
class ClassifierSpec:
    algorithm: str = "knn"  # knn | svm
    k: int = 5
    kernel: str = "rbf"     # linear | rbf (gfk_* substituted under gfk adaptation)
    c: float = 10.0
    gamma: float | None = None
    tol: float = 1e-3

    def __post_init__(self):
        if self.algorithm not in ("knn", "svm"):
            raise ValueError(f"unknown classifier {self.algorithm!r}")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    equalization: EqualizationParams = EqualizationParams()
    preprocessing: bool = True
    descriptor: DescriptorSpec = DescriptorSpec()
    adaptation: str = "none"  # none | pca | gfk
    subspace_dim: int = 27
    standardize: bool = False
    classifier: ClassifierSpec = ClassifierSpec()
    seed: int = 0

    def __post_init__(self):
        if self.adaptation not in ("none", "pca", "gfk"):
            raise ValueError(f"unknown adaptation {self.adaptation!r}")


def config_to_dict(config: PipelineConfig) -> dict:
    return {
        "equalization": dataclasses.asdict(config.equalization),
        "preprocessing": config.preprocessing,
        "descriptor": dataclasses.asdict(config.descriptor),
        "adaptation": config.adaptation,
        "subspace_dim": config.subspace_dim,
        "standardize": config.standardize,
        "classifier": dataclasses.asdict(config.classifier),
        "seed": config.seed,
    }


def config_from_dict(doc: dict) -> PipelineConfig:
    doc = dict(doc or {})
    return PipelineConfig(
        equalization=EqualizationParams(**doc.get("equalization", {})),
        preprocessing=bool(doc.get("preprocessing", True)),
        descriptor=DescriptorSpec(**doc.get("descriptor", {})),
        adaptation=doc.get("adaptation", "none"),
        subspace_dim=int(doc.get("subspace_dim", 27)),
        standardize=bool(doc.get("standardize", False)),
        classifier=ClassifierSpec(**doc.get("classifier", {})),
        seed=int(doc.get("seed", 0)),
    )


def load_config(path) -> PipelineConfig:
    with open(path, "r") as handle:
        return config_from_dict(yaml.safe_load(handle))


@dataclasses.dataclass
class PreprocessSpec:
    """Everything recognize() must replay on a query cloud."""

    equalization: EqualizationParams | None
    descriptor: DescriptorSpec
    standardize: tuple | None = None  # (mean, std)
    projection: tuple | None = None   # (mean, basis) from the pca baseline


def descriptor_vector(cloud: PointCloud, spec: DescriptorSpec) -> np.ndarray:
    """Compute one descriptor vector of the configured kind."""
    if spec.kind == ESF:
        return compute_esf(cloud, spec.esf_samples, spec.esf_seed).values
    k = min(spec.normals_k, len(cloud) - 1)
    normals = estimate_normals(cloud, k)
    d_shot = compute_shot(cloud, normals)
    if spec.kind == SHOT:
        return d_shot.values
    d_esf = compute_esf(cloud, spec.esf_samples, spec.esf_seed)
    if spec.kind == CONCAT:
        return concat_descriptor(d_shot, d_esf).values
    return compute_clue(d_shot, d_esf).values


def _descriptor_matrix(clouds, spec: DescriptorSpec) -> np.ndarray:
    return np.vstack([descriptor_vector(c, spec) for c in clouds])


def _prepare_clouds(clouds, config: PipelineConfig):
    if not config.preprocessing:
        return list(clouds)
    return [equalize(c, config.equalization) for c in clouds]


def _train_classifier(features, labels, config, metric=None, kernel_model=None):
    spec = config.classifier
    if spec.algorithm == "knn":
        data = FeatureSet(features, "source", list(labels))
        return fit_knn(data, spec.k, metric or MetricSpec())
    kind = spec.kernel
    if kernel_model is not None:
        kind = {"linear": "gfk_linear", "rbf": "gfk_rbf"}[kind]
    kernel = KernelSpec(kind, spec.gamma, kernel_model)
    return svm_train(FeatureSet(features, "source", list(labels)), kernel, spec.c, spec.tol)


def cmr_train(clouds, labels, config: PipelineConfig):
    """Train from labeled visual clouds only: equalize, describe, fit."""
    labels = list(labels)
    if len(set(labels)) < 2:
        raise SingleClass("training requires at least two classes")
    prepped = _prepare_clouds(clouds, config)
    features = _descriptor_matrix(prepped, config.descriptor)
    prep = PreprocessSpec(
        config.equalization if config.preprocessing else None, config.descriptor
    )
    if config.standardize:
        mean = features.mean(axis=0)
        std = np.maximum(features.std(axis=0), 1e-12)
        features = (features - mean) / std
        prep.standardize = (mean, std)
    model = _train_classifier(features, labels, config)
    model.preprocessing = prep
    return model


def tlcmr_train(source_clouds, source_labels, target_clouds, config: PipelineConfig):
    """Training with unsupervised adaptation on unlabeled target clouds.

    Target labels, when present on the clouds, are ignored (a warning is
    logged); only the target geometry feeds the adaptation step.
    """
    if not target_clouds:
        raise MissingTargetData("adaptation training requires target clouds")
    if config.adaptation == "none":
        raise ValueError("tlcmr_train requires adaptation 'pca' or 'gfk'")
    labels = list(source_labels)
    if len(set(labels)) < 2:
        raise SingleClass("training requires at least two classes")
    if any(c.label is not None for c in target_clouds):
        logger.warning(
            "target clouds carry labels; they are ignored for adaptation/training"
        )

    prepped_src = _prepare_clouds(source_clouds, config)
    prepped_tgt = _prepare_clouds(target_clouds, config)
    feats_src = _descriptor_matrix(prepped_src, config.descriptor)
    feats_tgt = _descriptor_matrix(prepped_tgt, config.descriptor)

    prep = PreprocessSpec(
        config.equalization if config.preprocessing else None, config.descriptor
    )
    if config.standardize:
        union = np.vstack([feats_src, feats_tgt])
        mean = union.mean(axis=0)
        std = np.maximum(union.std(axis=0), 1e-12)
        feats_src = (feats_src - mean) / std
        feats_tgt = (feats_tgt - mean) / std
        prep.standardize = (mean, std)

    source_set = FeatureSet(feats_src, "source", labels)
    target_set = FeatureSet(feats_tgt, "target")
    if config.adaptation == "gfk":
        gfk = gfk_fit(source_set, target_set, config.subspace_dim)
        if config.classifier.algorithm == "knn":
            model = _train_classifier(feats_src, labels, config, metric=MetricSpec("gfk", gfk))
        else:
            model = _train_classifier(feats_src, labels, config, kernel_model=gfk)
    else:
        transfer = pca_transfer(source_set, target_set, config.subspace_dim)
        prep.projection = (transfer.mean, transfer.basis)
        model = _train_classifier(transfer.source.vectors, labels, config)
    model.preprocessing = prep
    return model


def _query_vector(model, cloud: PointCloud) -> np.ndarray:
    prep: PreprocessSpec = model.preprocessing
    if prep.equalization is not None:
        cloud = equalize(cloud, prep.equalization)
    vec = descriptor_vector(cloud, prep.descriptor)
    if prep.standardize is not None:
        mean, std = prep.standardize
        vec = (vec - mean) / std
    if prep.projection is not None:
        mean, basis = prep.projection
        vec = (vec - mean) @ basis
    return vec


def recognize(model, cloud: PointCloud):
    """Classify one cloud through the model's recorded preprocessing chain."""
    if len(cloud) == 0:
        raise EmptyCloud("cannot recognize an empty cloud")
    if getattr(model, "preprocessing", None) is None:
        raise CrossModalError("model carries no preprocessing record")
    return model.predict(_query_vector(model, cloud))


def load_labeled_clouds(manifest: cloudio.DatasetManifest, modality: str):
    """Clouds and labels for one modality of a manifest (labels from the manifest)."""
    clouds = []
    labels = []
    for path, label in manifest.labeled_files(modality):
        clouds.append(cloudio.read_cloud(path))
        labels.append(label)
    return clouds, labels


def cmr_train_files(manifest: cloudio.DatasetManifest, config: PipelineConfig):
    """cmr_train from a manifest; touches visual files only."""
    clouds, labels = load_labeled_clouds(manifest, "visual")
    return cmr_train(clouds, labels, config)


def tlcmr_train_files(manifest: cloudio.DatasetManifest, config: PipelineConfig):
    """tlcmr_train from a manifest; target files are read, target labels unused."""
    clouds, labels = load_labeled_clouds(manifest, "visual")
    target = [cloudio.read_cloud(p) for p in manifest.files("tactile")]
    return tlcmr_train(clouds, labels, target, config)


# --------------------------------------------------------------------------
# synthetic dataset generation


def generate_dataset(
    out_dir,
    class_ids=None,
    visual_per_class: int = 40,
    tactile_per_class: int = 5,
    seed: int = 123,
    density: float = 60000.0,
    visual_noise: float = 0.001,
    sensor=None,
    grid_pitch: float = 0.025,
) -> cloudio.DatasetManifest:
    """Write a synthetic cloud corpus plus its manifest; fully seeded.

    The default shape mirrors the benchmark corpus: 15 classes with 40 visual
    and 5 tactile clouds each. Visual examples split 20/20 across two fixed
    observation poses per class.
    """
    from .synth import CLASS_IDS, SensorSpec, grid_covering, make_object, sample_tactile, sample_visual

    out_dir = Path(out_dir)
    sensor = sensor or SensorSpec()
    class_ids = list(class_ids) if class_ids is not None else list(CLASS_IDS)

    classes = []
    for ci, cid in enumerate(class_ids):
        pose_rng = np.random.default_rng([seed, ci, 7])
        pose_b = (
            float(pose_rng.uniform(np.pi / 3, 2 * np.pi / 3)),
            float(pose_rng.uniform(-0.01, 0.01)),
            float(pose_rng.uniform(-0.01, 0.01)),
        )
        visual_files = []
        for i in range(visual_per_class):
            vseed = seed * 1_000_000 + ci * 10_000 + i
            obj = make_object(cid, vseed)
            pose = None if i < visual_per_class // 2 else pose_b
            cloud = sample_visual(obj, pose, density, visual_noise, seed=vseed + 1)
            rel = f"clouds/{cid}/v{i:03d}.xyz"
            cloudio.write_cloud(out_dir / rel, cloud)
            visual_files.append(rel)
        tactile_files = []
        for i in range(tactile_per_class):
            tseed = seed * 1_000_000 + ci * 10_000 + 5000 + i
            obj = make_object(cid, tseed)
            grid = grid_covering(obj.bounds(), grid_pitch, margin=sensor.array_edge / 2)
            cloud = sample_tactile(obj, sensor, grid, seed=tseed + 1)
            rel = f"clouds/{cid}/t{i:03d}.xyz"
            cloudio.write_cloud(out_dir / rel, cloud)
            tactile_files.append(rel)
        classes.append(cloudio.ManifestClass(cid, visual_files, tactile_files))

    manifest = cloudio.DatasetManifest(
        classes=classes,
        seed=seed,
        generation={
            "visual_per_class": visual_per_class,
            "tactile_per_class": tactile_per_class,
            "visual_pose_split": f"{visual_per_class // 2}/{visual_per_class - visual_per_class // 2}",
            "density": density,
            "visual_noise": visual_noise,
            "grid_pitch": grid_pitch,
            "sensor": dataclasses.asdict(sensor),
        },
        root=out_dir,
    )
    cloudio.write_manifest(out_dir / "manifest.yaml", manifest)
    return manifest


# --------------------------------------------------------------------------
# benchmark


@dataclasses.dataclass(frozen=True)
class BenchmarkJob:
    config_id: str
    mode: str  # cross | mono
    config: PipelineConfig


BENCHMARK_EQUALIZATION = EqualizationParams(
    upsample_step=0.003, search_radius=0.02, poly_degree=2, voxel_edge=0.005
)


def default_benchmark_grid(seed: int = 0, esf_samples: int = 10000, subspace_dim: int = 27) -> list:
    """The standard comparison grid.

    Arm `cross`: preprocessing on/off x four descriptors x {1/3/5-NN, RBF SVM}
    without adaptation, then preprocessing-on x {shot, esf, clue} x
    {pca, gfk} x {1/3-NN, linear SVM, RBF SVM}. Arm `mono`: 10-fold CV within
    the visual modality for {shot, esf, clue} x {1/3-NN}.
    """
    knn = lambda k: ClassifierSpec("knn", k=k)
    svm = lambda kernel: ClassifierSpec("svm", kernel=kernel)
    classifiers_cmr = [("1-nn", knn(1)), ("3-nn", knn(3)), ("5-nn", knn(5)), ("svm-rbf", svm("rbf"))]
    classifiers_tl = [("1-nn", knn(1)), ("3-nn", knn(3)), ("svm-linear", svm("linear")), ("svm-rbf", svm("rbf"))]

    jobs = []

    def add(mode, prep, kind, adaptation, clf_id, clf):
        prep_id = "prep-on" if prep else "prep-off"
        suffix = "-cv10" if mode == "mono" else ""
        config = PipelineConfig(
            equalization=BENCHMARK_EQUALIZATION,
            preprocessing=prep,
            descriptor=DescriptorSpec(kind, esf_samples=esf_samples, esf_seed=seed),
            adaptation=adaptation,
            subspace_dim=subspace_dim,
            classifier=clf,
            seed=seed,
        )
        jobs.append(BenchmarkJob(f"{mode}_{prep_id}_{kind}_{adaptation}_{clf_id}{suffix}", mode, config))

    for prep in (True, False):
        for kind in (SHOT, ESF, CONCAT, CLUE):
            for clf_id, clf in classifiers_cmr:
                add("cross", prep, kind, "none", clf_id, clf)
    for kind in (SHOT, ESF, CLUE):
        for adaptation in ("pca", "gfk"):
            for clf_id, clf in classifiers_tl:
                add("cross", True, kind, adaptation, clf_id, clf)
    for kind in (SHOT, ESF, CLUE):
        for clf_id, clf in [("1-nn", knn(1)), ("3-nn", knn(3))]:
            add("mono", True, kind, "none", clf_id, clf)
    return jobs


class _FeatureCache:
    """Equalizes clouds and computes descriptor matrices once per arm."""

    def __init__(self, visual_clouds, tactile_clouds):
        self._raw = {"visual": list(visual_clouds), "tactile": list(tactile_clouds)}
        self._equalized: dict = {}
        self._features: dict = {}

    def _clouds(self, modality, prep, equalization):
        if not prep:
            return self._raw[modality]
        key = (modality, equalization)
        if key not in self._equalized:
            self._equalized[key] = [equalize(c, equalization) for c in self._raw[modality]]
        return self._equalized[key]

    def features(self, modality: str, config: PipelineConfig) -> np.ndarray:
        key = (
            modality,
            config.preprocessing,
            config.equalization if config.preprocessing else None,
            config.descriptor,
        )
        if key not in self._features:
            clouds = self._clouds(modality, config.preprocessing, config.equalization)
            self._features[key] = _descriptor_matrix(clouds, config.descriptor)
        return self._features[key]


@dataclasses.dataclass
class BenchmarkReport:
    rows: list
    confusions: dict
    out_dir: Path
    seed: int

    def row(self, config_id: str):
        for row in self.rows:
            if row.config_id == config_id:
                return row
        raise KeyError(config_id)

    def accuracy(self, config_id: str) -> float:
        return self.row(config_id).accuracy


def _flush(out_dir, rows, confusions, jobs, manifest, seed):
    report.write_results_csv(out_dir / "results.csv", rows)
    for config_id, confusion in confusions.items():
        report.write_confusion_csv(out_dir / f"confusion_{config_id}.csv", confusion)
    grid_doc = {
        "seed": seed,
        "manifest": str(manifest.root / "manifest.yaml"),
        "jobs": [
            {"config_id": j.config_id, "mode": j.mode, "config": config_to_dict(j.config)}
            for j in jobs
        ],
    }
    (out_dir / "config_grid.yaml").write_text(yaml.safe_dump(grid_doc, sort_keys=False))


def run_benchmark(
    manifest: cloudio.DatasetManifest,
    out_dir,
    grid=None,
    seed: int = 0,
    figures: bool = True,
) -> BenchmarkReport:
    """Train on all visual clouds, test on all tactile clouds, per config.

    Mono-modality jobs run a stratified 10-fold cross-validation within the
    visual descriptors instead. Results flush to disk after every job so a
    failing configuration never loses the completed ones. Deterministic for
    identical (manifest, grid, seed); the `seconds` column (classification
    wall-clock) is the one exception.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = list(grid) if grid is not None else default_benchmark_grid(seed=seed)

    visual_clouds, visual_labels = load_labeled_clouds(manifest, "visual")
    tactile_clouds, tactile_labels = load_labeled_clouds(manifest, "tactile")
    cache = _FeatureCache(visual_clouds, tactile_clouds)

    rows: list = []
    confusions: dict = {}
    for job in jobs:
        config = job.config
        try:
            feats_v = cache.features("visual", config)
            if job.mode == "mono":
                data = FeatureSet(feats_v, "source", list(visual_labels))
                trainer = lambda fs: _train_classifier(fs.vectors, fs.labels, config)
                started = time.perf_counter()
                cv = kfold_cv(data, 10, trainer, seed=config.seed)
                elapsed = time.perf_counter() - started
                accuracy, confusion = cv.mean_accuracy, cv.confusion
            else:
                feats_t = cache.features("tactile", config)
                source_set = FeatureSet(feats_v, "source", list(visual_labels))
                if config.adaptation == "gfk":
                    gfk = gfk_fit(source_set, FeatureSet(feats_t, "target"), config.subspace_dim)
                    if config.classifier.algorithm == "knn":
                        model = _train_classifier(
                            feats_v, visual_labels, config, metric=MetricSpec("gfk", gfk)
                        )
                    else:
                        model = _train_classifier(feats_v, visual_labels, config, kernel_model=gfk)
                    queries = feats_t
                elif config.adaptation == "pca":
                    transfer = pca_transfer(
                        source_set, FeatureSet(feats_t, "target"), config.subspace_dim
                    )
                    model = _train_classifier(transfer.source.vectors, visual_labels, config)
                    queries = transfer.target.vectors
                else:
                    model = _train_classifier(feats_v, visual_labels, config)
                    queries = feats_t
                started = time.perf_counter()
                accuracy, confusion = evaluate(
                    model, FeatureSet(queries, "target", list(tactile_labels))
                )
                elapsed = time.perf_counter() - started
            rows.append(
                report.BenchRow(
                    job.config_id,
                    config.descriptor.kind,
                    config.adaptation,
                    job.config_id.rsplit("_", 1)[-1],
                    accuracy,
                    elapsed,
                )
            )
            confusions[job.config_id] = confusion
            logger.info("%s: accuracy %.4f (%.3fs)", job.config_id, accuracy, elapsed)
        except Exception as exc:  # keep going; partial results are still useful
            logger.exception("configuration %s failed", job.config_id)
            rows.append(
                report.BenchRow(
                    job.config_id,
                    config.descriptor.kind,
                    config.adaptation,
                    job.config_id.rsplit("_", 1)[-1],
                    float("nan"),
                    0.0,
                    error=str(exc),
                )
            )
        _flush(out_dir, rows, confusions, jobs, manifest, seed)

    report.write_summary(
        out_dir / "summary.txt",
        rows,
        {
            "classes": len(manifest.classes),
            "visual clouds": sum(len(c.visual) for c in manifest.classes),
            "tactile clouds": sum(len(c.tactile) for c in manifest.classes),
            "seed": seed,
        },
    )
    if figures:
        report.render_figures(out_dir, rows, confusions)
    return BenchmarkReport(rows, confusions, out_dir, seed)
