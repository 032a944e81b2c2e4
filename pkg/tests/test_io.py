import numpy as np
import pytest

from crossmodal import cloudio
from crossmodal.cloud import PointCloud
from crossmodal.errors import CrossModalError


class TestCloudFormat:
    def test_roundtrip_with_headers(self, tmp_path):
        cloud = PointCloud(
            np.array([[0.001, -0.002, 0.0031], [1.5, 2.5, -3.5]]),
            "tactile",
            "wrench",
            np.array([0.0, 0.1, 0.5]),
        )
        path = tmp_path / "cloud.xyz"
        cloudio.write_cloud(path, cloud)
        back = cloudio.read_cloud(path)
        assert back.modality == "tactile"
        assert back.label == "wrench"
        assert np.allclose(back.sensor_origin, cloud.sensor_origin, atol=1e-9)
        assert np.allclose(back.points, cloud.points, atol=1e-9)

    def test_format_layout(self, tmp_path):
        cloud = PointCloud(np.array([[1.0, 2.0, 3.0]]), "visual")
        path = tmp_path / "cloud.xyz"
        cloudio.write_cloud(path, cloud)
        text = path.read_text()
        lines = text.split("\n")
        assert lines[0] == "#modality: visual"
        assert lines[1] == "1.000000000 2.000000000 3.000000000"
        assert text.endswith("\n")
        assert "\r" not in text

    def test_missing_modality_rejected(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 0\n")
        with pytest.raises(CrossModalError):
            cloudio.read_cloud(path)

    def test_optional_headers(self, tmp_path):
        path = tmp_path / "minimal.xyz"
        path.write_text("#modality: visual\n0.0 0.0 0.0\n")
        cloud = cloudio.read_cloud(path)
        assert cloud.label is None
        assert cloud.sensor_origin is None

    def test_empty_cloud_roundtrip(self, tmp_path):
        path = tmp_path / "empty.xyz"
        cloudio.write_cloud(path, PointCloud(np.empty((0, 3)), "visual"))
        assert len(cloudio.read_cloud(path)) == 0

    def test_deterministic_bytes(self, tmp_path):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(20, 3)), "visual", "x")
        cloudio.write_cloud(tmp_path / "a.xyz", cloud)
        cloudio.write_cloud(tmp_path / "b.xyz", cloud)
        assert (tmp_path / "a.xyz").read_bytes() == (tmp_path / "b.xyz").read_bytes()


class TestManifest:
    def _write_minimal(self, tmp_path, with_missing=False):
        cloud = PointCloud(np.zeros((1, 3)), "visual", "a")
        cloudio.write_cloud(tmp_path / "clouds/a/v000.xyz", cloud)
        tcloud = PointCloud(np.zeros((1, 3)), "tactile", "a")
        cloudio.write_cloud(tmp_path / "clouds/a/t000.xyz", tcloud)
        files = ["clouds/a/v000.xyz"]
        if with_missing:
            files.append("clouds/a/v999.xyz")
        manifest = cloudio.DatasetManifest(
            classes=[cloudio.ManifestClass("a", files, ["clouds/a/t000.xyz"])],
            seed=7,
            generation={"density": 1000.0},
            root=tmp_path,
        )
        cloudio.write_manifest(tmp_path / "manifest.yaml", manifest)
        return tmp_path / "manifest.yaml"

    def test_roundtrip(self, tmp_path):
        path = self._write_minimal(tmp_path)
        manifest = cloudio.load_manifest(path)
        assert manifest.seed == 7
        assert manifest.generation["density"] == 1000.0
        assert manifest.classes[0].class_id == "a"
        assert len(manifest.files("visual")) == 1
        assert len(manifest.files("tactile")) == 1

    def test_missing_file_rejected(self, tmp_path):
        path = self._write_minimal(tmp_path, with_missing=True)
        with pytest.raises(CrossModalError):
            cloudio.load_manifest(path)

    def test_labeled_files(self, tmp_path):
        manifest = cloudio.load_manifest(self._write_minimal(tmp_path))
        pairs = manifest.labeled_files("visual")
        assert pairs[0][1] == "a"
        assert pairs[0][0].exists()


class TestModelPersistence:
    def test_roundtrip(self, tmp_path):
        from crossmodal.classify import KnnModel, MetricSpec

        model = KnnModel(np.eye(3), ["a", "b", "c"], 1, MetricSpec())
        path = tmp_path / "model.pkl"
        cloudio.save_model(path, model)
        back = cloudio.load_model(path)
        assert back.labels == ["a", "b", "c"]
        assert back.predict(np.array([1.0, 0, 0])) == "a"
