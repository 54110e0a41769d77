import json

import numpy as np
import pytest

from tileseek.errors import DimensionMismatchError, NonFiniteVectorError, RegistryError
from tileseek.models import ModelInfo, Registry, default_registry, supports, validate_vector


class TestDefaultRegistry:
    def test_exactly_four_entries_in_stable_order(self):
        reg = default_registry()
        assert [m.id for m in reg] == ["dinov2", "farslip", "satclip", "siglip"]

    def test_dinov2(self):
        m = Registry.default().get("dinov2")
        assert (m.arch_label, m.dim, m.dtype) == ("ViT-L/14", 1024, "float32")
        assert m.modalities == {"image"}
        assert (m.input_size_px, m.input_bands) == (224, "rgb")

    def test_farslip(self):
        m = Registry.default().get("farslip")
        assert (m.arch_label, m.dim, m.dtype) == ("ViT-B/16", 512, "float16")
        assert m.modalities == {"text", "image"}
        assert (m.input_size_px, m.input_bands) == (224, "rgb")

    def test_siglip(self):
        m = Registry.default().get("siglip")
        assert (m.arch_label, m.dim, m.dtype) == ("ViT-SO400M", 1152, "float16")
        assert m.modalities == {"text", "image"}
        assert (m.input_size_px, m.input_bands) == (384, "rgb")

    def test_satclip(self):
        m = Registry.default().get("satclip")
        assert (m.arch_label, m.dim, m.dtype) == ("ViT16-L40", 256, "float16")
        assert m.modalities == {"location", "image"}
        assert (m.input_size_px, m.input_bands) == (224, "multispectral")

    def test_every_default_supports_image_queries(self):
        assert all(supports(m, "image") for m in default_registry())

    def test_ids_unique_and_lookup_total(self):
        reg = Registry.default()
        for model_id in ["dinov2", "farslip", "satclip", "siglip"]:
            assert reg.get(model_id).id == model_id

    def test_unknown_model_rejected(self):
        with pytest.raises(RegistryError):
            Registry.default().get("clip")


class TestSupports:
    @pytest.mark.parametrize(
        "model_id,modality,expected",
        [
            ("dinov2", "text", False),
            ("dinov2", "image", True),
            ("farslip", "image", True),
            ("farslip", "text", True),
            ("satclip", "location", True),
            ("satclip", "text", False),
            ("siglip", "location", False),
        ],
    )
    def test_capability_matrix(self, model_id, modality, expected):
        assert supports(Registry.default().get(model_id), modality) is expected


class TestValidateVector:
    def test_accepts_correct_length_finite(self):
        m = Registry.default().get("farslip")
        v = np.ones(512, dtype=np.float32)
        assert validate_vector(m, v) is v

    def test_dimension_mismatch_reports_expected_and_actual(self):
        m = Registry.default().get("farslip")
        with pytest.raises(DimensionMismatchError) as err:
            validate_vector(m, np.ones(511, dtype=np.float32))
        assert err.value.expected == 512
        assert err.value.actual == 511

    def test_nan_reported_at_its_index(self):
        m = Registry.default().get("dinov2")
        v = np.ones(1024, dtype=np.float32)
        v[700] = np.nan
        with pytest.raises(NonFiniteVectorError) as err:
            validate_vector(m, v)
        assert err.value.index == 700

    def test_infinity_is_non_finite(self):
        m = Registry.default().get("satclip")
        v = np.ones(256, dtype=np.float16)
        v[3] = np.inf
        with pytest.raises(NonFiniteVectorError):
            validate_vector(m, v)


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "registry.json"
        Registry.default().to_manifest(path)
        loaded = Registry.from_manifest(path)
        assert [m.to_dict() for m in loaded] == [m.to_dict() for m in Registry.default()]

    def test_field_names_as_documented(self, tmp_path):
        path = tmp_path / "registry.json"
        Registry.default().to_manifest(path)
        entry = json.loads(path.read_text())[0]
        assert set(entry) == {
            "id", "arch_label", "dim", "dtype", "modalities", "input_size_px", "input_bands",
        }

    def test_custom_single_model_manifest(self, tmp_path):
        path = tmp_path / "one.json"
        path.write_text(json.dumps([{
            "id": "toy", "arch_label": "MLP", "dim": 8, "dtype": "float32",
            "modalities": ["image"], "input_size_px": 32, "input_bands": "rgb",
        }]))
        reg = Registry.from_manifest(path)
        assert len(reg) == 1 and reg.get("toy").dim == 8

    def test_duplicate_ids_rejected(self):
        entry = default_registry()[0]
        with pytest.raises(RegistryError):
            Registry([entry, entry])

    @pytest.mark.parametrize(
        "patch",
        [
            {"dim": 0},
            {"dim": -5},
            {"dtype": "float64"},
            {"modalities": []},
            {"modalities": ["audio"]},
            {"input_bands": "sar"},
            {"input_size_px": 0},
        ],
    )
    def test_invalid_entries_rejected(self, patch):
        base = default_registry()[0].to_dict()
        base.update(patch)
        with pytest.raises(RegistryError):
            ModelInfo.from_dict(base)

    def test_missing_field_named_in_error(self, tmp_path):
        base = default_registry()[0].to_dict()
        del base["dtype"]
        with pytest.raises(RegistryError, match="dtype"):
            ModelInfo.from_dict(base)
