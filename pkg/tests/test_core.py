"""
NucleiGrind — Unit tests for core functionality.
Run with: python -m pytest tests/ -v
"""
import json
import os

import numpy as np
import pytest

# Add project root to path for imports
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from content.models import (
    BACKGROUND_NORM_GLOBAL_MAX,
    ConvWeights,
    EncodingConfig,
    FixtureSpec,
    LossConfig,
    MetricsReport,
    Match,
    PostprocConfig,
    ShapeFamily,
)
from engine import fileio
from engine.config import Settings, _atomic_write_json, _deep_merge, _default_config, write_json_report
from engine.errors import ConfigError, DimensionMismatch, FormatError, NucleiGridError
from engine.validator import (
    as_binary_mask,
    as_label_map,
    as_scalar_field,
    as_semantic_mask,
    check_same_grid,
    instance_ids,
)


class TestValidator:
    """Tests for engine/validator.py"""

    def test_label_map_accepts_integral_floats(self):
        """Float arrays holding whole numbers become int64 label maps"""
        labels = as_label_map(np.array([[0.0, 1.0], [2.0, 0.0]]))
        assert labels.dtype == np.int64
        assert labels.tolist() == [[0, 1], [2, 0]]

    def test_label_map_accepts_bool(self):
        """Boolean masks are valid single-instance label maps"""
        assert as_label_map(np.eye(2, dtype=bool)).tolist() == [[1, 0], [0, 1]]

    def test_label_map_rejects_fractions(self):
        """Non-integral values are a format error"""
        with pytest.raises(FormatError):
            as_label_map(np.array([[0.5]]))

    def test_label_map_rejects_negative(self):
        """Negative ids are rejected"""
        with pytest.raises(FormatError):
            as_label_map(np.array([[-1, 0]]))

    def test_label_map_rejects_wrong_rank(self):
        """A label map is strictly 2-D"""
        with pytest.raises(DimensionMismatch):
            as_label_map(np.zeros((2, 2, 1), dtype=int))

    def test_binary_mask_values(self):
        """Only 0/1 may be turned into a mask"""
        assert as_binary_mask([[0, 1]]).dtype == bool
        with pytest.raises(FormatError):
            as_binary_mask([[0, 2]])

    def test_semantic_mask_range(self):
        """Semantic masks hold background, inside and contour only"""
        as_semantic_mask([[0, 1, 2]])
        with pytest.raises(FormatError):
            as_semantic_mask([[3]])

    def test_scalar_field_promotes_2d(self):
        """A 2-D field gains a single channel axis"""
        assert as_scalar_field(np.zeros((3, 4))).shape == (3, 4, 1)

    def test_scalar_field_rejects_nan(self):
        """Non-finite values are rejected"""
        with pytest.raises(FormatError):
            as_scalar_field(np.array([[np.nan]]))

    def test_scalar_field_channel_check(self):
        """A channel count can be enforced"""
        with pytest.raises(DimensionMismatch):
            as_scalar_field(np.zeros((2, 2, 2)), channels=1)

    def test_check_same_grid(self):
        """Grids must agree on H×W, channels may differ"""
        assert check_same_grid(np.zeros((2, 3)), np.zeros((2, 3, 5))) == (2, 3)
        with pytest.raises(DimensionMismatch):
            check_same_grid(np.zeros((2, 3)), np.zeros((3, 2)), names=["a", "b"])

    def test_instance_ids(self):
        """Present ids, sorted, without background"""
        assert instance_ids(np.array([[0, 5], [2, 5]])).tolist() == [2, 5]

    def test_errors_are_value_errors(self):
        """Every domain error is a ValueError"""
        assert issubclass(DimensionMismatch, NucleiGridError)
        assert issubclass(NucleiGridError, ValueError)


class TestModels:
    """Tests for content/models.py"""

    def test_postproc_threshold_order(self):
        """t_n must be strictly below t_p"""
        with pytest.raises(ConfigError):
            PostprocConfig(t_p=0.05, t_n=0.05)

    def test_postproc_connectivity(self):
        """Only 4- and 8-connectivity exist"""
        with pytest.raises(ConfigError):
            PostprocConfig(connectivity=6)

    def test_encoding_config_validation(self):
        """K >= 2 and a positive cap (or global-max)"""
        assert EncodingConfig().uses_global_max
        assert not EncodingConfig(background_norm_cap=16.0).uses_global_max
        with pytest.raises(ConfigError):
            EncodingConfig(dir_class_count=1)
        with pytest.raises(ConfigError):
            EncodingConfig(background_norm_cap=0)
        with pytest.raises(ConfigError):
            EncodingConfig(background_norm_cap="local-max")

    def test_loss_config_sorts_blocks(self):
        """Scale blocks are deduplicated and sorted"""
        assert LossConfig(scale_blocks=(4, 2, 4)).scale_blocks == (2, 4)
        with pytest.raises(ConfigError):
            LossConfig(epsilon_dice=0)

    def test_fixture_spec_coerces_shape(self):
        """Shape names become ShapeFamily members"""
        assert FixtureSpec(shape="ellipse").shape is ShapeFamily.ELLIPSE
        with pytest.raises(ConfigError):
            FixtureSpec(radius_min=5, radius_max=3)

    def test_conv_weights_shapes(self):
        """Kernel must be square 1×1 or 3×3 with a matching bias"""
        w = ConvWeights.identity(3)
        assert (w.kernel_size, w.in_channels, w.out_channels) == (1, 3, 3)
        with pytest.raises(DimensionMismatch):
            ConvWeights(np.zeros((2, 2, 1, 1)), np.zeros(1))
        with pytest.raises(DimensionMismatch):
            ConvWeights(np.zeros((1, 1, 1, 2)), np.zeros(3))

    def test_metrics_report_json_keys(self):
        """The JSON report carries exactly the documented keys"""
        report = MetricsReport(1.0, 1.0, 0.0, 1.0, [Match(1, 2, 0.75)], dq=1.0, sq=0.75)
        data = report.to_json()
        assert set(data) == {"dice", "aji", "hausdorff", "pq", "matches"}
        assert data["matches"] == [[1, 2, 0.75]]


class TestConfig:
    """Tests for engine/config.py"""

    def test_default_config_structure(self):
        """Default config has every section"""
        defaults = _default_config()
        assert set(defaults) == {"encoding", "loss", "postproc", "fixtures"}
        assert defaults["postproc"]["t_p"] == 0.05
        assert defaults["postproc"]["t_n"] == -0.05
        assert defaults["encoding"]["background_norm_cap"] == BACKGROUND_NORM_GLOBAL_MAX

    def test_deep_merge_basic(self):
        """Test basic deep merge"""
        base = {"a": 1, "b": 2}
        override = {"b": 3, "c": 4}
        result = _deep_merge(base, override)
        assert result == {"a": 1, "b": 3, "c": 4}

    def test_deep_merge_nested(self):
        """Test nested dict merge"""
        base = {"a": {"x": 1, "y": 2}}
        override = {"a": {"y": 3, "z": 4}}
        result = _deep_merge(base, override)
        assert result == {"a": {"x": 1, "y": 3, "z": 4}}

    def test_settings_typed_sections(self):
        """Sections come back as validated dataclasses"""
        settings = Settings({"loss": {"lambda1": 0.5, "scale_blocks": [3, 2]}})
        assert settings.loss.lambda1 == 0.5
        assert settings.loss.scale_blocks == (2, 3)
        assert settings.postproc == PostprocConfig()

    def test_settings_load_file(self, tmp_path):
        """A JSON file is merged over the defaults"""
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"postproc": {"t_p": 0.1}}))
        settings = Settings.load(str(path))
        assert settings.postproc.t_p == 0.1
        assert settings.postproc.t_n == -0.05

    def test_settings_load_corrupt(self, tmp_path):
        """Corrupt JSON is a configuration error"""
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            Settings.load(str(path))

    def test_settings_load_non_object(self, tmp_path):
        """The top level must be an object"""
        path = tmp_path / "cfg.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            Settings.load(str(path))

    def test_settings_unknown_key(self):
        """Unknown keys inside a section are reported as config errors"""
        with pytest.raises(ConfigError):
            Settings({"postproc": {"t_q": 1}}).postproc

    def test_override_skips_none(self):
        """Flags that were not given leave the config alone"""
        settings = Settings()
        settings.override("postproc", t_p=None, t_n=-0.2)
        assert settings.postproc.t_p == 0.05
        assert settings.postproc.t_n == -0.2

    def test_atomic_write(self, tmp_path):
        """Atomic write leaves exactly the target file behind"""
        path = tmp_path / "report.json"
        write_json_report(str(path), {"dice": 1.0})
        assert json.loads(path.read_text()) == {"dice": 1.0}
        assert [p.name for p in tmp_path.iterdir()] == ["report.json"]

    def test_atomic_write_cleans_up_on_error(self, tmp_path):
        """A failing dump removes its temp file"""
        path = tmp_path / "report.json"
        with pytest.raises(TypeError):
            _atomic_write_json(str(path), {"bad": object()})
        assert list(tmp_path.iterdir()) == []


class TestFileIO:
    """Tests for engine/fileio.py"""

    def test_pgm_header_and_layout(self):
        """P5, maxval 65535, big-endian 16-bit samples"""
        data = fileio.encode_pgm(np.array([[1, 256]]))
        assert data == b"P5\n2 1\n65535\n" + b"\x00\x01\x01\x00"

    def test_pgm_round_trip(self, tmp_path):
        """Write then read is lossless"""
        labels = np.arange(12).reshape(3, 4) * 5000
        path = tmp_path / "labels.pgm"
        fileio.write_pgm(str(path), labels)
        np.testing.assert_array_equal(fileio.read_pgm(str(path)), labels)
        assert fileio.sniff_format(str(path)) == "pgm"

    def test_pgm_reads_8bit_and_comments(self):
        """8-bit PGMs with header comments decode too"""
        data = b"P5\n# made by hand\n2 2\n255\n" + bytes([0, 1, 2, 3])
        assert fileio.decode_pgm(data).tolist() == [[0, 1], [2, 3]]

    def test_pgm_rejects_overflow(self):
        """Labels above 65535 do not fit"""
        with pytest.raises(FormatError):
            fileio.encode_pgm(np.array([[70000]]))

    def test_pgm_rejects_truncated(self):
        """Short rasters are rejected"""
        with pytest.raises(FormatError):
            fileio.decode_pgm(b"P5\n2 2\n65535\n\x00\x01")

    def test_pgm_rejects_ascii_variant(self):
        """Only binary P5 is supported"""
        with pytest.raises(FormatError):
            fileio.decode_pgm(b"P2\n1 1\n255\n0\n")

    def test_sef1_layout(self):
        """Header line then little-endian float32, channel-interleaved"""
        field = np.array([[[1.0, -2.0]]])
        data = fileio.encode_sef1(field)
        assert data.startswith(b"SEF1 1 1 2\n")
        assert data[len(b"SEF1 1 1 2\n"):] == np.array([1.0, -2.0], dtype="<f4").tobytes()

    def test_sef1_round_trip(self, tmp_path):
        """float32-representable fields survive a round trip exactly"""
        field = np.random.default_rng(0).normal(size=(4, 5, 2)).astype(np.float32).astype(np.float64)
        path = tmp_path / "field.sef"
        fileio.write_sef1(str(path), field)
        np.testing.assert_array_equal(fileio.read_sef1(str(path)), field)
        assert fileio.sniff_format(str(path)) == "sef1"

    def test_sef1_rejects_bad_length(self):
        """Payload size must match the header"""
        with pytest.raises(FormatError):
            fileio.decode_sef1(b"SEF1 1 1 1\n\x00\x00")

    def test_sniff_unknown(self, tmp_path):
        """Unknown magic is a format error"""
        path = tmp_path / "x.bin"
        path.write_bytes(b"GIF89a")
        with pytest.raises(FormatError):
            fileio.sniff_format(str(path))

    def test_read_artifact_checks_magic(self, tmp_path):
        """A SEF1 file handed in where a PGM is expected is a format error"""
        pgm, sef = tmp_path / "a.pgm", tmp_path / "a.sef"
        fileio.write_pgm(str(pgm), np.array([[0, 3]]))
        fileio.write_sef1(str(sef), np.zeros((1, 2, 1)))
        assert fileio.read_artifact(str(pgm), "pgm").tolist() == [[0, 3]]
        assert fileio.read_artifact(str(sef), "sef1").shape == (1, 2, 1)
        with pytest.raises(FormatError, match="expected PGM, found SEF1"):
            fileio.read_artifact(str(sef), "pgm")
        with pytest.raises(FormatError, match="expected SEF1, found PGM"):
            fileio.read_artifact(str(pgm), "sef1")
