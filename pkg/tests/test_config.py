from pathlib import Path

from pytest import approx, mark, raises

from kedro_speedmeter.config import (
    FIXTURES_PATH,
    ConfigError,
    RunConfig,
    deep_merge,
    read_yaml,
    resolve_config_path,
)
from kedro_speedmeter.lockacq import PlantConfig, ServoConfig
from kedro_speedmeter.model import PhaseConvention
from kedro_speedmeter.plugin import DEFAULT_CONFIG_FILES
from kedro_speedmeter.synth import AsdSegment


class TestFixtures:
    def test_table1(self, run_config):
        """The packaged infrared parameters are loaded"""
        assert run_config.main_cavity.loss_cav == approx(85e-6)
        assert run_config.pcc.loss_pcc_override == approx(0.03)
        assert run_config.pcc.phase_convention is PhaseConvention.ROUND_TRIP
        assert run_config.measurement_noise.rel_amplitude_sigma == approx(0.02)
        assert run_config.fit.anchor_band == (1.5e6, 2e6)
        assert run_config.series.segments == (AsdSegment(0.0, 128.0, 1.0),)

    def test_table2(self, run_config):
        """The packaged green and servo settings are loaded"""
        assert run_config.plant.gr_freq_offset0 is None
        assert run_config.plant == PlantConfig()
        assert run_config.servo == ServoConfig()
        assert run_config.lock.dt == approx(2e-4)

    def test_rates(self, run_config):
        """Derived rates come from the loaded parameters"""
        assert run_config.rates().f_c == approx(3.2e5, rel=0.01)


class TestFromMapping:
    def test_empty(self):
        """An empty document gives the defaults"""
        assert RunConfig.from_mapping({}) == RunConfig()
        assert RunConfig.from_mapping(None) == RunConfig()

    def test_unknown_section(self):
        """Unknown sections name themselves"""
        with raises(ConfigError, match="section `optics`"):
            RunConfig.from_mapping({"optics": {}})

    def test_unknown_key(self):
        """Unknown keys name themselves with their section"""
        with raises(ConfigError, match="`main_cavity.l_arm`"):
            RunConfig.from_mapping({"main_cavity": {"l_arm": 4.0}})

    def test_gr_finesse_is_given_directly(self):
        """The plant takes the GR finesse, not the GR mirror transmissivities"""
        with raises(ConfigError, match="`plant.t_itm_gr`"):
            RunConfig.from_mapping({"plant": {"t_itm_gr": 500e-6}})

    @mark.parametrize(
        "document, pattern",
        [
            (
                {"main_cavity": {"t_itm": "high"}},
                "`main_cavity.t_itm` must be a number",
            ),
            ({"grid": {"n_points": 2.5}}, "`grid.n_points` must be an integer"),
            ({"fit": {"joint": "yes"}}, "`fit.joint` must be true or false"),
            ({"fit": {"anchor_band": [1.0]}}, "`fit.anchor_band` must be a list of 2"),
            ({"grid": {"n_points": 1}}, "Invalid `grid` settings"),
            ({"main_cavity": []}, "`main_cavity` must be a mapping"),
        ],
    )
    def test_invalid(self, document, pattern):
        """Badly typed or inconsistent values are reported with their key"""
        with raises(ConfigError, match=pattern):
            RunConfig.from_mapping(document)

    def test_exponent_strings(self):
        """Exponents without a dot are read as numbers"""
        config = RunConfig.from_mapping({"main_cavity": {"loss_cav": "1e-4"}})
        assert config.main_cavity.loss_cav == approx(1e-4)

    def test_integer_for_float(self):
        """Integers are accepted where floats are expected"""
        config = RunConfig.from_mapping({"main_cavity": {"l_cav": 1}})
        assert isinstance(config.main_cavity.l_cav, float)

    def test_measurement_seed_rejected(self):
        """Seeds live in their own section"""
        with raises(ConfigError, match="measurement_noise.seed"):
            RunConfig.from_mapping({"measurement_noise": {"seed": 1}})

    def test_servo_partial(self):
        """A partial loop section keeps the defaults of that loop"""
        config = RunConfig.from_mapping({"servo": {"main": {"gain": 10.0}}})
        assert config.servo.main.gain == 10.0
        assert config.servo.main.capture_range == ServoConfig().main.capture_range
        assert config.servo.ir == ServoConfig().ir

    def test_servo_unknown_loop(self):
        """Only the configured loops exist"""
        with raises(ConfigError, match="`servo.pll`"):
            RunConfig.from_mapping({"servo": {"pll": {}}})

    def test_series_segments(self):
        """Segments are built from a list of mappings"""
        config = RunConfig.from_mapping(
            {
                "series": {
                    "segments": [
                        {"f_lo": 0.0, "f_hi": 1.0, "asd": 2.0},
                        {"f_lo": 1.0, "f_hi": 128.0, "asd": 2.0, "exponent": -1.0},
                    ]
                }
            }
        )
        assert config.series.segments[1] == AsdSegment(1.0, 128.0, 2.0, -1.0)
        assert config.series.duration == 512.0

    def test_series_empty_segments(self):
        """A series needs at least one segment"""
        with raises(ConfigError, match="non-empty list"):
            RunConfig.from_mapping({"series": {"segments": []}})

    def test_optional_tuple(self):
        """Optional bands accept null and lists"""
        config = RunConfig.from_mapping({"fit": {"fit_band": [1e4, 1e6]}})
        assert config.fit.fit_band == (1e4, 1e6)
        assert RunConfig.from_mapping({"fit": {"fit_band": None}}).fit.fit_band is None


class TestLoad:
    def test_merge_order(self, write_config):
        """Later files override earlier ones key by key"""
        override = write_config({"main_cavity": {"loss_cav": 100e-6}})
        config = RunConfig.load(list(DEFAULT_CONFIG_FILES) + [override])
        assert config.main_cavity.loss_cav == approx(100e-6)
        assert config.main_cavity.l_cav == approx(0.15)

    def test_missing_file(self, tmp_path):
        """Unreadable files are configuration errors"""
        with raises(ConfigError, match="Cannot read configuration"):
            RunConfig.load([tmp_path / "missing.yml"])

    def test_invalid_yaml(self, tmp_path):
        """Unparsable files are configuration errors"""
        path = tmp_path / "broken.yml"
        path.write_text("main_cavity: [unclosed\n")
        with raises(ConfigError, match="Cannot parse configuration"):
            read_yaml(path)

    def test_empty_file(self, tmp_path):
        """An empty file is an empty document"""
        path = tmp_path / "empty.yml"
        path.write_text("")
        assert read_yaml(path) == {}

    def test_not_a_mapping(self, tmp_path):
        """A document must be a mapping"""
        path = tmp_path / "list.yml"
        path.write_text("- 1\n- 2\n")
        with raises(ConfigError, match="must be a mapping"):
            read_yaml(path)


class TestHelpers:
    def test_seed_override(self, run_config):
        """A single seed replaces every seed"""
        seeded = run_config.with_seed(7)
        assert (seeded.seeds.synth, seeded.seeds.lock, seeded.seeds.series) == (7, 7, 7)
        assert run_config.with_seed(None) is run_config
        assert seeded.noise_model().seed == 7

    def test_resolve_fixture_name(self):
        """Bare fixture names resolve to the packaged files"""
        assert resolve_config_path("table1") == FIXTURES_PATH / "table1.yml"
        assert resolve_config_path("elsewhere.yml") == Path("elsewhere.yml")

    def test_deep_merge(self):
        """Nested mappings merge, other values are replaced"""
        merged = deep_merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}, "b": [1]})
        assert merged == {"a": {"x": 1, "y": 3}, "b": [1]}
