import pytest

from canopyflux.config import load_config
from canopyflux.errors import ConfigError

from conftest import minimal_config


class TestLoadConfig:
    def test_minimal_config_with_defaults(self, tmp_path):
        cfg = load_config(minimal_config(tmp_path / "site.cfg"))
        assert cfg.site_id == "siteA"
        assert cfg.plot_radius == 12.0
        assert cfg.buffer_radius == 12.0
        assert cfg.feature_set == "s2"
        assert cfg.granier_coefficient == 118.99e-6
        assert cfg.granier_exponent == 1.231
        assert cfg.window_days == 10
        assert cfg.min_hours_per_day == 20
        assert cfg.min_days_per_week == 4
        assert cfg.cv.k == 5
        assert cfg.cv.mtry_grid == (3, 6, 9)
        assert cfg.forest.n_trees == 40
        assert cfg.forest.min_node_size == 5
        assert cfg.forest.bootstrap is True
        assert cfg.paths["sapflow"] == tmp_path / "sapflow.csv"
        assert cfg.synth.site_id == "siteA"
        assert cfg.synth.seed == cfg.cv.seed == 7

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text("[site]\nsite_id = x\nplot_radiu_m = 12\n[allometry]\nalpha=1\nbeta=2\n")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "plot_radiu_m" in str(exc.value)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text("[site]\nsite_id = x\n[allometry]\nalpha=1\nbeta=2\n[granir]\nw=1\n")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "granir" in str(exc.value)

    def test_missing_required_key_rejected(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text("[site]\nsite_id = x\n")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "alpha" in str(exc.value)

    def test_out_of_range_value_rejected(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text(
            "[site]\nsite_id = x\nplot_radius_m = -3\n[allometry]\nalpha=1\nbeta=2\n"
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_feature_set_rejected(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text(
            "[site]\nsite_id = x\nfeature_set = landsat\n[allometry]\nalpha=1\nbeta=2\n"
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unparseable_number_names_key(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text("[site]\nsite_id = x\n[allometry]\nalpha=abc\nbeta=2\n")
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert "alpha" in str(exc.value)

    def test_seed_override(self, tmp_path):
        cfg = load_config(minimal_config(tmp_path / "site.cfg", seed=7), seed_override=99)
        assert cfg.cv.seed == 99
        assert cfg.forest.seed == 99
        assert cfg.synth.seed == 99

    def test_mtry_grid_auto(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text(
            "[site]\nsite_id = x\n[allometry]\nalpha=1\nbeta=2\n[cv]\nmtry_grid = auto\n"
        )
        cfg = load_config(path)
        assert cfg.cv.mtry_grid is None

    def test_planted_coefficients_parsed(self, tmp_path):
        path = tmp_path / "site.cfg"
        path.write_text(
            "[site]\nsite_id = x\n[allometry]\nalpha=1\nbeta=2\n"
            "[synth]\nplanted = B11:-0.1, B4:0.05\n"
        )
        cfg = load_config(path)
        assert cfg.synth.planted_coefficients == {"B11": -0.1, "B4": 0.05}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")
