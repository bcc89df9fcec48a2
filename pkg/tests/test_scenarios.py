"""Scenario configs, perturbation construction, and the run pipeline."""

import copy
import json

import numpy as np
import pytest

from ll_lab import (ConfigError, Grid, HydroState, integrate, load_scenario,
                    run_scenario, scenario_from_dict, scenario_from_json,
                    write_report, x_norm)
from ll_lab.scenarios import (Perturbation, _monotonicity_defect, build_initial,
                              random_smooth_pair)

BASE = {
    "name": "tiny",
    "frame": "hydro",
    "solitons": {"params": [{"c": 0.5, "a": 0.0}], "min_separation": 10.0},
    "perturbation": {"kind": "none"},
    "grid": {"n": 512, "dx": 0.1},
    "integrator": {"dt": 0.001, "t_end": 1.0, "sample_stride": 250},
    "diagnostics": {"y0_list": [5.0], "window_half_width": 8.0},
}


def variant(**updates):
    data = copy.deepcopy(BASE)
    for dotted, value in updates.items():
        node = data
        parts = dotted.split("__")
        for part in parts[:-1]:
            node = node[part]
        if value is ...:
            del node[parts[-1]]
        else:
            node[parts[-1]] = value
    return data


class TestConfigParsing:
    def test_roundtrip_through_to_dict(self):
        cfg = scenario_from_dict(BASE)
        again = scenario_from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()

    def test_grid_defaults_to_centered(self):
        cfg = scenario_from_dict(BASE)
        assert cfg.grid.x_min == pytest.approx(-25.6)

    def test_json_error_reports_position(self):
        with pytest.raises(ConfigError, match="line 1"):
            scenario_from_json("{bad json]")

    @pytest.mark.parametrize("updates,needle", [
        ({"name": ...}, "config.name: missing required key"),
        ({"frame": "lab"}, "config.frame"),
        ({"bogus": 1}, "config.bogus: unknown key"),
        ({"solitons__params": []}, "solitons.params"),
        ({"solitons__params": [{"c": 1.5, "a": 0.0}]}, "params[0]"),
        ({"solitons__min_separation": -1.0}, "solitons"),
        ({"perturbation__kind": "sneeze"}, "perturbation.kind"),
        ({"perturbation__amplitude": 0.1}, "perturbation.amplitude"),
        ({"grid__n": 511}, "config.grid"),
        ({"grid__dx": "thin"}, "config.grid.dx: expected a number"),
        ({"integrator__dt": -0.001}, "config.integrator"),
        ({"integrator__sample_stride": 2.5}, "sample_stride: expected an integer"),
        ({"diagnostics__window_half_width": 0.0}, "window_half_width"),
        ({"diagnostics__b_path": "zigzag"}, "b_path"),
        ({"diagnostics__gammas": [0.1]}, "gammas"),
    ])
    def test_malformed_configs_name_the_field(self, updates, needle):
        with pytest.raises(ConfigError, match=None) as info:
            scenario_from_dict(variant(**updates))
        assert needle in str(info.value), f"wanted {needle!r} in {info.value}"

    def test_chi_index_bounds(self):
        data = variant(perturbation__kind="chi_direction",
                       perturbation__amplitude=0.01)
        data["perturbation"]["index"] = 3
        with pytest.raises(ConfigError, match="index"):
            scenario_from_dict(data)

    def test_between_bump_needs_two_solitons(self):
        data = variant(perturbation__kind="between_bump",
                       perturbation__amplitude=0.05)
        with pytest.raises(ConfigError, match="between_bump"):
            scenario_from_dict(data)

    def test_fixed_speed_gammas_interlace(self):
        data = variant(
            solitons__params=[{"c": -0.4, "a": -15.0}, {"c": 0.4, "a": 15.0}],
            solitons__min_separation=30.0)
        data["diagnostics"]["b_path"] = "fixed_speed"
        data["diagnostics"]["gammas"] = [0.0]
        cfg = scenario_from_dict(data)
        assert cfg.diagnostics.gammas == (0.0,)
        data["diagnostics"]["gammas"] = [0.7]
        with pytest.raises(ConfigError, match="gammas"):
            scenario_from_dict(data)

    def test_load_scenario_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="no such config"):
            load_scenario(tmp_path / "absent.json")


class TestRandomSmoothPair:
    def setup_method(self):
        self.grid = Grid(n=1024, dx=0.1, x_min=-51.2)

    def test_deterministic_in_seed(self):
        a = random_smooth_pair(self.grid, 0.01, seed=12)
        b = random_smooth_pair(self.grid, 0.01, seed=12)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])
        c = random_smooth_pair(self.grid, 0.01, seed=13)
        assert not np.array_equal(a[0], c[0])

    def test_norm_equals_amplitude(self):
        for amp in (0.01, 0.2):
            dv, dw = random_smooth_pair(self.grid, amp, seed=5)
            state = HydroState.from_arrays(self.grid, dv, dw)
            assert x_norm(state) == pytest.approx(amp, rel=1e-12)

    def test_dw_has_zero_integral(self):
        dv, dw = random_smooth_pair(self.grid, 0.05, seed=8)
        assert abs(integrate(dw, self.grid)) < 1e-15

    def test_amplitude_validation(self):
        with pytest.raises(ValueError):
            random_smooth_pair(self.grid, 0.0, seed=1)


class TestBuildInitial:
    def test_none_perturbation_is_pure_sum(self):
        cfg = scenario_from_dict(BASE)
        state = build_initial(cfg)
        from ll_lab import multi_soliton_sum

        ref = multi_soliton_sum(cfg.solitons, cfg.grid)
        assert np.array_equal(state.v.values, ref.v.values)
        assert np.array_equal(state.w.values, ref.w.values)

    def test_random_smooth_perturbation_size(self):
        data = variant(perturbation__kind="random_smooth",
                       perturbation__amplitude=0.02)
        data["perturbation"]["seed"] = 9
        cfg = scenario_from_dict(data)
        state = build_initial(cfg)
        from ll_lab import multi_soliton_sum

        ref = multi_soliton_sum(cfg.solitons, cfg.grid)
        diff = HydroState.from_arrays(cfg.grid, state.v.values - ref.v.values,
                                      state.w.values - ref.w.values)
        assert x_norm(diff) == pytest.approx(0.02, rel=1e-12)

    def test_between_bump_sits_at_midpoint(self):
        data = variant(
            solitons__params=[{"c": -0.4, "a": -15.0}, {"c": 0.4, "a": 15.0}],
            solitons__min_separation=30.0,
            perturbation__kind="between_bump",
            perturbation__amplitude=0.05)
        cfg = scenario_from_dict(data)
        state = build_initial(cfg)
        from ll_lab import multi_soliton_sum

        ref = multi_soliton_sum(cfg.solitons, cfg.grid)
        dv = state.v.values - ref.v.values
        peak = cfg.grid.x[np.argmax(dv)]
        assert abs(peak) < cfg.grid.dx
        assert np.max(dv) == pytest.approx(0.05, rel=1e-12)
        assert np.array_equal(state.w.values, ref.w.values)

    def test_oversized_perturbation_rejected(self):
        data = variant(perturbation__kind="between_bump",
                       perturbation__amplitude=0.9,
                       solitons__params=[{"c": -0.3, "a": -15.0},
                                         {"c": 0.3, "a": 15.0}],
                       solitons__min_separation=30.0)
        cfg = scenario_from_dict(data)
        # amplitude 0.9 on top of tails stays below 1; push it over instead
        data["perturbation"]["amplitude"] = 1.2
        with pytest.raises(ConfigError, match="initial datum"):
            build_initial(scenario_from_dict(data))


class TestMonotonicityDefect:
    def test_hand_series(self):
        assert _monotonicity_defect(np.array([0.0, 1.0, 0.5, 2.0])) == -0.5
        assert _monotonicity_defect(np.array([0.0, 1.0, 2.0])) == 0.0
        assert _monotonicity_defect(np.array([3.0])) == 0.0

    def test_worst_drop_not_first_drop(self):
        series = np.array([0.0, 5.0, 4.9, 1.0, 6.0])
        assert _monotonicity_defect(series) == -4.0


class TestRunScenario:
    def test_unperturbed_single_soliton(self):
        report = run_scenario(scenario_from_dict(BASE))
        assert report.error is None
        names = [v.name for v in report.verdicts]
        assert "energy_drift" in names
        assert "translation_error" in names
        assert "monotonicity_y5" in names
        assert "rate_fd_match" in names
        assert "eps_sup" not in names  # unperturbed: no amplitude to compare to
        assert report.all_passed, [(v.name, v.measured) for v in report.verdicts]

    def test_reports_are_deterministic(self):
        data = variant(perturbation__kind="random_smooth",
                       perturbation__amplitude=0.01)
        r1 = run_scenario(scenario_from_dict(data))
        r2 = run_scenario(scenario_from_dict(data))
        assert np.array_equal(r1.track.speeds, r2.track.speeds)
        assert np.array_equal(r1.track.centers, r2.track.centers)
        for s1, s2 in zip(r1.samples, r2.samples):
            assert s1.energy == s2.energy
            assert s1.localized == s2.localized

    def test_spin_frame_run(self):
        data = variant(frame="spin")
        report = run_scenario(scenario_from_dict(data))
        assert report.error is None
        assert report.all_passed, [(v.name, v.measured) for v in report.verdicts]

    def test_perturbed_run_has_stability_verdicts(self):
        data = variant(perturbation__kind="random_smooth",
                       perturbation__amplitude=0.01)
        report = run_scenario(scenario_from_dict(data))
        names = [v.name for v in report.verdicts]
        assert "eps_sup" in names
        assert "center_rate_margin" in names
        assert report.all_passed, [(v.name, v.measured) for v in report.verdicts]

    def test_blowup_recorded_and_report_written(self, tmp_path):
        data = variant(
            name="doomed",
            solitons__params=[{"c": -0.4, "a": -12.0}, {"c": 0.4, "a": 12.0}],
            solitons__min_separation=20.0,
            grid__n=512,
            integrator__dt=0.0025,
            integrator__t_end=2.0,
            integrator__sample_stride=5)
        data["integrator"]["cfl_factor"] = 0.25
        report = run_scenario(scenario_from_dict(data))
        assert report.error is not None
        assert not report.all_passed or report.error  # failed run must be visible
        out = write_report(report, tmp_path)
        assert (out / "report.json").is_file()
        payload = json.loads((out / "report.json").read_text())
        assert payload["error"] is not None
        assert payload["scenario"] == "doomed"

    def test_write_report_layout(self, tmp_path):
        report = run_scenario(scenario_from_dict(BASE))
        out = write_report(report, tmp_path)
        assert out == tmp_path / "tiny"
        assert (out / "diagnostics.csv").is_file()
        assert (out / "modulation.csv").is_file()
        payload = json.loads((out / "report.json").read_text())
        assert payload["scenario"] == "tiny"
        assert {d["name"] for d in payload["verdicts"]} == {v.name for v in report.verdicts}
        assert all(k in payload["timings"] for k in ("build", "evolve", "total"))

    def test_fixed_speed_paths(self):
        data = variant(
            solitons__params=[{"c": -0.4, "a": -15.0}, {"c": 0.4, "a": 15.0}],
            solitons__min_separation=30.0)
        data["diagnostics"]["b_path"] = "fixed_speed"
        data["diagnostics"]["gammas"] = [0.0]
        report = run_scenario(scenario_from_dict(data))
        assert report.error is None
        labels = {label for (label, _y0) in report.samples[0].localized}
        assert labels == {"a1", "a2", "b1"}


class TestPerturbationDataclass:
    def test_none_kind_amplitude_must_be_zero(self):
        with pytest.raises(ConfigError):
            Perturbation(kind="none", amplitude=0.1)

    def test_active_kind_needs_amplitude(self):
        with pytest.raises(ConfigError):
            Perturbation(kind="random_smooth", amplitude=0.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            Perturbation(kind="gust", amplitude=0.1)
