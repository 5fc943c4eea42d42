from pathlib import Path

import pytest

from lqrplots.cli import main as cli_main
from lqrplots.render import FigureSpec, SchemaError, render

DATA = Path(__file__).parent / "data"
ROBUST = str(DATA / "aircraft_robust_seed3.csv")
TWO_POINT = str(DATA / "aircraft_two_point_seed3.csv")
ROBUST_JSON = str(DATA / "aircraft_robust_seed3.json")
TWO_POINT_JSON = str(DATA / "aircraft_two_point_seed3.json")
SCALING = str(DATA / "scaling.csv")


def png_bytes(spec: FigureSpec) -> bytes:
    return Path(render(spec)).read_bytes()


class TestPanels:
    @pytest.mark.parametrize(
        "panel,inputs",
        [
            ("f_gap", (ROBUST, TWO_POINT)),
            ("J_gap", (ROBUST, TWO_POINT)),
            ("runtime", (ROBUST_JSON, TWO_POINT_JSON)),
            ("relative_error", (SCALING,)),
        ],
    )
    def test_renders_and_is_byte_deterministic(self, panel, inputs, tmp_path):
        spec_a = FigureSpec(inputs=inputs, panel=panel, out=str(tmp_path / "a.png"))
        spec_b = FigureSpec(inputs=inputs, panel=panel, out=str(tmp_path / "b.png"))
        first, second = png_bytes(spec_a), png_bytes(spec_b)
        assert first[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(first) > 1000
        assert first == second

    def test_two_estimator_compare_has_legend_entries(self, tmp_path):
        out = render(FigureSpec(inputs=(ROBUST, TWO_POINT), panel="f_gap", out=str(tmp_path / "c.png")))
        assert out.exists()

    def test_gap_panel_is_monotone_source(self):
        # The golden robust trace must reach a small gap, so the log panel is
        # meaningful end to end.
        from lqrplots.render import _read_iteration_csv

        cols = _read_iteration_csv(ROBUST)
        assert cols["f_gap"][-1] <= 1e-4
        assert cols["f_gap"][0] > cols["f_gap"][-1]


class TestSchemaValidation:
    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            FigureSpec(inputs=(str(tmp_path / "nope.csv"),), panel="f_gap", out=str(tmp_path / "x.png"))

    def test_empty_csv(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("")
        with pytest.raises(SchemaError):
            render(FigureSpec(inputs=(str(bad),), panel="f_gap", out=str(tmp_path / "x.png")))

    def test_wrong_header_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("iteration,cost\n0,1.0\n")
        with pytest.raises(SchemaError) as err:
            render(FigureSpec(inputs=(str(bad),), panel="f_gap", out=str(tmp_path / "x.png")))
        assert "header" in str(err.value)

    def test_non_numeric_cell_is_column_qualified(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("iter,f,f_gap,grad_norm,gain_err,evals\n0,1.0,oops,0.1,0.1,2\n")
        with pytest.raises(SchemaError) as err:
            render(FigureSpec(inputs=(str(bad),), panel="f_gap", out=str(tmp_path / "x.png")))
        assert "f_gap" in str(err.value)

    def test_runtime_panel_rejects_plain_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"hello\": 1}")
        with pytest.raises(SchemaError):
            render(FigureSpec(inputs=(str(bad),), panel="runtime", out=str(tmp_path / "x.png")))

    def test_unknown_panel(self, tmp_path):
        with pytest.raises(SchemaError):
            FigureSpec(inputs=(ROBUST,), panel="surface", out=str(tmp_path / "x.png"))


class TestCli:
    def test_render_ok(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        code = cli_main(["render", "--panel", "f_gap", "--in", ROBUST, TWO_POINT, "--out", str(out)])
        assert code == 0
        assert out.exists()

    def test_schema_violation_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n")
        code = cli_main(["render", "--panel", "f_gap", "--in", str(bad), "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert "schema error" in capsys.readouterr().err

    def test_all_panels_via_cli(self, tmp_path):
        jobs = [
            ("f_gap", [ROBUST, TWO_POINT]),
            ("J_gap", [ROBUST]),
            ("runtime", [ROBUST_JSON, TWO_POINT_JSON]),
            ("relative_error", [SCALING]),
        ]
        for panel, inputs in jobs:
            out = tmp_path / f"{panel}.png"
            assert cli_main(["render", "--panel", panel, "--in", *inputs, "--out", str(out)]) == 0
            assert out.stat().st_size > 0
