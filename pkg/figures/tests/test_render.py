"""Figure-rendering tests, driven end to end through the rmt-irs CLI.

The sweeps are produced at reduced scale (fewer trials/SNRs) by invoking the
primary package's command line; this package touches nothing but the emitted
CSV files, i.e. exactly its external interface.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from irs_figures import FigureSpec, SchemaError, SeriesInput, load_spec, render
from irs_figures.cli import main as cli_main

PRESETS = {
    "fig2": ["fig2_nL5", "fig2_nL15", "fig2_nL25", "fig2_nL75"],
    "fig3": ["fig3_nS3", "fig3_nS7", "fig3_nS15", "fig3_rayleigh"],
    "fig4": ["fig4_nS3", "fig4_nS5", "fig4_nS9"],
}


def _run_cli(*args: str) -> None:
    subprocess.run([sys.executable, "-m", "rmt_irs.cli", *args],
                   check=True, capture_output=True, text=True)


@pytest.fixture(scope="session")
def preset_csvs(tmp_path_factory) -> Path:
    """Reduced-scale sweep CSVs for all three presets, via the primary CLI."""
    root = tmp_path_factory.mktemp("sweeps")
    cfg_dir = root / "configs"
    for name in PRESETS:
        _run_cli("preset", name, "--out", str(cfg_dir))
    for cfg_path in sorted(cfg_dir.glob("*.json")):
        payload = json.loads(cfg_path.read_text())
        payload["trials"] = 25
        payload["snr_db"] = [0.0, 10.0]
        payload["optimizer"]["max_outer"] = 60
        payload["output"] = str(root / f"{payload['label']}.csv")
        cfg_path.write_text(json.dumps(payload))
        _run_cli("sweep", "--config", str(cfg_path), "--no-timing")
    return root


def _spec_for(name: str, csv_dir: Path, out_dir: Path) -> FigureSpec:
    return FigureSpec(
        inputs=tuple(SeriesInput(path=str(csv_dir / f"{label}.csv"), label=label)
                     for label in PRESETS[name]),
        out_svg=str(out_dir / f"{name}.svg"),
        out_png=str(out_dir / f"{name}.png"),
        title=name,
    )


EXPECTED_SERIES = {
    "fig2": 8,   # 4 sizes x {da, mc}
    "fig3": 7,   # 3 scatterer counts x {da, mc} + rayleigh {mc}
    "fig4": 9,   # 3 scatterer counts x {da, ao, mc}
}


def test_all_presets_render_nonempty(preset_csvs, tmp_path):
    for name, expected in EXPECTED_SERIES.items():
        spec = _spec_for(name, preset_csvs, tmp_path)
        summary = render(spec)
        assert len(summary["series"]) == expected, (name, summary["series"])
        svg = Path(spec.out_svg).read_bytes()
        png = Path(spec.out_png).read_bytes()
        assert len(svg) > 1000 and b"<svg" in svg[:500]
        assert len(png) > 1000 and png[:8] == b"\x89PNG\r\n\x1a\n"


def test_rerender_is_byte_identical(preset_csvs, tmp_path):
    spec = _spec_for("fig2", preset_csvs, tmp_path)
    render(spec)
    first = Path(spec.out_svg).read_bytes()
    render(spec)
    assert Path(spec.out_svg).read_bytes() == first


def test_cli_renders_from_spec_file(preset_csvs, tmp_path, capsys):
    spec_payload = {
        "inputs": [{"path": str(preset_csvs / f"{label}.csv"), "label": label}
                   for label in PRESETS["fig4"]],
        "out_svg": "fig4.svg",
        "out_png": "fig4.png",
        "title": "optimized vs unoptimized",
    }
    spec_path = tmp_path / "fig4_spec.json"
    spec_path.write_text(json.dumps(spec_payload))
    assert cli_main(["render", "--spec", str(spec_path)]) == 0
    assert (tmp_path / "fig4.svg").exists() and (tmp_path / "fig4.png").exists()
    assert "9 series" in capsys.readouterr().out


def test_missing_column_is_schema_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("config_hash,snr_db,method\nxx,0,da\n")
    spec = FigureSpec(inputs=(SeriesInput(path=str(bad), label="x"),),
                      out_svg=str(tmp_path / "x.svg"), out_png=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="header"):
        render(spec)


def test_empty_series_is_error_not_blank_plot(preset_csvs, tmp_path):
    spec = FigureSpec(
        inputs=(SeriesInput(path=str(preset_csvs / "fig2_nL5.csv"), label="nL5"),),
        out_svg=str(tmp_path / "x.svg"), out_png=str(tmp_path / "x.png"),
        methods=("ao",),  # fig2 sweeps contain no optimizer rows
    )
    with pytest.raises(SchemaError, match="no rows"):
        render(spec)
    assert not (tmp_path / "x.svg").exists()


def test_cli_reports_spec_errors(tmp_path, capsys):
    spec_path = tmp_path / "broken.json"
    spec_path.write_text('{"inputs": []}')
    assert cli_main(["render", "--spec", str(spec_path)]) == 1
    assert "irs-figures:" in capsys.readouterr().err


def test_spec_loader_resolves_relative_paths(tmp_path):
    (tmp_path / "data").mkdir()
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "inputs": [{"path": "data/a.csv", "label": "a"}],
        "out_svg": "out/a.svg",
        "out_png": "out/a.png",
    }))
    spec = load_spec(spec_path)
    assert spec.inputs[0].path == str(tmp_path / "data" / "a.csv")
    assert spec.out_svg == str(tmp_path / "out" / "a.svg")
