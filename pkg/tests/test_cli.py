import json

import pytest

from odece.cli import main
from odece.plot import PlotError, axis_limits, plot_frontier, read_frontier


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({
        "gen": {"num_items": 8, "num_instances": 40, "split": [24, 6, 10]},
        "train": {"epochs": 2},
    }))
    return p


def test_gen_train_eval(tmp_path, cfg, capsys):
    data = tmp_path / "data"
    assert main(["gen", "--config", str(cfg), "--seed", "1", "--out", str(data)]) == 0
    man = json.loads((data / "manifest.json").read_text())
    assert man["seed"] == 1 and man["num_instances"] == 40
    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", str(tmp_path / "run"),
                 "--alpha", "0.8", "--seed", "2"]) == 0
    assert (tmp_path / "run" / "model.json").is_file()
    assert (tmp_path / "run" / "history.csv").read_text().startswith("epoch,train_loss")
    assert main(["eval", "--data", str(data), "--model", str(tmp_path / "run" / "model.json"),
                 "--out", str(tmp_path / "ev")]) == 0
    rep = json.loads((tmp_path / "ev" / "eval_report.json").read_text())
    assert "infeasibility_ratio" in rep and "normalized_regret" in rep


def test_gen_is_byte_identical(tmp_path, cfg):
    for d in ("a", "b"):
        assert main(["gen", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / d)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_flags_override_config(tmp_path, cfg):
    conf = json.loads(cfg.read_text())
    conf["seed"] = 9
    cfg.write_text(json.dumps(conf))
    assert main(["gen", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "d")]) == 0
    assert json.loads((tmp_path / "d" / "manifest.json").read_text())["seed"] == 4


def test_default_gen_config_matches_benchmark():
    from odece.datagen import config_for

    c = config_for("mdkp_weights")
    assert (c.num_instances, tuple(c.split)) == (1500, (900, 100, 500))


def test_input_errors_exit_2(tmp_path, capsys):
    assert main(["gen", "--out", "/proc/forbidden"]) == 2
    assert main(["train", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 2
    assert main(["gen", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_divergence_exit_3(tmp_path, cfg, monkeypatch):
    data = tmp_path / "data"
    main(["gen", "--config", str(cfg), "--out", str(data)])
    import odece.cli as cli
    from odece.model import DivergenceError

    def blow_up(*a, **k):
        raise DivergenceError("non-finite loss", 1, 0)

    monkeypatch.setattr(cli, "train", blow_up)
    assert main(["train", "--data", str(data), "--out", str(tmp_path / "r")]) == 3


def test_sweep_and_plot(tmp_path, cfg):
    data = tmp_path / "data"
    main(["gen", "--config", str(cfg), "--out", str(data)])
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg), "--data", str(data), "--out", str(out),
                 "--alphas", "0.2,0.5", "--seeds", "0,1", "--no-mse"]) == 0
    lines = (out / "frontier.csv").read_text().splitlines()
    assert lines[0] == "alpha,seed,infeasibility,regret,n_test,wall_time_s,method"
    assert len(lines) == 1 + 4


def _frontier(path, rows):
    path.write_text("alpha,seed,infeasibility,regret,n_test,wall_time_s,method\n" + "".join(rows))
    return path


def test_plot_markers_and_padding(tmp_path):
    csv_path = _frontier(tmp_path / "f.csv", [
        "0.2,0,0.9,0.02,100,1.0,odece\n",
        "0.5,0,0.5,0.06,100,1.0,odece\n",
        "0.8,0,0.1,0.12,100,1.0,odece\n",
    ])
    svg = plot_frontier(csv_path, tmp_path / "f.svg").read_text()
    assert svg.count('class="alpha"') == 3
    assert "α=0.2" in svg and "α=0.8" in svg
    assert axis_limits([0.1, 0.5, 0.9]) == pytest.approx((0.06, 0.94))
    plot_frontier(csv_path, tmp_path / "g.svg")
    assert (tmp_path / "f.svg").read_bytes() == (tmp_path / "g.svg").read_bytes()


def test_plot_baseline_marker(tmp_path):
    csv_path = _frontier(tmp_path / "f.csv", [
        ",0,0.4,0.1,100,1.0,mse\n",
        ",1,0.5,0.1,100,1.0,mse\n",
        "0.5,0,0.3,0.2,100,1.0,odece\n",
    ])
    markers = read_frontier(csv_path)
    base = [m for m in markers if m.baseline]
    assert len(base) == 1 and base[0].label == "MSE" and base[0].x == pytest.approx(0.45)


def test_plot_header_only_writes_nothing(tmp_path):
    csv_path = _frontier(tmp_path / "f.csv", [])
    with pytest.raises(PlotError):
        plot_frontier(csv_path, tmp_path / "f.svg")
    assert not (tmp_path / "f.svg").exists()
    assert main(["plot", "--frontier", str(csv_path), "--out", str(tmp_path / "f.svg")]) == 2
    assert not (tmp_path / "f.svg").exists()


def test_plot_missing_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("alpha,seed\n0.5,0\n")
    with pytest.raises(PlotError, match="infeasibility"):
        read_frontier(p)
