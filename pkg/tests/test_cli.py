import re

import pytest

from sliceshare.model import ValidationError
from sliceshare.engines import SolverError
from sliceshare.scenario import (ScenarioParseError, parse_scenario_text,
                                 apply_sweep, builtin_names, load_builtin)
from sliceshare.cli import main
import sliceshare.cli as cli_mod

MINIMAL = """\
schema 1
resource r1
slice s1 share=0.5
slice s2 share=0.5
class c1 slice=s1 demand=r1:1 arrival_rate=0.3
class c2 slice=s2 demand=r1:1 arrival_rate=0.3
run engines=dps,maxmin-scs horizon=60 warmup=0 seeds=0..2
"""

SWEPT = MINIMAL.replace(
    "run engines=dps,maxmin-scs horizon=60 warmup=0 seeds=0..2",
    "run engines=dps horizon=40 warmup=0 seeds=1,5\n"
    "sweep key=share:s1 values=0.3,0.5,0.7")


def test_parse_minimal():
    sf = parse_scenario_text(MINIMAL, label="mini")
    assert sf.instance.n_resources == 1
    assert sf.instance.n_classes == 2
    assert [e.key for e in sf.run.engines] == ["dps", "maxmin-scs"]
    assert sf.run.seeds == (0, 1, 2)
    assert sf.run.warmup == 0.0
    assert sf.sweep is None
    sc = sf.scenario(sf.run.engines[0], seed=1)
    assert sc.horizon == 60.0
    assert sc.label == "mini"


def test_parse_seed_list_and_sweep():
    sf = parse_scenario_text(SWEPT)
    assert sf.run.seeds == (1, 5)
    assert sf.sweep.kind == "share"
    assert sf.sweep.target == "s1"
    assert sf.sweep.values == (0.3, 0.5, 0.7)


@pytest.mark.parametrize("mangle,needle", [
    (lambda t: t.replace("schema 1", "schema 2"), "line 1"),
    (lambda t: t.replace("resource r1", "resourc r1"), "unknown record"),
    (lambda t: t.replace("share=0.5", "share=0.5 color=red", 1), "unknown key"),
    (lambda t: t.replace("demand=r1:1 arrival_rate=0.3",
                         "demand=r1:1 demand=r1:2", 1), "duplicate key"),
    (lambda t: t.replace("slice=s1 ", "", 1), "missing key"),
    (lambda t: t.replace("demand=r1:1", "demand=r1", 1), "<resource>:<value>"),
    (lambda t: t.replace("engines=dps,maxmin-scs", "engines=foo"),
     "unknown engine 'foo' at run.engine"),
    (lambda t: t + "run engines=dps horizon=9\n", "duplicate run"),
    (lambda t: t.replace("horizon=60", "horizon=sixty"), "bad number"),
    (lambda t: t.replace("seeds=0..2", "seeds=2..0"), "empty seed range"),
    (lambda t: t + "sweep key=share:s9 values=0.5\n", "unknown slice"),
    (lambda t: t + "sweep key=share:s1 values=1.5\n", "sweep.values"),
    (lambda t: t + "sweep key=magic:s1 values=0.5\n", "sweep key"),
])
def test_parse_errors(mangle, needle):
    with pytest.raises(ScenarioParseError, match=re.escape(needle)):
        parse_scenario_text(mangle(MINIMAL))


def test_missing_run_and_empty():
    with pytest.raises(ScenarioParseError, match="missing run"):
        parse_scenario_text("schema 1\nresource r1\n")
    with pytest.raises(ScenarioParseError, match="empty scenario"):
        parse_scenario_text("\n# nothing\n")


def test_line_numbers_reported():
    bad = MINIMAL.replace("class c2", "klass c2")
    with pytest.raises(ScenarioParseError, match="line 6"):
        parse_scenario_text(bad)


def test_builtins_parse_and_fig7_topology():
    names = builtin_names()
    assert names == ("fig2_symmetric", "fig3_asymmetric", "fig4_md1",
                     "fig5_busy", "fig7_multiresource", "fig8_drf_dps",
                     "table1_static")
    for name in names:
        sf = load_builtin(name)
        assert sf.label == name

    sf = load_builtin("fig7_multiresource")
    inst = sf.instance
    assert inst.n_resources == 10
    assert inst.n_classes == 6
    d = dict(zip(inst.resource_ids,
                 inst.demand_matrix[inst.class_index["c1"]]))
    assert d["f1"] == pytest.approx(5 / 6)
    assert d["b1"] == pytest.approx(0.5)
    assert d["cloud"] == pytest.approx(0.217)
    assert sum(1 for v in d.values() if v > 0) == 3
    assert all(c.arrival_rate == 0.7 for c in inst.classes)
    assert all(c.mean_workload == 1.0 for c in inst.classes)

    # row-count contracts documented for the shipped files
    fig2 = load_builtin("fig2_symmetric")
    assert len(fig2.run.engines) * len(fig2.run.seeds) == 40
    assert fig2.sweep.values[0] == 0.01 and fig2.sweep.values[-1] == 0.99


def test_apply_sweep_share_complement():
    sf = parse_scenario_text(SWEPT)
    inst = apply_sweep(sf, 0.3)
    shares = {s.id: s.share for s in inst.slices}
    assert shares == pytest.approx({"s1": 0.3, "s2": 0.7})


def test_apply_sweep_arrival_rate_star():
    sf = load_builtin("fig5_busy")
    inst = apply_sweep(sf, 0.25)
    assert all(c.arrival_rate == 0.25 for c in inst.classes)


def write(tmp_path, text, name="scen.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cmd_run_rows_and_determinism(tmp_path, capsys):
    scen = write(tmp_path, MINIMAL)
    out = tmp_path / "a.csv"
    assert main(["run", scen, "-o", str(out)]) == 0
    assert "wrote 6 rows" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == ("scenario,engine,alpha,seed,sweep_value,"
                        "delay_s1,delay_s2,tput_s1,tput_s2,"
                        "mean_delay,mean_throughput,frac_idle,frac_one_busy,"
                        "frac_both_busy,mean_population,departures")
    assert len(lines) == 7
    # (engine, seed) ordering, engines in run-block order
    heads = [tuple(l.split(",")[1:4]) for l in lines[1:]]
    assert heads == [("dps", "", "0"), ("dps", "", "1"), ("dps", "", "2"),
                     ("maxmin-scs", "", "0"), ("maxmin-scs", "", "1"),
                     ("maxmin-scs", "", "2")]
    for l in lines[1:]:
        assert re.fullmatch(r"\d+", l.split(",")[-1])   # integer departures

    out2 = tmp_path / "b.csv"
    assert main(["run", scen, "-o", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_cmd_run_alpha_column(tmp_path):
    scen = write(tmp_path, MINIMAL.replace("engines=dps,maxmin-scs",
                                           "engines=scs(0.5)"))
    out = tmp_path / "a.csv"
    assert main(["run", scen, "-o", str(out)]) == 0
    row = out.read_text().splitlines()[1].split(",")
    assert row[1] == "scs(0.5)"
    assert row[2] == "0.5"


def test_cmd_sweep_rows(tmp_path, capsys):
    scen = write(tmp_path, SWEPT)
    out = tmp_path / "s.csv"
    assert main(["sweep", scen, "-o", str(out)]) == 0
    assert "wrote 6 rows" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert len(lines) == 7
    svals = [l.split(",")[4] for l in lines[1:]]
    assert svals == ["0.3", "0.3", "0.5", "0.5", "0.7", "0.7"]
    seeds = [l.split(",")[3] for l in lines[1:]]
    assert seeds == ["1", "5"] * 3


def test_cmd_sweep_requires_sweep_record(tmp_path, capsys):
    scen = write(tmp_path, MINIMAL)
    assert main(["sweep", scen, "-o", str(tmp_path / "x.csv")]) == 1
    assert "no sweep record" in capsys.readouterr().err


def test_trace_output_format(tmp_path):
    scen = write(tmp_path, MINIMAL.replace("engines=dps,maxmin-scs", "engines=dps")
                 .replace("seeds=0..2", "seeds=3"))
    out, tr = tmp_path / "r.csv", tmp_path / "t.txt"
    assert main(["run", scen, "-o", str(out), "--trace", str(tr)]) == 0
    lines = tr.read_text().splitlines()
    assert len(lines) > 10
    pat = re.compile(r"^\d+\.\d{9},(arrival|departure),c[12],\d+;\d+,\d+$")
    t_prev = -1.0
    for l in lines:
        assert pat.fullmatch(l), l
        t = float(l.split(",")[0])
        assert t >= t_prev
        t_prev = t


def test_trace_needs_single_engine_and_seed(tmp_path, capsys):
    scen = write(tmp_path, MINIMAL)
    rc = main(["run", scen, "-o", str(tmp_path / "x.csv"),
               "--trace", str(tmp_path / "t.txt")])
    assert rc == 1
    assert "exactly one" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run", "no_such_scenario", "-o", "x.csv"]) == 1
    assert "built-ins" in capsys.readouterr().err
    assert main(["verify", "nonsense"]) == 1
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_verify_command_passes(capsys):
    assert main(["verify", "factorization", "--instances", "5"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "factorization" in out


def test_verify_failure_exits_3(monkeypatch, capsys):
    from sliceshare.verify import SuiteResult
    bad = SuiteResult("protection", 1)
    bad.failures.append("made-up violation")
    monkeypatch.setattr(cli_mod, "run_suite", lambda *a, **k: bad)
    assert main(["verify", "protection"]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_solver_failure_exits_2(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("no convergence")
    monkeypatch.setattr(cli_mod, "run_simulation", boom)
    scen = write(tmp_path, MINIMAL)
    assert main(["run", scen, "-o", str(tmp_path / "x.csv")]) == 2
    assert "solver failure" in capsys.readouterr().err
