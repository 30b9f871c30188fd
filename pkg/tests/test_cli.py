import json

import pytest

from premdl.cli import main
from premdl.graphs import TOY_EDGES, random_dag, write_tsv


@pytest.fixture
def toy_tsv(tmp_path):
    path = tmp_path / "toy.tsv"
    write_tsv(path, TOY_EDGES)
    return str(path)


@pytest.fixture
def chain_tsv(tmp_path):
    path = tmp_path / "chain.tsv"
    path.write_text("1 2\n2 3\n")
    return str(path)


def _rows(text):
    return {tuple(int(v) for v in line.split(",")) for line in text.splitlines() if line}


def test_run_seq_toy(toy_tsv, capsys):
    code = main(["run", "--query", "apsp-linear", "--edb", toy_tsv, "--undirected", "--mode", "seq", "--push-prem"])
    assert code == 0
    rows = _rows(capsys.readouterr().out)
    assert (1, 4, 5) in rows and (4, 8, 10) in rows


def test_run_tc_chain_bsp(chain_tsv, capsys):
    assert main(["run", "--query", "tc", "--edb", chain_tsv, "--mode", "bsp", "--workers", "2"]) == 0
    assert _rows(capsys.readouterr().out) == {(1, 2), (2, 3), (1, 3)}


def test_missing_edb_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--query", "tc"])
    assert info.value.code == 1
    assert "usage:" in capsys.readouterr().err


def test_unpushed_apsp_on_cycle_hits_cap(toy_tsv, capsys):
    code = main(["run", "--query", "apsp-linear", "--edb", toy_tsv, "--undirected", "--mode", "seq",
                 "--iteration-cap", "30"])
    assert code == 2


def test_negative_weight_rejected(tmp_path, capsys):
    path = tmp_path / "neg.tsv"
    path.write_text("1 2 -1\n")
    assert main(["run", "--query", "apsp-linear", "--edb", str(path), "--push-prem", "--mode", "seq"]) == 1


def test_bad_program_exit_1(tmp_path, toy_tsv):
    prog = tmp_path / "bad.dl"
    prog.write_text("p(X, min<D>) <- arc(Y, Z, D).")
    assert main(["run", "--program", str(prog), "--edb", toy_tsv]) == 1


def test_user_program_with_push(tmp_path, toy_tsv, capsys):
    prog = tmp_path / "sp.dl"
    prog.write_text(
        "path(X, Y, D) <- arc(X, Y, D).\n"
        "path(X, Y, D) <- path(X, Z, A), arc(Z, Y, B), D = A + B.\n"
        "best(X, Y, min<D>) <- path(X, Y, D).\n"
    )
    code = main(["run", "--program", str(prog), "--edb", toy_tsv, "--undirected", "--push-prem",
                 "--mode", "ssp", "--workers", "3", "--output-predicate", "best"])
    assert code == 0
    assert (4, 8, 10) in _rows(capsys.readouterr().out)


def test_compare_modes_and_oracles(tmp_path, toy_tsv, capsys):
    outs = {}
    for mode in ("bsp", "ssp"):
        out = tmp_path / f"{mode}.csv"
        assert main(["run", "--query", "apsp-nonlinear", "--edb", toy_tsv, "--undirected", "--push-prem",
                     "--mode", mode, "--workers", "2", "--out", str(out)]) == 0
        outs[mode] = str(out)
    assert main(["compare", outs["ssp"], outs["bsp"]]) == 0
    for oracle in ("dijkstra", "floyd-warshall"):
        assert main(["compare", outs["ssp"], "--oracle", oracle, "--edb", toy_tsv, "--undirected"]) == 0
    assert "identical (64 rows)" in capsys.readouterr().out


def test_compare_reports_corrupted_key(tmp_path, toy_tsv, capsys):
    out = tmp_path / "r.csv"
    main(["run", "--query", "apsp-linear", "--edb", toy_tsv, "--undirected", "--push-prem", "--mode", "seq",
          "--out", str(out)])
    out.write_text(out.read_text().replace("1,4,5", "1,4,6"))
    assert main(["compare", str(out), "--oracle", "dijkstra", "--edb", toy_tsv, "--undirected"]) == 1
    assert "key 1,4: 6 != 5" in capsys.readouterr().out


def test_compare_tc_against_warshall(tmp_path, capsys):
    edb = tmp_path / "dag.tsv"
    write_tsv(edb, random_dag(4)[1])
    out = tmp_path / "tc.csv"
    assert main(["run", "--query", "tc", "--edb", str(edb), "--mode", "ssp", "--out", str(out)]) == 0
    assert main(["compare", str(out), "--oracle", "warshall", "--edb", str(edb)]) == 0
    assert main(["compare", str(out), "--oracle", "stratified", "--query", "tc", "--edb", str(edb)]) == 0


def test_metrics_and_trace_files(tmp_path, toy_tsv):
    metrics, trace = tmp_path / "m.json", tmp_path / "t.log"
    assert main(["run", "--query", "apsp-nonlinear", "--edb", toy_tsv, "--undirected", "--push-prem",
                 "--workers", "2", "--out", str(tmp_path / "o.csv"), "--metrics", str(metrics),
                 "--trace", str(trace)]) == 0
    data = json.loads(metrics.read_text())
    assert len(data["per_worker"]) == 2 and data["global"]["terminated_cleanly"]
    assert trace.read_text().strip()


def test_bench_single_bsp_row(toy_tsv, capsys):
    assert main(["bench", "--workload", "apsp-nonlinear", "--edb", toy_tsv, "--undirected",
                 "--repeats", "1", "--slacks", "0", "--stragglers", "off", "--workers", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("workload,mode,slack")
    assert lines[1].startswith("apsp_nonlinear,bsp,0,off")
    assert len(lines) == 2


def test_bench_tc_sends_same_tuples(tmp_path, capsys):
    edb = tmp_path / "dag.tsv"
    write_tsv(edb, random_dag(8, max_nodes=15)[1])
    assert main(["bench", "--workload", "tc", "--edb", str(edb), "--slacks", "0,3,6",
                 "--stragglers", "off", "--repeats", "1"]) == 0
    assert "PASS tc tuples_sent equal across slacks" in capsys.readouterr().out


def test_bench_is_reproducible(toy_tsv, tmp_path):
    reports = []
    for k in range(2):
        out = tmp_path / f"b{k}.csv"
        main(["bench", "--workload", "apsp-nonlinear", "--edb", toy_tsv, "--undirected", "--workers", "2",
              "--slacks", "0,3", "--stragglers", "on", "--repeats", "2", "--seed", "3", "--out", str(out)])
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]
