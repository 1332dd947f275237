import json
import os
import socket
import subprocess
import sys

import pytest

from kvgraph.cli import build_parser, main


def test_bench_generate(tmp_path, capsys):
    assert main(["bench", "generate", "--scale", "5", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert "rows" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "vertex_person.csv")


def test_bench_import_json(tmp_path, capsys):
    main(["bench", "generate", "--scale", "8", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["bench", "import", "--data", str(tmp_path), "--hosts", "1", "--partitions", "2",
                 "--rpc-delay", "0", "--report", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["vertices"] > 0 and d["malformed"] == 0 and d["bulk"] is True


def test_bench_run_table(capsys):
    assert main(["bench", "run", "--scale", "10", "--hosts", "1", "--partitions", "2", "--rpc-delay", "0",
                 "--threads", "1,2", "--seeds", "5", "--repeats", "1"]) == 0
    out = capsys.readouterr().out
    assert "workload two-hop" in out and "0 mismatches" in out


def test_console_eval(capsys):
    assert main(["console", "--local", "-e", "YIELD 1 + 1 AS x;"]) == 0
    out = capsys.readouterr().out
    assert "| 2 |" in out and "Got 1 rows" in out


def test_console_script_file_exit_code(tmp_path, capsys):
    f = tmp_path / "s.ngql"
    f.write_text("YIELD 1;\nGO GO;\n")
    assert main(["console", "--local", "-f", str(f)]) == 1


def test_console_connection_refused(capsys):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    assert main(["console", "--addr", f"127.0.0.1:{port}", "-e", "YIELD 1;"]) == 2
    assert "kvgraph: error:" in capsys.readouterr().err


def test_serve_bad_config(tmp_path, capsys):
    f = tmp_path / "n.conf"
    f.write_text("node_id = a\npeers = b, c\n")
    assert main(["serve", "--config", str(f)]) == 2
    assert "not in peers" in capsys.readouterr().err


def test_serve_port_busy(capsys):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen()
        port = s.getsockname()[1]
        assert main(["serve", "--port", str(port)]) == 2
    assert "already in use" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bench", "run", "--threads", "0"], ["console", "--addr", "nope"], []])
def test_argument_errors(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)


def test_module_entry_point_serves():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    proc = subprocess.Popen([sys.executable, "-m", "kvgraph", "serve", "--port", str(port)],
                            stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        assert f"listening on 127.0.0.1:{port}" in line
        out = subprocess.run([sys.executable, "-m", "kvgraph", "console", "--addr", f"127.0.0.1:{port}",
                              "-e", "YIELD 40 + 2 AS x;"], capture_output=True, text=True, timeout=60)
        assert out.returncode == 0 and "| 42 |" in out.stdout
    finally:
        proc.terminate()
        proc.wait(timeout=10)
