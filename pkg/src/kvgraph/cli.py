"""Command line: ``kvgraph serve | console | bench``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from typing import Optional

from .errors import ConfigError, GraphError


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}") from None


def _threads(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("thread counts must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kvgraph", description="Partitioned property-graph database.")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("serve", help="run a node that serves the wire protocol")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--node-id")
    s.add_argument("--host")
    s.add_argument("--port", type=int)
    s.add_argument("--peers", help="comma-separated host ids of the cluster")
    s.add_argument("--roles", help="comma-separated subset of meta,storage,graph")
    s.add_argument("--data-dir")
    s.add_argument("--log-dir")

    c = sub.add_parser("console", help="interactive statement console")
    c.add_argument("--addr", type=_addr, default=("127.0.0.1", 9669), help="server host:port")
    c.add_argument("--local", action="store_true", help="use a fresh in-process cluster instead of a server")
    c.add_argument("--user", default="root")
    c.add_argument("--password", default="root")
    c.add_argument("-f", "--file", help="run statements from a script file and exit")
    c.add_argument("-e", "--eval", help="run the given statements and exit")

    b = sub.add_parser("bench", help="benchmark harness")
    bsub = b.add_subparsers(dest="bench_cmd", required=True)
    g = bsub.add_parser("generate", help="write a synthetic social-network dataset as CSV")
    g.add_argument("--scale", type=int, default=100, help="number of person vertices")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    for name, hlp in (("import", "load a CSV dataset"), ("run", "run a workload")):
        x = bsub.add_parser(name, help=hlp)
        x.add_argument("--data", help="dataset directory (generated when omitted)")
        x.add_argument("--scale", type=int, default=100)
        x.add_argument("--seed", type=int, default=0)
        x.add_argument("--addr", type=_addr, help="remote server; default is an in-process cluster")
        x.add_argument("--hosts", type=int, default=3, help="in-process cluster size")
        x.add_argument("--partitions", type=int, default=6)
        x.add_argument("--rpc-delay", type=float, default=0.0005, help="simulated per-RPC latency (s), in-process only")
        x.add_argument("--report", choices=("json", "table"), default="table")
        if name == "import":
            x.add_argument("--row-by-row", action="store_true", help="skip the bulk path")
        else:
            x.add_argument("--workload", choices=("short-reads", "two-hop", "inserts"), default="two-hop")
            x.add_argument("--threads", type=_threads, default=[1, 4])
            x.add_argument("--seeds", type=int, default=100, help="number of seeds per run")
            x.add_argument("--repeats", type=int, default=3)
            x.add_argument("--skip-import", action="store_true", help="data already loaded on --addr")
    return p


def _serve(args) -> int:
    from .server import load_config
    from .server.node import Server, port_in_use

    overrides = {"node_id": args.node_id, "host": args.host, "port": args.port, "peers": args.peers,
                 "roles": args.roles, "data_dir": args.data_dir, "log_dir": args.log_dir}
    cfg = load_config(args.config, overrides)
    if cfg.port and port_in_use(cfg.host, cfg.port):
        raise ConfigError(f"port {cfg.port} on {cfg.host} is already in use")
    server = Server(cfg).start()
    host, port = server.address
    print(f"kvgraph {cfg.node_id} listening on {host}:{port}", flush=True)
    server.serve_forever()
    return 0


def _console(args) -> int:
    import io

    from .server.repl import Console, LocalClient

    if args.local:
        from .cluster import Cluster

        client = LocalClient(Cluster(), args.user, args.password)
    else:
        from .server.client import Client

        client = Client(*args.addr).connect()
        client.authenticate(args.user, args.password)
    try:
        if args.eval is not None:
            return Console(client).loop(io.StringIO(args.eval))
        if args.file is not None:
            with open(args.file, encoding="utf-8") as f:
                return Console(client).loop(f)
        interactive = sys.stdin.isatty()
        console = Console(client, interactive=interactive)
        prompt = (lambda s: print(s, end="", flush=True)) if interactive else None
        return console.loop(sys.stdin, prompt)
    finally:
        client.close()


def _bench_target(args):
    from . import bench

    if args.addr is not None:
        return bench.RemoteTarget(*args.addr)
    from .cluster import Cluster

    hosts = [f"h{i}" for i in range(1, args.hosts + 1)]
    return bench.LocalTarget(Cluster(hosts=hosts, partition_num=args.partitions, rpc_delay=args.rpc_delay))


def _dataset(args) -> str:
    from . import bench

    if args.data:
        return args.data
    out = tempfile.mkdtemp(prefix="kvgraph-bench-")
    bench.generate(args.scale, args.seed, out)
    return out


def _bench(args) -> int:
    import json

    from . import bench

    if args.bench_cmd == "generate":
        counts = bench.generate(args.scale, args.seed, args.out)
        print(f"wrote {sum(counts.values())} rows in {len(counts)} files to {args.out}")
        return 0
    data = _dataset(args)
    target = _bench_target(args)
    if args.bench_cmd == "import":
        stats = bench.import_dataset(target, data, bulk=not args.row_by_row, partition_num=args.partitions)
        if args.report == "json":
            print(json.dumps(stats.to_dict(), indent=2, sort_keys=True, default=str))
        else:
            print(f"{stats.vertices} vertices, {stats.edges} edges, {stats.malformed} malformed rows "
                  f"in {stats.seconds:.2f}s ({stats.rows_per_sec:.0f} rows/s)")
        return 0
    if not (args.addr is not None and args.skip_import):
        bench.import_dataset(target, data, partition_num=args.partitions)
    seeds = bench.seeds_for(args.workload, data, args.seeds, args.seed)
    report = bench.run(target, args.workload, seeds, args.threads, args.repeats, data_dir=data, oracle_seed=args.seed)
    print(report.to_json() if args.report == "json" else report.to_table())
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("KVGRAPH_LOG", "WARNING"))
    try:
        if args.cmd == "serve":
            return _serve(args)
        if args.cmd == "console":
            return _console(args)
        return _bench(args)
    except (ConfigError, GraphError, OSError) as e:
        print(f"kvgraph: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
