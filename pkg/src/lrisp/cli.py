"""Batch experiment front end.

Thin client over the service layer: every subcommand validates its
configuration into the shared request schema, runs it either in-process
or against a remote service (--server), and writes the returned tables
as CSV/JSON artifacts.  Exit codes: 0 ok, 2 config error, 3 quadrature
failure, 4 partial reconstruction failure, 5 roundtrip bound exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from pydantic import ValidationError

from .errors import ConfigError, InversionError, LrispError, QuadratureError
from .reporting import atomic_write_text, canonical_json, format_csv
from .service import handlers
from .service.schemas import RunConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUADRATURE = 3
EXIT_PARTIAL = 4
EXIT_BOUND = 5


def _load_config(path: str, seed_override: int | None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if seed_override is not None:
        cfg = cfg.model_copy(update={"seed": seed_override})
    return cfg


class _Client:
    """Dispatches operations locally or to a remote service."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, op: str, cfg: RunConfig | None, **kwargs) -> dict:
        if self.server is None:
            if op == "selftest":
                return handlers.run_selftest().model_dump()
            fn = {
                "forward": handlers.run_forward,
                "symbol-dump": handlers.run_symbol_dump,
                "reconstruct": handlers.run_reconstruct,
                "roundtrip": handlers.run_roundtrip,
            }[op]
            return fn(cfg, **kwargs).model_dump()
        import httpx

        payload = cfg.model_dump(by_alias=True) if cfg is not None else None
        resp = httpx.post(f"{self.server}/v1/{op}", json=payload, timeout=None)
        if resp.status_code == 422:
            raise ConfigError(resp.json().get("detail", "request rejected by server"))
        if resp.status_code >= 500:
            doc = resp.json()
            kind = doc.get("error", "")
            if kind == "QuadratureError":
                raise QuadratureError(doc.get("detail", "remote quadrature failure"))
            if kind == "InversionError":
                raise InversionError(doc.get("detail", "remote inversion failure"))
            raise LrispError(doc.get("detail", "remote failure"))
        resp.raise_for_status()
        return resp.json()


def _vector_header(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def _write_forward_csv(out_dir: str, rows: list[dict]) -> str:
    dim = len(rows[0]["omega"])
    header = (
        _vector_header("omega", dim)
        + _vector_header("y", dim)
        + ["phi"]
        + _vector_header("grad", dim)
        + ["est_error"]
    )
    table = [
        [*r["omega"], *r["y"], r["phi"], *r["grad"], r["est_error"]]
        for r in rows
    ]
    path = os.path.join(out_dir, "phase.csv")
    atomic_write_text(path, format_csv(header, table))
    return path


def _write_symbol_csv(out_dir: str, rows: list[dict]) -> str:
    dim = len(rows[0]["omega"])
    header = _vector_header("omega", dim) + _vector_header("y", dim) + ["re", "im"]
    table = [[*r["omega"], *r["y"], r["re"], r["im"]] for r in rows]
    path = os.path.join(out_dir, "symbol.csv")
    atomic_write_text(path, format_csv(header, table))
    return path


def _summary_rows(report: dict):
    rows = []
    for tgt in report["targets"]:
        for j, comp in enumerate(tgt["components"]):
            rows.append(
                [*tgt["target"], j, comp["rho"], comp["value_euler"], "", ""]
            )
    return rows


def _write_report(out_dir: str, report: dict) -> str:
    path = os.path.join(out_dir, "report.json")
    atomic_write_text(path, canonical_json(report))
    return path


def cmd_forward(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _Client(args.server).call("forward", cfg, tol=args.tol)
    path = _write_forward_csv(args.out, out["rows"])
    if not args.quiet:
        print(f"wrote {path} ({len(out['rows'])} rows)")
    return EXIT_OK


def cmd_symbol_dump(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _Client(args.server).call("symbol-dump", cfg)
    path = _write_symbol_csv(args.out, out["rows"])
    if not args.quiet:
        print(f"wrote {path} ({len(out['rows'])} rows)")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _Client(args.server).call("reconstruct", cfg)
    report = out["report"]
    _write_report(args.out, report)
    dim = len(cfg.targets[0])
    header = _vector_header("target", dim) + ["j", "rho_hat", "V_hat", "V_true", "rel_err"]
    atomic_write_text(
        os.path.join(args.out, "summary.csv"), format_csv(header, _summary_rows(report))
    )
    if not args.quiet:
        statuses = [t["status"] for t in report["targets"]]
        print(f"wrote {os.path.join(args.out, 'report.json')}; target statuses: {statuses}")
    return EXIT_OK if out["ok"] else EXIT_PARTIAL


def cmd_roundtrip(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _Client(args.server).call("roundtrip", cfg, bound=args.tol)
    _write_report(args.out, out["report"])
    dim = len(cfg.targets[0])
    header = _vector_header("target", dim) + ["j", "rho_hat", "V_hat", "V_true", "rel_err"]
    rows = [
        [*e["target"], e["component"], e["rho_hat"], e["v_hat"], e["v_true"], e["rel_err"]]
        for e in out["errors"]
    ]
    atomic_write_text(os.path.join(args.out, "errors.csv"), format_csv(header, rows))
    max_rel = out["max_rel_err"]
    print(f"max rel_err: {max_rel if max_rel is not None else float('inf'):.6g}")
    return EXIT_OK if out["passed"] else EXIT_BOUND


def cmd_selftest(args) -> int:
    out = _Client(args.server).call("selftest", None)
    for check in out["checks"]:
        status = "ok" if check["passed"] else "FAIL"
        if not args.quiet or not check["passed"]:
            print(f"[{status}] {check['name']}: {check['detail']}")
    return EXIT_OK if out["passed"] else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrisp",
        description="Forward symbol tables and component-wise potential reconstruction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--out", default=".", help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--tol", type=float, default=None, help="tolerance override (see docs)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--server", default=None, help="base URL of a running service")

    common(sub.add_parser("forward", help="tabulate the phase function over a grid"))
    common(sub.add_parser("symbol-dump", help="sample the symbol oracle over a grid"))
    common(sub.add_parser("reconstruct", help="reconstruct components at the targets"))
    common(sub.add_parser("roundtrip", help="reconstruct and compare against the model"))
    common(sub.add_parser("selftest", help="run the closed-form oracle suite"), config=False)
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    table = {
        "forward": cmd_forward,
        "symbol-dump": cmd_symbol_dump,
        "reconstruct": cmd_reconstruct,
        "roundtrip": cmd_roundtrip,
        "selftest": cmd_selftest,
        "serve": cmd_serve,
    }
    try:
        return table[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, InversionError) as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except LrispError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
