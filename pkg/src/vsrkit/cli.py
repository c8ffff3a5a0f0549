"""Command-line client for the super-resolution service.

Every subcommand builds the same request model the HTTP API accepts and
executes it in-process by default; pass ``--server URL`` to send it to a
running service instead (paths are then resolved on the server's
filesystem). Exit codes: 0 success, 2 config error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, VsrkitError
from .service import handlers, schemas

_KIND_EXIT_CODES = {"config": 2, "io": 3, "numerical": 4}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    p.add_argument("--server", help="send the request to a running service URL")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsrkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="synthesize LR frames from HR frames")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--scale", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--kernel", help="delta | gaussian:<sigma> | file:<path>")
    _add_common(p)

    p = sub.add_parser("estimate-kernel", help="estimate a blur kernel from pairs")
    p.add_argument("pairs_dir", help="directory with hr/ and lr/, or LR frames with --blind")
    p.add_argument("output_kernel", help="kernel file to write")
    p.add_argument("--blind", action="store_true", help="cross-scale pseudo-pairs from LR frames")
    p.add_argument("--scale", type=int)
    p.add_argument("--kernel-size", type=int)
    p.add_argument("--mode", choices=["direct-logits", "fc-net"])
    p.add_argument("--max-iters", type=int)
    _add_common(p)

    p = sub.add_parser("superresolve", help="super-resolve an LR sequence")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    k = p.add_mutually_exclusive_group(required=True)
    k.add_argument("--kernel", help="kernel file to use")
    k.add_argument("--blind", action="store_true", help="estimate the kernel from the input")
    p.add_argument("--scale", type=int)
    p.add_argument("--gamma", type=float, help="deconvolution regularization weight")
    p.add_argument("--cg-tol", type=float, help="CG relative residual tolerance")
    p.add_argument("--cg-max-iters", type=int, help="CG iteration cap")
    p.add_argument("--threads", type=int, help="parallel frames")
    p.add_argument("--strict", action="store_true", help="escalate solver warnings to exit 4")
    _add_common(p)

    p = sub.add_parser("evaluate", help="PSNR/SSIM of predictions vs ground truth")
    p.add_argument("pred_dir")
    p.add_argument("truth_dir")
    _add_common(p)

    p = sub.add_parser("kernel-accuracy", help="score a kernel by LR regeneration")
    p.add_argument("hr_dir")
    p.add_argument("lr_dir")
    p.add_argument("kernel_path")
    p.add_argument("--scale", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _overrides(args) -> dict[str, str]:
    values: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        values[key.strip()] = val.strip()
    flag_map = {
        "scale": "scale",
        "seed": "seed",
        "noise_std": "noise_std",
        "kernel_size": "kernel_size",
        "mode": "estimator.mode",
        "max_iters": "estimator.max_iters",
        "gamma": "solver.gamma",
        "cg_tol": "solver.cg_tolerance",
        "cg_max_iters": "solver.cg_max_iters",
        "threads": "threads",
    }
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = str(val)
    if getattr(args, "strict", False):
        values["strict"] = "true"
    if args.command == "degrade" and getattr(args, "kernel", None):
        values["degrade.kernel"] = args.kernel
    return values


def _build_request(args):
    if args.command == "degrade":
        return "/degrade", schemas.DegradeRequest(
            input_dir=args.input_dir,
            output_dir=args.output_dir,
            config_file=args.config,
            config=_overrides(args),
        )
    if args.command == "estimate-kernel":
        return "/estimate-kernel", schemas.EstimateKernelRequest(
            pairs_dir=args.pairs_dir,
            output_kernel_path=args.output_kernel,
            blind=args.blind,
            config_file=args.config,
            config=_overrides(args),
        )
    if args.command == "superresolve":
        return "/superresolve", schemas.SuperresolveRequest(
            input_dir=args.input_dir,
            output_dir=args.output_dir,
            kernel_path=None if args.blind else args.kernel,
            config_file=args.config,
            config=_overrides(args),
        )
    if args.command == "evaluate":
        return "/evaluate", schemas.EvaluateRequest(
            pred_dir=args.pred_dir, truth_dir=args.truth_dir
        )
    if args.command == "kernel-accuracy":
        return "/kernel-accuracy", schemas.KernelAccuracyRequest(
            hr_dir=args.hr_dir,
            lr_dir=args.lr_dir,
            kernel_path=args.kernel_path,
            scale=args.scale,
        )
    raise ConfigError(f"unknown command {args.command!r}")


_LOCAL_HANDLERS = {
    "/degrade": handlers.run_degrade,
    "/estimate-kernel": handlers.run_estimate_kernel,
    "/superresolve": handlers.run_superresolve,
    "/evaluate": handlers.run_evaluate,
    "/kernel-accuracy": handlers.run_kernel_accuracy,
}


def _execute(route: str, request, server: str | None, client_factory=None):
    if server is None and client_factory is None:
        return _LOCAL_HANDLERS[route](request)
    import httpx

    client = client_factory() if client_factory else httpx.Client(base_url=server, timeout=None)
    with client:
        resp = client.post(route, json=request.model_dump())
        if resp.status_code != 200:
            detail = {}
            try:
                detail = resp.json().get("detail", {})
            except ValueError:
                pass
            kind = detail.get("kind", "error") if isinstance(detail, dict) else "error"
            message = (
                detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
            )
            err = VsrkitError(f"server error: {message}")
            err.exit_code = _KIND_EXIT_CODES.get(kind, 1)
            raise err
        return resp.json()


def _render(command: str, result) -> None:
    if hasattr(result, "model_dump"):
        result = result.model_dump()
    if command in ("evaluate", "kernel-accuracy"):
        sys.stdout.write(result["csv"])
        return
    for key in ("output_dir", "frames_written", "kernel_path", "loss_csv_path",
                "iterations", "initial_loss", "best_loss", "seed"):
        if key in result:
            print(f"{key}: {result[key]}")


def main(argv=None, client_factory=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    try:
        route, request = _build_request(args)
        result = _execute(route, request, args.server, client_factory)
    except VsrkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    _render(args.command, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
