"""``qconv <subcommand> --config PATH [--seed S] [--out DIR] [--workers W]``.

Exit codes: 0 all assertions pass, 2 an assertion failed, 3 config or feasibility error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import EXPERIMENTS, ConfigError, load_config, timed_run, write_outputs

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qconv", description="Seeded experiments on qudit convolution.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="YAML config file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", default="qconv_out", help="output directory")
    ap.add_argument("--workers", type=int, help="parallel trials")
    ap.add_argument("--d", type=int, help="local dimension (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment, {"seed": args.seed, "workers": args.workers, "d": args.d})
        res, secs = timed_run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = write_outputs(res, args.out, secs)
    summary = {k: v["holds"] for k, v in res.get("assertions", {}).items()}
    print(json.dumps({"experiment": res["experiment"], "passed": res["passed"], "assertions": summary, "results": str(path)}))
    if res["experiment"] == "params":
        for key in ("params", "balanced", "triple"):
            print(f"{key}: {res[key]}")
    return EXIT_OK if res["passed"] else EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
