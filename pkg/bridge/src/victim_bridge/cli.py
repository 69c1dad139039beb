"""victim-bridge: serve an adapter callback over stdio or HTTP."""

import argparse
import json
import sys

from .callbacks import load_callback
from .server import make_http_server, serve_stdio


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="victim-bridge", description=__doc__)
    parser.add_argument(
        "--callback",
        default="echo",
        help="'echo' or a 'module:function' import path (default: echo)",
    )
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        callback = load_callback(args.callback)
    except (ValueError, ImportError) as exc:
        print(f"victim-bridge: {exc}", file=sys.stderr)
        return 1

    if args.transport == "stdio":
        serve_stdio(callback)
        return 0

    server = make_http_server(callback, args.host, args.port)
    print(json.dumps({"port": server.server_address[1]}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
