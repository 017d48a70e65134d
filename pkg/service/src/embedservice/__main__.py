"""Run the service: ``python -m embedservice --model hash-v1 --port 8080``."""
from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServiceConfig


def main(argv=None):
    parser = argparse.ArgumentParser(description="Embedding microservice")
    parser.add_argument("--model", default="hash-v1",
                        help="hash-v1 or a transformers checkpoint id")
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch", type=int, default=256)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    args = parser.parse_args(argv)

    config = ServiceConfig(model=args.model, dim=args.dim, device=args.device,
                           max_batch=args.max_batch, port=args.port)
    uvicorn.run(create_app(config), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
