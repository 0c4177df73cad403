"""Command line entry point: `detector-bridge` or `python -m detector_bridge`."""

from __future__ import annotations

import logging
import sys

import click

from .models import ModelLoadError, load_model
from .protocol import AdapterConfig, serve_protocol


@click.command()
@click.option("--model", "model_path", default=None,
              help="Model to serve: 'null', 'magenta', or a weights path.")
@click.option("--capacity", default=1, show_default=True,
              help="Requests the orchestrator may keep in flight.")
@click.option("--score-floor", default=0.0, show_default=True,
              help="Drop boxes scoring below this value.")
def main(model_path, capacity: int, score_floor: float) -> None:
    """Serve a detector over the stdio tile-detection protocol."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="detector-bridge %(levelname)s %(message)s")
    try:
        config = AdapterConfig(model_path=model_path,
                               score_floor=score_floor, capacity=capacity)
        model = load_model(config.model_path)
    except (ModelLoadError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc
    serve_protocol(model, config)


if __name__ == "__main__":
    main()
