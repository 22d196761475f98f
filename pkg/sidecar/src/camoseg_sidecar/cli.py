"""Command line: serve the inference endpoints, or conformance-check a server."""

from __future__ import annotations

import sys

import click

from . import __version__
from .backends import BackendUnavailable, ModelRegistry, load_backend
from .backends.real import DEFAULT_REGISTRY


@click.group()
@click.version_option(version=__version__, prog_name="camoseg-sidecar")
def main() -> None:
    """Inference sidecar for the camoseg provider wire protocol."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True, envvar="SIDECAR_HOST")
@click.option("--port", type=int, default=8971, show_default=True, envvar="SIDECAR_PORT")
@click.option(
    "--backend", "backend_name",
    type=click.Choice(["real", "stub"]),
    default="real",
    show_default=True,
    envvar="SIDECAR_BACKEND",
    help="'real' loads pretrained models lazily; 'stub' is a deterministic CPU stand-in.",
)
@click.option("--device", default="cpu", show_default=True, envvar="SIDECAR_DEVICE")
@click.option(
    "--session-capacity", type=int, default=4, show_default=True,
    envvar="SIDECAR_SESSION_CAPACITY",
    help="LRU capacity of the uploaded-video store.",
)
@click.option(
    "--allow-concurrent/--serialize-models", default=False, show_default=True,
    envvar="SIDECAR_ALLOW_CONCURRENT",
    help="Allow concurrent inference per model instead of one-at-a-time guards.",
)
@click.option("--flow-model", default=DEFAULT_REGISTRY.flow, show_default=True, envvar="SIDECAR_FLOW_MODEL")
@click.option("--detector-model", default=DEFAULT_REGISTRY.detector, show_default=True, envvar="SIDECAR_DETECTOR_MODEL")
@click.option("--segmenter-model", default=DEFAULT_REGISTRY.segmenter, show_default=True, envvar="SIDECAR_SEGMENTER_MODEL")
def serve(
    host, port, backend_name, device, session_capacity, allow_concurrent,
    flow_model, detector_model, segmenter_model,
) -> None:
    """Run the HTTP inference server."""
    import uvicorn

    from .app import ServerConfig, create_app

    registry = ModelRegistry(flow=flow_model, detector=detector_model, segmenter=segmenter_model)
    try:
        backend = load_backend(backend_name, device=device, registry=registry)
    except (BackendUnavailable, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(
        ServerConfig(
            backend=backend,
            session_capacity=session_capacity,
            allow_concurrent=allow_concurrent,
        )
    )
    click.echo(f"serving {backend.registry.as_dict()} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.argument("base_url")
def conformance(base_url: str) -> None:
    """Replay the golden suite against BASE_URL and report per-endpoint results."""
    from .conformance import conformance_check

    report = conformance_check(base_url)
    click.echo(report.summary())
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
