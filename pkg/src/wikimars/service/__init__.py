"""Stateless HTTP service wrapping the core pipeline.

Every endpoint takes the facts it needs in the request body (the JSON fact
encoding used by snapshots) and returns plain JSON; no state is kept between
requests, mirroring the snapshot-to-snapshot batch contract of the CLI.
"""

from .app import create_app

__all__ = ["create_app"]
