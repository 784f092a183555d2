# -*- coding: utf-8 -*-

""" Helper functions for the modjoint CLI. """

import datetime
import enum
import hashlib
import json
import logging
import pathlib
import sys
from dataclasses import dataclass
from typing import Dict, Optional

import click
import numpy as np

from . import __version__ as modjoint_version
from .errors import ModJointError

INPUT_KEYS = (
    "network_nodes",
    "network_edges",
    "demand",
    "cost_table",
    "steady_state_table",
    "theta_table",
)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def json_serializer(value):
    """ JSON serializer for numpy scalars, enums, paths and datetimes. """
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, pathlib.PurePath):
        return str(value)
    if isinstance(value, datetime.datetime):
        return str(value)
    raise TypeError("Serializing {!r} to JSON not supported.".format(value))


def click_echo_json(response):
    """ Echo JSON via click.echo. """
    click.echo(json.dumps(response, indent=2, default=json_serializer))


def write_json(response, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(response, f, indent=2, default=json_serializer)
        f.write("\n")


def configure_logging(level):
    """ Send log records at or above `level` to stderr. """
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def file_sha256(path):
    """ Return the hex SHA-256 digest of a file. """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def parse_floats(ctx, param, value):
    """ Click callback parsing a comma separated list of numbers. """
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("Expected comma separated numbers.")


@dataclass(frozen=True)
class RunManifest:
    """ Everything needed to reproduce a report: the resolved configuration,
        digests of the input files, the seed and the package version.
    """

    config: dict
    inputs: Dict[str, dict]
    seed: int
    version: str
    wall_clock: Optional[dict] = None

    @classmethod
    def for_config(cls, cfg, wall_clock=None):
        """ Describe a run of a configuration.

            :param RunConfig cfg:
                The configuration the run used.
            :type wall_clock:
                None or dict
            :param wall_clock:
                Timing metadata, only recorded on request since it differs
                between runs.

            :rtype: RunManifest
        """
        inputs = {}
        for key in INPUT_KEYS:
            path = cfg.path(key)
            if path is not None:
                inputs[key] = {"path": str(path), "sha256": file_sha256(path)}
        return cls(
            config=cfg.snapshot(),
            inputs=inputs,
            seed=cfg.seed,
            version=modjoint_version,
            wall_clock=wall_clock,
        )

    def to_dict(self):
        manifest = {
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "version": self.version,
        }
        if self.wall_clock is not None:
            manifest["wall_clock"] = self.wall_clock
        return manifest


class ModJointGroup(click.Group):
    """ A click group that reports ModJoint errors as click errors. """

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ModJointError as err:
            raise click.ClickException(str(err))
