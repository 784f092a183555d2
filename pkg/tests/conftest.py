# -*- coding: utf-8 -*-

""" Configuration for pytest. """

from .fixtures import (  # noqa: imported so that pytest can find the fixtures
    cfg,
    esv_batch,
    fixture_files,
    grid_net,
    small_net,
)
