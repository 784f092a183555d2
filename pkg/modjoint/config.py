# -*- coding: utf-8 -*-

""" ModJoint run configuration.
"""

import os
import pathlib

import yaml

from .errors import ConfigError

CONFIG_ENVVAR = "MODJOINT_CONFIG"

# key: (type, default)
CONFIG_KEYS = {
    # inputs
    "network_nodes": ("path", None),
    "network_edges": ("path", None),
    "demand": ("path", None),
    "cost_table": ("path", None),
    "steady_state_table": ("path", None),
    "theta_table": ("path", None),
    "alpha_table": ("path", None),
    # synthetic inputs used when no files are given
    "grid_rows": (int, 10),
    "grid_cols": (int, 10),
    "grid_spacing_m": (float, 400.0),
    "grid_speed_mps": (float, 8.0),
    "synthetic_requests_per_day": (int, 2000),
    "synthetic_hotspot_cluster": ("optional_int", None),
    "synthetic_hotspot_weight": (float, 0.0),
    # fleet and feasibility
    "n_exclusive": (int, 50),
    "n_shared": (int, 25),
    "batch_window_s": (float, 30.0),
    "max_wait_s": (float, 300.0),
    "max_delay_s": (float, 600.0),
    "horizon_s": (float, 86400.0),
    # choice model
    "beta_p": (float, -0.074),
    "beta_w": (float, -0.0035),
    "beta_t": (float, -0.002),
    "price_multiplier": (float, 1.8),
    "asc_e": (float, 0.0),
    "asc_s": (float, 0.0),
    "asc_o": (float, 0.0),
    "outside_wait_s": (float, 300.0),
    "outside_price_factor": (float, 1.0),
    # costs
    "per_mile_cost": (float, 0.1458),
    "c_p": (float, 5.0),
    "retrospective_multiplier": (float, 0.0),
    "retrospective_use_shared_duration": (bool, True),
    "n_clusters": (int, 25),
    "n_intervals": (int, 72),
    "period_s": (float, 1200.0),
    "wait_coeff_e": (float, 240.0),
    "wait_coeff_s": (float, 240.0),
    "zeta_s": (float, 1.2),
    "shared_trip_factor": (float, 1.25),
    # static pricing benchmark
    "f_min": (float, 7.0),
    "f_base": (float, 2.55),
    "f_t": (float, 0.35 / 60),
    "f_d": (float, 1.75),
    "shared_discount": (float, 0.3),
    "shared_surcharge": (float, 0.2),
    # pricing and dispatch
    "price_floor": ("optional_float", None),
    "brute_force_step": (float, 0.01),
    "esv_candidates": (int, 1),
    "rebalance": ("rebalance", "auto"),
    "rebalance_idle_s": (float, 300.0),
    "workers": (int, 1),
    "seed": (int, 0),
}

DEFAULTS = {k: default for k, (_, default) in CONFIG_KEYS.items()}


def _positive(v):
    return v > 0


def _nonnegative(v):
    return v >= 0


def _nonpositive(v):
    return v <= 0


def _unit_interval(v):
    return 0 <= v <= 1


CONFIG_CHECKS = {
    "grid_rows": (_positive, "must be positive"),
    "grid_cols": (_positive, "must be positive"),
    "grid_spacing_m": (_positive, "must be positive"),
    "grid_speed_mps": (_positive, "must be positive"),
    "synthetic_requests_per_day": (_nonnegative, "must be nonnegative"),
    "synthetic_hotspot_weight": (_unit_interval, "must be in [0, 1]"),
    "n_exclusive": (_nonnegative, "must be nonnegative"),
    "n_shared": (_nonnegative, "must be nonnegative"),
    "batch_window_s": (_positive, "must be positive"),
    "max_wait_s": (_positive, "must be positive"),
    "max_delay_s": (_positive, "must be positive"),
    "horizon_s": (_positive, "must be positive"),
    "beta_p": (lambda v: v < 0, "must be negative"),
    "beta_w": (_nonpositive, "must not be positive"),
    "beta_t": (_nonpositive, "must not be positive"),
    "price_multiplier": (lambda v: v >= 1, "must be at least 1"),
    "outside_wait_s": (_nonnegative, "must be nonnegative"),
    "outside_price_factor": (_positive, "must be positive"),
    "per_mile_cost": (_nonnegative, "must be nonnegative"),
    "c_p": (_nonnegative, "must be nonnegative"),
    "retrospective_multiplier": (_unit_interval, "must be in [0, 1]"),
    "n_clusters": (_positive, "must be positive"),
    "n_intervals": (_positive, "must be positive"),
    "period_s": (_positive, "must be positive"),
    "wait_coeff_e": (_positive, "must be positive"),
    "wait_coeff_s": (_positive, "must be positive"),
    "zeta_s": (lambda v: 0 < v <= 2, "must be in (0, 2]"),
    "shared_trip_factor": (lambda v: v >= 1, "must be at least 1"),
    "f_min": (_nonnegative, "must be nonnegative"),
    "f_base": (_nonnegative, "must be nonnegative"),
    "f_t": (_nonnegative, "must be nonnegative"),
    "f_d": (_nonnegative, "must be nonnegative"),
    "shared_discount": (_nonnegative, "must be nonnegative"),
    "shared_surcharge": (_nonnegative, "must be nonnegative"),
    "brute_force_step": (lambda v: 0 < v <= 0.5, "must be in (0, 0.5]"),
    "esv_candidates": (_positive, "must be positive"),
    "rebalance_idle_s": (_nonnegative, "must be nonnegative"),
    "workers": (_positive, "must be positive"),
}


def _coerce(key, value):
    kind, _ = CONFIG_KEYS[key]
    if kind == "path":
        if value is None or isinstance(value, str):
            return value
    elif kind == "rebalance":
        if isinstance(value, bool) or value == "auto":
            return value
    elif kind == "optional_int":
        if value is None or (isinstance(value, int) and not isinstance(value, bool)):
            return value
    elif kind == "optional_float":
        if value is None:
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    raise ConfigError(
        "Config key {!r} has invalid value {!r} (expected {}).".format(
            key, value, getattr(kind, "__name__", kind)
        )
    )


class RunConfig:
    """ Holder for a run configuration.

        Values read from the configuration file take precedence over the
        built-in defaults listed in `CONFIG_KEYS`.

        :type values:
            None or dict
        :param values:
            A flat dictionary of configuration values.
        :type base_dir:
            None or str
        :param base_dir:
            The directory relative paths are resolved against. Defaults to
            the current working directory.
    """

    def __init__(self, values=None, base_dir=None):
        self._base_dir = pathlib.Path(base_dir) if base_dir is not None else None
        self._values = {}
        for k, v in (values or {}).items():
            self[k] = v

    @classmethod
    def load(cls, cfg=None, environ=None):
        """ Load a configuration file.

            :type cfg:
                None or str
            :param cfg:
                The path to the configuration file. If None, the path in the
                MODJOINT_CONFIG environment variable is used. If that is also
                missing, a configuration holding only the defaults is returned.
            :type environ:
                None or dict
            :param environ:
                The environment to consult. Defaults to os.environ.

            :rtype: RunConfig
        """
        if environ is None:
            environ = os.environ
        if cfg is None:
            cfg = environ.get(CONFIG_ENVVAR)
        if cfg is None:
            return cls()
        path = pathlib.Path(cfg)
        if not path.is_file():
            raise ConfigError("Configuration file {} does not exist.".format(cfg))
        with path.open(encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as err:
                raise ConfigError(
                    "Configuration file {} is not valid YAML: {}".format(cfg, err)
                )
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(
                "Configuration file {} must contain key-value pairs.".format(cfg)
            )
        return cls(data, base_dir=path.parent)

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        try:
            return self[name]
        except ConfigError:
            raise AttributeError(name)

    def __getitem__(self, name):
        if name in self._values:
            return self._values[name]
        if name in DEFAULTS:
            return DEFAULTS[name]
        raise ConfigError("Unknown config key {!r}.".format(name))

    def __setitem__(self, name, value):
        if name not in CONFIG_KEYS:
            raise ConfigError("Unknown config key {!r}.".format(name))
        value = _coerce(name, value)
        check = CONFIG_CHECKS.get(name)
        if check is not None and value is not None:
            ok, message = check
            if not ok(value):
                raise ConfigError(
                    "Config key {!r} {} (got {!r}).".format(name, message, value)
                )
        self._values[name] = value

    def keys(self):
        return sorted(CONFIG_KEYS)

    def get(self, name, default=None):
        if name in self._values:
            return self._values[name]
        return DEFAULTS.get(name, default)

    def path(self, name):
        """ Return the configured path for a key, resolved against the
            configuration file's directory.

            :rtype: None or pathlib.Path
        """
        value = self[name]
        if value is None:
            return None
        path = pathlib.Path(value)
        if not path.is_absolute() and self._base_dir is not None:
            path = self._base_dir / path
        return path

    def with_overrides(self, **kw):
        """ Return a copy of this configuration with some values replaced. """
        values = dict(self._values)
        values.update(kw)
        return RunConfig(values, base_dir=self._base_dir)

    def snapshot(self):
        """ Return the fully resolved configuration as a dictionary. """
        return {k: self[k] for k in self.keys()}
