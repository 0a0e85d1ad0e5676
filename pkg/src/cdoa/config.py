"""Run configuration files.

Either a JSON object or plain ``key = value`` lines with dotted section
names::

    # comments start with '#'
    aperture.num_masks = 100
    dataset.grid_step = 5
    train.learning_rate = 5e-6
    sweep.snr_points_db = [-20, -10, 0, 10, 20, 30]

Values are parsed as JSON when possible and kept as strings otherwise.
Sections: ``aperture`` (ApertureConfig fields), ``dataset``, ``train``
(TrainConfig fields plus ``gal_widths``/``dense_widths``), ``sweep`` and
``experiment``.
"""

from __future__ import annotations

import json

from .errors import ValidationError

SECTIONS = ("aperture", "dataset", "train", "sweep", "experiment")


def parse_config(text: str) -> dict:
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad JSON config: {exc}") from exc
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"config line {lineno}: expected key = value")
            key, value = (t.strip() for t in line.split("=", 1))
            section, _, name = key.partition(".")
            if not name:
                raise ValidationError(f"config line {lineno}: key must be section.name")
            try:
                parsed = json.loads(value)
            except json.JSONDecodeError:
                parsed = value
            data.setdefault(section, {})[name] = parsed
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    return data


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return parse_config(fh.read())
