"""Atomic file output (temp file in the target directory, then rename)."""

import os
import tempfile

import numpy as np


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(config_echo, columns, rows):
    lines = [f"# config: {config_echo}", ",".join(columns)]
    for r in rows:
        lines.append(",".join(_cell(v) for v in r))
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    # np.float64 subclasses float, and its repr is "np.float64(...)" on numpy 2
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
