import json
from pathlib import Path
from typing import Union

import numpy as np
from pandas import DataFrame


class Registry:
    def __init__(self) -> None:
        super().__init__()
        self.funcs = {}

    def register(self, format_name: str):
        def decorator(f):
            self.funcs[format_name] = f
            return f

        return decorator

    def get(self, format_name: str):
        if format_name not in self.funcs:
            raise RuntimeError(f"Can't write artifact: unknown format '{format_name}', known are {sorted(self.funcs)}")
        return self.funcs[format_name]


output_registry = Registry()


def write_artifact(content, output_format: str, output_file: Union[str, Path], **kwargs) -> Path:
    """ Write the content of an artifact in the given format.

    Parameters
    ----------
    content :
        The table, mapping or text to write
    output_format :
        The format, one of ``CSV``, ``JSON`` and ``TEXT``
    output_file :
        The file the artifact is written to
    kwargs :
        Additional arguments that are passed to the writer function

    Returns
    -------
    Path
        The written file
    """
    output_file = Path(output_file)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    f = output_registry.get(output_format)
    f(content, output_file, **kwargs)
    return output_file


def to_builtin(value):
    """ Convert numpy scalars, arrays and paths into JSON-compatible values. """
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(item) for item in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return value.as_posix()
    return value


@output_registry.register("CSV")
def to_csv(table: DataFrame, file: Path, columns=None, **kwargs):
    """ Comma separated, header row, LF line endings, floats in their shortest round-trip form. """
    if columns is not None:
        table = table[columns]
    with open(file, "w", encoding="utf-8", newline="") as csv_file:
        table.to_csv(csv_file, index=False, sep=",", lineterminator="\n", na_rep="nan")


@output_registry.register("JSON")
def to_json(content: dict, file: Path, **kwargs):
    with open(file, "w", encoding="utf-8", newline="\n") as json_file:
        json.dump(to_builtin(content), json_file, sort_keys=True, indent=2, ensure_ascii=False)
        json_file.write("\n")


@output_registry.register("TEXT")
def to_text(content: str, file: Path, **kwargs):
    with open(file, "w", encoding="utf-8", newline="\n") as text_file:
        text_file.write(content)
