from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Union

from pandas import DataFrame

from glebench import log
from glebench.processors import write_artifact


@dataclass
class ExperimentReport:
    """ Represent the results of one subcommand.

    Parameters
    ----------
    command
        The subcommand
    summary
        The JSON summary
    tables
        The CSV tables by file stem
    manifest
        Resolved configuration, versions, seed, checks and every derived number of the run
    scripts
        Plot command files by file name
    figures
        Functions drawing a figure into a given file, by file name
    """
    command: str
    summary: dict
    tables: Dict[str, DataFrame] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    scripts: Dict[str, str] = field(default_factory=dict)
    figures: Dict[str, Callable[[Path], None]] = field(default_factory=dict)

    def write(self, output_dir: Union[str, Path]) -> List[Path]:
        """ Write all artifacts to `output_dir`.

        The files are ``manifest.json``, ``<command>.json``, one ``<stem>.csv`` per table, the plot scripts and
        the figures.

        Returns
        -------
        List[Path]
            The written files
        """
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        written = [write_artifact(self.manifest, "JSON", output_dir / "manifest.json"),
                   write_artifact(self.summary, "JSON", output_dir / f"{self.command}.json")]
        for stem, table in sorted(self.tables.items()):
            written.append(write_artifact(table, "CSV", output_dir / f"{stem}.csv"))
        for name, script in sorted(self.scripts.items()):
            written.append(write_artifact(script, "TEXT", output_dir / name))
        for name, draw in sorted(self.figures.items()):
            draw(output_dir / name)
            written.append(output_dir / name)
        log.debug(f"Wrote {len(written)} artifacts to {output_dir}")
        return written
